//! Flat TOML run configuration mirroring the simulation settings.

use slowfast::simulate::{SimConfig, StoreMode};

/// Apply `key = value` pairs from a flat TOML document onto `cfg`.
pub fn apply_toml(cfg: &mut SimConfig, text: &str) -> Result<(), String> {
    let table: toml::Table = text.parse().map_err(|e| format!("config file is not valid TOML: {e}"))?;
    for (key, value) in &table {
        let float = || {
            value
                .as_float()
                .or_else(|| value.as_integer().map(|i| i as f64))
                .ok_or_else(|| format!("`{key}` must be a number"))
        };
        let count = || {
            value
                .as_integer()
                .filter(|i| *i >= 0)
                .map(|i| i as u64)
                .ok_or_else(|| format!("`{key}` must be a nonnegative integer"))
        };
        match key.as_str() {
            "epsilon" => cfg.epsilon = float()?,
            "dt" => cfg.dt = float()?,
            "horizon" => cfg.horizon = float()?,
            "n_paths" => cfg.n_paths = count()? as usize,
            "seed" => cfg.seed = count()?,
            "fast_step_factor" => cfg.fast_step_factor = float()?,
            "x0" => cfg.x0 = float()?,
            "y0" => cfg.y0 = float()?,
            "store" => {
                cfg.store = match value.as_str() {
                    Some("terminal-only") => StoreMode::TerminalOnly,
                    Some("full-paths") => StoreMode::FullPaths,
                    _ => match value.as_integer() {
                        Some(k) if k > 0 => StoreMode::Strided(k as usize),
                        _ => {
                            return Err("`store` must be \"terminal-only\", \"full-paths\" or a positive stride".into())
                        }
                    },
                }
            }
            other => return Err(format!("unknown config key `{other}`")),
        }
    }
    Ok(())
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number `{s}` in grid `{spec}`"));
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) || !(b >= a) {
            return Err(format!("grid `{spec}` needs start <= stop and a positive step"));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + i as f64 * h).collect());
    }
    parse_list(spec)
}

pub fn parse_list(spec: &str) -> Result<Vec<f64>, String> {
    spec.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad number `{s}` in list `{spec}`"))).collect()
}

/// `x1,x2;x1,x2;...`
pub fn parse_pairs(spec: &str) -> Result<Vec<(f64, f64)>, String> {
    spec.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|p| match parse_list(p)?.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(format!("pair `{p}` must have exactly two values")),
        })
        .collect()
}
