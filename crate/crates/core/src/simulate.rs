//! Euler–Maruyama integration of the coupled system, the frozen fast process and the
//! averaged limit, with mirror reflection at domain boundaries.
//!
//! The coupled system advances on a single uniform fast grid `h = dt / m`, where `m`
//! is the smallest integer with `h <= eps * fast_step_factor`. Each path owns its
//! random streams (see [`crate::rng`]), so ensembles do not depend on how paths are
//! scheduled across workers.

use std::io::{self, Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, SlowFn, StateDomain};
use crate::par::{self, Execution};
use crate::rng::{stream_id, NormalStream, StreamTag};

/// Upper bound on `dt / epsilon` for coupled runs.
pub const STABILITY_GUARD: f64 = 0.1;
pub const DEFAULT_FAST_STEP_FACTOR: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoreMode {
    TerminalOnly,
    FullPaths,
    /// Every k-th slow step (plus the initial and terminal states).
    Strided(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Time-scale ratio of the fast component.
    pub epsilon: f64,
    /// Slow time step.
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub store: StoreMode,
    /// Fast grid step in units of `epsilon`.
    pub fast_step_factor: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            dt: 1e-3,
            horizon: 1.0,
            n_paths: 1000,
            seed: 0,
            store: StoreMode::TerminalOnly,
            fast_step_factor: DEFAULT_FAST_STEP_FACTOR,
            x0: 0.0,
            y0: 0.0,
        }
    }
}

impl SimConfig {
    /// Defaults with the model's initial state.
    pub fn for_model(model: &ModelSpec) -> Self {
        Self { x0: model.default_initial.0, y0: model.default_initial.1, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        positive("fast_step_factor", self.fast_step_factor)?;
        if self.dt >= self.horizon {
            return Err(Error::Config(format!("dt = {} must be below horizon = {}", self.dt, self.horizon)));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be positive".into()));
        }
        if let StoreMode::Strided(0) = self.store {
            return Err(Error::Config("stride must be positive".into()));
        }
        if !(self.x0.is_finite() && self.y0.is_finite()) {
            return Err(Error::Config("initial state must be finite".into()));
        }
        Ok(())
    }

    pub fn validate_coupled(&self) -> Result<()> {
        self.validate()?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.dt / self.epsilon > STABILITY_GUARD * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt/epsilon = {:.4} exceeds the stability guard {STABILITY_GUARD}",
                self.dt / self.epsilon
            )));
        }
        Ok(())
    }

    /// Number of slow steps and the slow step actually used.
    pub fn slow_grid(&self) -> (usize, f64) {
        let n = (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.horizon / n as f64)
    }

    /// Number of fast micro-steps per slow step and the micro-step length.
    pub fn fast_grid(&self) -> (usize, f64) {
        let (_, dt) = self.slow_grid();
        let target = dt.min(self.epsilon * self.fast_step_factor);
        let m = (dt / target - 1e-9).ceil().max(1.0) as usize;
        (m, dt / m as f64)
    }

    fn stores(&self, j: usize, n: usize) -> bool {
        match self.store {
            StoreMode::TerminalOnly => j == n,
            StoreMode::FullPaths => true,
            StoreMode::Strided(k) => j.is_multiple_of(k) || j == n,
        }
    }
}

/// One stored trajectory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub slow: Vec<f64>,
    /// Empty for averaged runs.
    pub fast: Vec<f64>,
}

impl PathSample {
    fn with_capacity(n: usize, fast: bool) -> Self {
        Self {
            times: Vec::with_capacity(n),
            slow: Vec::with_capacity(n),
            fast: if fast { Vec::with_capacity(n) } else { Vec::new() },
        }
    }

    fn push(&mut self, t: f64, x: f64, y: Option<f64>) {
        self.times.push(t);
        self.slow.push(x);
        if let Some(y) = y {
            self.fast.push(y);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnsembleKind {
    Coupled,
    Frozen { x: f64 },
    Averaged { paired: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub config: SimConfig,
    pub model: String,
    pub kind: EnsembleKind,
    pub paths: Vec<PathSample>,
    /// Stream id of each path's driving noise.
    pub stream_ids: Vec<u64>,
}

impl Ensemble {
    pub fn terminal_slow(&self) -> Vec<f64> {
        self.paths.iter().filter_map(|p| p.slow.last().copied()).collect()
    }

    pub fn terminal_fast(&self) -> Vec<f64> {
        self.paths.iter().filter_map(|p| p.fast.last().copied()).collect()
    }

    /// One row per stored state: `path_id,t,x,y` (no `y` column for averaged runs).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let has_fast = !matches!(self.kind, EnsembleKind::Averaged { .. });
        writeln!(w, "{}", if has_fast { "path_id,t,x,y" } else { "path_id,t,x" })?;
        for (id, p) in self.paths.iter().enumerate() {
            for k in 0..p.times.len() {
                if has_fast {
                    writeln!(w, "{id},{},{},{}", p.times[k], p.slow[k], p.fast[k])?;
                } else {
                    writeln!(w, "{id},{},{}", p.times[k], p.slow[k])?;
                }
            }
        }
        Ok(())
    }

    /// Flat little-endian layout:
    ///
    /// ```text
    /// magic "SFENSEMB" | u32 version = 1 | u32 dx = 1 | u32 dy (0 or 1) | u64 n_paths
    /// per path: u64 n_states, then n_states records of f64 t, f64 x[, f64 y]
    /// ```
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dy: u32 = if matches!(self.kind, EnsembleKind::Averaged { .. }) { 0 } else { 1 };
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&dy.to_le_bytes())?;
        w.write_all(&(self.paths.len() as u64).to_le_bytes())?;
        for p in &self.paths {
            w.write_all(&(p.times.len() as u64).to_le_bytes())?;
            for k in 0..p.times.len() {
                w.write_all(&p.times[k].to_le_bytes())?;
                w.write_all(&p.slow[k].to_le_bytes())?;
                if dy == 1 {
                    w.write_all(&p.fast[k].to_le_bytes())?;
                }
            }
        }
        Ok(())
    }
}

pub const BINARY_MAGIC: &[u8; 8] = b"SFENSEMB";

/// Read the path data written by [`Ensemble::write_binary`].
pub fn read_binary_paths<R: Read>(mut r: R) -> io::Result<Vec<PathSample>> {
    fn u32le<R: Read>(r: &mut R) -> io::Result<u32> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64le<R: Read>(r: &mut R) -> io::Result<u64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64le<R: Read>(r: &mut R) -> io::Result<f64> {
        Ok(f64::from_bits(u64le(r)?))
    }
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(bad("bad magic"));
    }
    if u32le(&mut r)? != 1 {
        return Err(bad("unsupported version"));
    }
    let _dx = u32le(&mut r)?;
    let dy = u32le(&mut r)?;
    let n = u64le(&mut r)? as usize;
    let mut paths = Vec::with_capacity(n);
    for _ in 0..n {
        let k = u64le(&mut r)? as usize;
        let mut p = PathSample::with_capacity(k, dy == 1);
        for _ in 0..k {
            let t = f64le(&mut r)?;
            let x = f64le(&mut r)?;
            let y = if dy == 1 { Some(f64le(&mut r)?) } else { None };
            p.push(t, x, y);
        }
        paths.push(p);
    }
    Ok(paths)
}

#[inline]
fn check_finite(x: f64, y: f64, path: usize, step: usize) -> Result<()> {
    if x.is_finite() && y.is_finite() {
        Ok(())
    } else {
        Err(Error::BlowUp { path, step })
    }
}

fn check_initial(model: &ModelSpec, config: &SimConfig) -> Result<()> {
    model.check_point(config.x0, config.y0)
}

/// Integrate the coupled slow-fast system.
pub fn simulate_coupled(model: &ModelSpec, config: &SimConfig) -> Result<Ensemble> {
    simulate_coupled_with(model, config, Execution::default())
}

pub fn simulate_coupled_with(model: &ModelSpec, config: &SimConfig, exec: Execution) -> Result<Ensemble> {
    config.validate_coupled()?;
    check_initial(model, config)?;
    let (n_slow, dt) = config.slow_grid();
    let (m, h) = config.fast_grid();
    let sqrt_h = h.sqrt();
    let inv_eps = 1.0 / config.epsilon;
    let sqrt_inv_eps = inv_eps.sqrt();
    let c = &model.coefficients;
    let (sd, fd) = (model.slow_domain, model.fast_domain);

    let paths = par::try_map_indexed(config.n_paths, exec, |i| {
        let mut xi = NormalStream::new(config.seed, i, StreamTag::Slow);
        let mut eta = NormalStream::new(config.seed, i, StreamTag::Fast);
        let (mut x, mut y) = (config.x0, config.y0);
        let mut out = PathSample::with_capacity(stored_len(config, n_slow), true);
        if config.stores(0, n_slow) {
            out.push(0.0, x, Some(y));
        }
        for j in 1..=n_slow {
            for k in 0..m {
                let co = c.eval(x, y);
                let dw = sqrt_h * xi.next();
                let db = sqrt_h * eta.next();
                let xn = x + co.b * h + co.sigma * dw;
                let yn = y + co.f * inv_eps * h + co.g * sqrt_inv_eps * db;
                x = sd.reflect(xn);
                y = fd.reflect(yn);
                check_finite(x, y, i, (j - 1) * m + k + 1)?;
                debug_assert!(sd.contains(x) && fd.contains(y));
            }
            if config.stores(j, n_slow) {
                out.push(j as f64 * dt, x, Some(y));
            }
        }
        Ok(out)
    })?;
    Ok(Ensemble {
        config: config.clone(),
        model: model.name.clone(),
        kind: EnsembleKind::Coupled,
        stream_ids: (0..config.n_paths).map(|i| stream_id(i, StreamTag::Slow)).collect(),
        paths,
    })
}

fn stored_len(config: &SimConfig, n: usize) -> usize {
    match config.store {
        StoreMode::TerminalOnly => 1,
        StoreMode::FullPaths => n + 1,
        StoreMode::Strided(k) => n / k + 2,
    }
}

/// Integrate the fast equation with the slow state frozen at `x` (time-scale ratio 1,
/// step `dt`, initial value `config.y0`).
pub fn simulate_frozen(model: &ModelSpec, x: f64, config: &SimConfig) -> Result<Ensemble> {
    simulate_frozen_with(model, x, config, Execution::default())
}

pub fn simulate_frozen_with(model: &ModelSpec, x: f64, config: &SimConfig, exec: Execution) -> Result<Ensemble> {
    config.validate()?;
    model.check_point(x, config.y0)?;
    let (n, dt) = config.slow_grid();
    let sqrt_dt = dt.sqrt();
    let f = &model.coefficients.f;
    let g = &model.coefficients.g;
    let fd = model.fast_domain;
    let paths = par::try_map_indexed(config.n_paths, exec, |i| {
        let mut eta = NormalStream::new(config.seed, i, StreamTag::Fast);
        let mut y = config.y0;
        let mut out = PathSample::with_capacity(stored_len(config, n), true);
        if config.stores(0, n) {
            out.push(0.0, x, Some(y));
        }
        for j in 1..=n {
            let yn = y + f(x, y) * dt + g(x, y) * sqrt_dt * eta.next();
            y = fd.reflect(yn);
            check_finite(x, y, i, j)?;
            debug_assert!(fd.contains(y));
            if config.stores(j, n) {
                out.push(j as f64 * dt, x, Some(y));
            }
        }
        Ok(out)
    })?;
    Ok(Ensemble {
        config: config.clone(),
        model: model.name.clone(),
        kind: EnsembleKind::Frozen { x },
        stream_ids: (0..config.n_paths).map(|i| stream_id(i, StreamTag::Fast)).collect(),
        paths,
    })
}

/// Coefficients of an averaged (limit) slow equation.
pub trait AveragedDynamics: Sync {
    fn drift(&self, x: f64) -> f64;
    fn diffusion(&self, x: f64) -> f64;
    fn domain(&self) -> StateDomain;
    fn label(&self) -> String;
}

/// Averaged equation given by closures.
#[derive(Clone)]
pub struct AveragedSde {
    pub name: String,
    pub b_bar: SlowFn,
    pub sigma_bar: SlowFn,
    pub domain: StateDomain,
}

impl AveragedSde {
    pub fn new(
        name: impl Into<String>,
        b_bar: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma_bar: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: StateDomain,
    ) -> Self {
        Self { name: name.into(), b_bar: Arc::new(b_bar), sigma_bar: Arc::new(sigma_bar), domain }
    }
}

impl AveragedDynamics for AveragedSde {
    fn drift(&self, x: f64) -> f64 {
        (self.b_bar)(x)
    }
    fn diffusion(&self, x: f64) -> f64 {
        (self.sigma_bar)(x)
    }
    fn domain(&self) -> StateDomain {
        self.domain
    }
    fn label(&self) -> String {
        self.name.clone()
    }
}

/// Integrate the averaged equation with step `dt`.
///
/// With `paired = true` the Brownian increment over each slow step is the sum of the
/// fast-grid increments that [`simulate_coupled`] draws from the same seed, so both
/// runs are driven by the same `W`.
pub fn simulate_averaged<A: AveragedDynamics + ?Sized>(avg: &A, config: &SimConfig, paired: bool) -> Result<Ensemble> {
    simulate_averaged_with(avg, config, paired, Execution::default())
}

pub fn simulate_averaged_with<A: AveragedDynamics + ?Sized>(
    avg: &A,
    config: &SimConfig,
    paired: bool,
    exec: Execution,
) -> Result<Ensemble> {
    if paired {
        config.validate_coupled()?;
    } else {
        config.validate()?;
    }
    let domain = avg.domain();
    if !domain.contains(config.x0) {
        return Err(Error::Domain { coordinate: "x", value: config.x0 });
    }
    let (n, dt) = config.slow_grid();
    let (m, h) = if paired { config.fast_grid() } else { (1, dt) };
    let sqrt_h = h.sqrt();
    let paths = par::try_map_indexed(config.n_paths, exec, |i| {
        let mut xi = NormalStream::new(config.seed, i, StreamTag::Slow);
        let mut x = config.x0;
        let mut out = PathSample::with_capacity(stored_len(config, n), false);
        if config.stores(0, n) {
            out.push(0.0, x, None);
        }
        for j in 1..=n {
            let mut dw = 0.0;
            for _ in 0..m {
                dw += sqrt_h * xi.next();
            }
            let xn = x + avg.drift(x) * dt + avg.diffusion(x) * dw;
            x = domain.reflect(xn);
            check_finite(x, 0.0, i, j)?;
            if config.stores(j, n) {
                out.push(j as f64 * dt, x, None);
            }
        }
        Ok(out)
    })?;
    Ok(Ensemble {
        config: config.clone(),
        model: avg.label(),
        kind: EnsembleKind::Averaged { paired },
        stream_ids: (0..config.n_paths).map(|i| stream_id(i, StreamTag::Slow)).collect(),
        paths,
    })
}

/// Sample mean and unbiased variance.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{get_builtin, CoefficientSet};

    fn zero_model() -> ModelSpec {
        ModelSpec::new(
            "zero",
            CoefficientSet::new(|_, _| 0.0, |_, _| 0.0, |_, _| 0.0, |_, _| 0.0),
            StateDomain::FullLine,
            StateDomain::FullLine,
        )
    }

    #[test]
    fn zero_dynamics_stay_put() {
        let cfg = SimConfig {
            epsilon: 0.1,
            dt: 0.01,
            horizon: 0.5,
            n_paths: 8,
            x0: 0.3,
            y0: -1.2,
            store: StoreMode::FullPaths,
            ..SimConfig::default()
        };
        let e = simulate_coupled(&zero_model(), &cfg).unwrap();
        for p in &e.paths {
            assert!(p.slow.iter().all(|&x| x == 0.3));
            assert!(p.fast.iter().all(|&y| y == -1.2));
            assert_eq!(p.times.len(), 51);
        }
        let fz = simulate_frozen(&zero_model(), 0.3, &cfg).unwrap();
        assert!(fz.terminal_fast().iter().all(|&y| y == -1.2));
        let avg = AveragedSde::new("zero", |_| 0.0, |_| 0.0, StateDomain::FullLine);
        let a = simulate_averaged(&avg, &cfg, false).unwrap();
        assert!(a.terminal_slow().iter().all(|&x| x == 0.3));
    }

    #[test]
    fn brownian_variance() {
        let m = ModelSpec::new(
            "bm",
            CoefficientSet::new(|_, _| 0.0, |_, _| 1.0, |_, _| 0.0, |_, _| 0.0),
            StateDomain::FullLine,
            StateDomain::FullLine,
        );
        let cfg = SimConfig {
            epsilon: 1.0,
            dt: 0.1,
            horizon: 1.0,
            n_paths: 100_000,
            fast_step_factor: 0.1,
            seed: 5,
            ..SimConfig::default()
        };
        let e = simulate_coupled(&m, &cfg).unwrap();
        let (_, var) = mean_var(&e.terminal_slow());
        // standard error of a unit sample variance at n = 1e5 is sqrt(2/n)
        assert!((var - 1.0).abs() < 3.0 * (2.0f64 / 1e5).sqrt(), "var {var}");
    }

    #[test]
    fn example21_stays_in_domain() {
        let m = get_builtin("example21").unwrap();
        let cfg = SimConfig {
            epsilon: 0.05,
            dt: 0.005,
            horizon: 1.0,
            n_paths: 200,
            store: StoreMode::FullPaths,
            x0: 0.9,
            y0: 0.1,
            ..SimConfig::default()
        };
        let e = simulate_coupled(&m, &cfg).unwrap();
        for p in &e.paths {
            assert!(p.slow.iter().all(|&x| (0.0..=1.0).contains(&x)));
            assert!(p.fast.iter().all(|&y| y >= 0.0));
        }
        let f = simulate_frozen(&m, 0.5, &SimConfig { dt: 0.01, horizon: 5.0, ..cfg }).unwrap();
        assert!(f.paths.iter().all(|p| p.fast.iter().all(|&y| y >= 0.0)));
    }

    #[test]
    fn frozen_ou_mean() {
        let m = get_builtin("ou-coupled").unwrap();
        let cfg = SimConfig { dt: 0.01, horizon: 10.0, n_paths: 20_000, y0: 0.0, seed: 9, ..SimConfig::default() };
        let e = simulate_frozen(&m, 2.0, &cfg).unwrap();
        let ys = e.terminal_fast();
        let (mean, var) = mean_var(&ys);
        assert!((mean - 2.0).abs() < 3.0 * (var / ys.len() as f64).sqrt() + 2.0 * (-10.0f64).exp());
    }

    #[test]
    fn averaged_ode_decay() {
        let avg = AveragedSde::new("decay", |x| -x, |_| 0.0, StateDomain::FullLine);
        let cfg = SimConfig { dt: 1e-3, horizon: 1.0, n_paths: 1, x0: 1.0, ..SimConfig::default() };
        let x = simulate_averaged(&avg, &cfg, false).unwrap().terminal_slow()[0];
        assert!((x - (-1.0f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn paired_streams_share_slow_noise() {
        // with b = 0 and sigma = 1 the coupled slow state is exactly x0 + W_T
        let m = ModelSpec::new(
            "bm",
            CoefficientSet::new(|_, _| 0.0, |_, _| 1.0, |_, y| -y, |_, _| 1.0),
            StateDomain::FullLine,
            StateDomain::FullLine,
        );
        let cfg = SimConfig { epsilon: 0.05, dt: 0.005, horizon: 0.2, n_paths: 16, seed: 3, ..SimConfig::default() };
        let c = simulate_coupled(&m, &cfg).unwrap();
        let avg = AveragedSde::new("bm", |_| 0.0, |_| 1.0, StateDomain::FullLine);
        let a = simulate_averaged(&avg, &cfg, true).unwrap();
        for (xc, xa) in c.terminal_slow().iter().zip(a.terminal_slow()) {
            assert!((xc - xa).abs() < 1e-12);
        }
        let u = simulate_averaged(&avg, &cfg, false).unwrap();
        assert!(c.terminal_slow().iter().zip(u.terminal_slow()).any(|(p, q)| (p - q).abs() > 1e-3));
    }

    #[test]
    fn stability_guard_is_a_config_error() {
        let cfg = SimConfig { epsilon: 0.01, dt: 0.01, ..SimConfig::default() };
        assert!(matches!(simulate_coupled(&zero_model(), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn blow_up_names_path() {
        let m = ModelSpec::new(
            "explode",
            CoefficientSet::new(|x, _| x * x * 1e3, |_, _| 0.0, |_, _| 0.0, |_, _| 0.0),
            StateDomain::FullLine,
            StateDomain::FullLine,
        );
        let cfg = SimConfig { epsilon: 1.0, dt: 0.01, horizon: 10.0, n_paths: 3, x0: 10.0, ..SimConfig::default() };
        assert!(matches!(simulate_coupled(&m, &cfg), Err(Error::BlowUp { path: 0, .. })));
    }

    #[test]
    fn worker_count_does_not_matter() {
        let m = get_builtin("ou-coupled").unwrap();
        let cfg = SimConfig { epsilon: 0.1, dt: 0.01, n_paths: 64, seed: 42, x0: 1.0, y0: 1.0, ..SimConfig::default() };
        let seq = simulate_coupled_with(&m, &cfg, Execution::Sequential).unwrap();
        let p1 = par::with_threads(1, || simulate_coupled_with(&m, &cfg, Execution::Parallel).unwrap());
        let p4 = par::with_threads(4, || simulate_coupled_with(&m, &cfg, Execution::Parallel).unwrap());
        assert_eq!(seq, p1);
        assert_eq!(seq, p4);
    }

    #[test]
    fn binary_and_csv_layouts() {
        let m = get_builtin("ou-coupled").unwrap();
        let cfg = SimConfig {
            epsilon: 0.1,
            dt: 0.01,
            horizon: 0.1,
            n_paths: 3,
            store: StoreMode::Strided(5),
            ..SimConfig::default()
        };
        let e = simulate_coupled(&m, &cfg).unwrap();
        assert_eq!(e.paths[0].times.len(), 3);
        let mut buf = Vec::new();
        e.write_binary(&mut buf).unwrap();
        assert_eq!(read_binary_paths(&buf[..]).unwrap(), e.paths);
        assert_eq!(buf.len(), 8 + 12 + 8 + 3 * (8 + 3 * 24));
        let mut csv = Vec::new();
        e.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 9);
        assert!(text.starts_with("path_id,t,x,y\n0,0,"));
    }
}
