//! Serializable run descriptions and their deterministic execution.
//!
//! A [`Command`] fully determines its artifact: running it again (from a [`Manifest`])
//! yields the same bytes, whatever the execution mode or worker count.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::averaging::{build_averaged_model, holder_fit, HolderReference};
use crate::ergodicity::{classify, decay_grid, tv_decay_curve_from, w1_decay_coupling, Initial};
use crate::error::{Error, Result};
use crate::experiments::{run_averaging_convergence, run_l2_failure};
use crate::metrics::{distance, Measure, Metric};
use crate::models::{get_builtin, BUILTIN_NAMES};
use crate::par::Execution;
use crate::simulate::SimConfig;
use crate::stationary::{default_grid, stationary_density};

/// Version stamped into manifests and reports.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum Command {
    ListModels,
    Stationary {
        model: String,
        x: f64,
        points: usize,
    },
    Classify {
        model: String,
        x: f64,
    },
    Distance {
        model: String,
        metric: Metric,
        x1: f64,
        x2: f64,
    },
    Averaged {
        model: String,
        x_grid: Vec<f64>,
    },
    Holder {
        model: String,
        metric: Metric,
        pairs: Vec<(f64, f64)>,
        exponent: f64,
        kappa: f64,
    },
    Converge {
        model: String,
        epsilons: Vec<f64>,
        sim: SimConfig,
    },
    #[serde(rename = "l2fail")]
    L2Fail {
        epsilons: Vec<f64>,
        sim: SimConfig,
    },
    Decay {
        model: String,
        x: f64,
        y0: f64,
        /// Second start for the synchronous coupling.
        y1: f64,
        times: Vec<f64>,
        sim: SimConfig,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ListModels => "list-models",
            Command::Stationary { .. } => "stationary",
            Command::Classify { .. } => "classify",
            Command::Distance { .. } => "distance",
            Command::Averaged { .. } => "averaged",
            Command::Holder { .. } => "holder",
            Command::Converge { .. } => "converge",
            Command::L2Fail { .. } => "l2fail",
            Command::Decay { .. } => "decay",
        }
    }

    fn params(&self) -> Value {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.get("params").cloned())
            .unwrap_or(Value::Object(Default::default()))
    }
}

/// Everything needed to reproduce an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub params: Value,
    pub format: Format,
    pub artifact_version: String,
}

impl Manifest {
    pub fn new(command: &Command, seed: u64, format: Format) -> Self {
        Self {
            command: command.name().into(),
            seed,
            params: command.params(),
            format,
            artifact_version: ARTIFACT_VERSION.into(),
        }
    }

    pub fn to_command(&self) -> Result<Command> {
        let mut v = json!({ "command": self.command });
        if !self.params.as_object().is_some_and(|o| o.is_empty()) {
            v["params"] = self.params.clone();
        }
        serde_json::from_value(v).map_err(|e| Error::Input(format!("manifest does not describe a command: {e}")))
    }
}

fn wrap(cmd: &Command, report: Value) -> Result<Vec<u8>> {
    let doc = json!({
        "schema": format!("slowfast.{}.v1", cmd.name()),
        "artifact_version": ARTIFACT_VERSION,
        "params": cmd.params(),
        "report": report,
    });
    let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| Error::Input(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn verdict_str(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Run `cmd` and render its artifact.
pub fn execute(cmd: &Command, format: Format, exec: Execution) -> Result<Vec<u8>> {
    let mut csv = String::new();
    let report: Value = match cmd {
        Command::ListModels => {
            let models = BUILTIN_NAMES.iter().map(|n| get_builtin(n)).collect::<Result<Vec<_>>>()?;
            csv.push_str("name,slow_domain,fast_domain,analytic\n");
            let mut rows = Vec::new();
            for m in &models {
                let kind = |d| to_value(&d)["kind"].as_str().unwrap_or("").to_string();
                writeln!(csv, "{},{},{},{}", m.name, kind(m.slow_domain), kind(m.fast_domain), m.analytic.is_some())
                    .ok();
                rows.push(json!({
                    "name": m.name,
                    "dx": m.dx,
                    "dy": m.dy,
                    "slow_domain": m.slow_domain,
                    "fast_domain": m.fast_domain,
                    "analytic": m.analytic.is_some(),
                    "default_initial": [m.default_initial.0, m.default_initial.1],
                }));
            }
            json!({ "models": rows })
        }
        Command::Stationary { model, x, points } => {
            let m = get_builtin(model)?;
            let d = stationary_density(&m, *x, &default_grid(&m, *x, *points)?)?;
            let mut buf = Vec::new();
            d.write_csv(&mut buf).ok();
            csv = String::from_utf8(buf).unwrap_or_default();
            json!({ "x": x, "mean": d.mean(), "grid": d.grid, "density": d.values })
        }
        Command::Classify { model, x } => {
            let r = classify(&get_builtin(model)?, *x)?;
            let v = to_value(&r);
            csv.push_str("quantity,side,value\n");
            for key in ["ergodic", "exp_ergodic", "strongly_ergodic"] {
                writeln!(csv, "{key},,{}", verdict_str(&v[key])).ok();
            }
            for i in &r.integrals {
                writeln!(csv, "{},{},{}", i.name, i.side, verdict_str(&to_value(&i.behaviour))).ok();
            }
            v
        }
        Command::Distance { model, metric, x1, x2 } => {
            let m = get_builtin(model)?;
            let p = Measure::Density(crate::stationary::stationary_density_default(&m, *x1)?);
            let q = Measure::Density(crate::stationary::stationary_density_default(&m, *x2)?);
            let r = distance(*metric, &p, &q)?;
            let v = to_value(&r);
            csv.push_str("metric,value,method,resolution\n");
            writeln!(csv, "{},{},{},{}", verdict_str(&v["metric"]), r.value, verdict_str(&v["method"]), r.resolution)
                .ok();
            v
        }
        Command::Averaged { model, x_grid } => {
            let t = build_averaged_model(&get_builtin(model)?, x_grid, exec)?;
            let mut buf = Vec::new();
            t.write_csv(&mut buf).ok();
            csv = String::from_utf8(buf).unwrap_or_default();
            to_value(&t)
        }
        Command::Holder { model, metric, pairs, exponent, kappa } => {
            let r = holder_fit(
                *metric,
                &get_builtin(model)?,
                pairs,
                HolderReference { exponent: *exponent, kappa: *kappa },
                exec,
            )?;
            csv.push_str("x1,x2,distance,bound\n");
            for p in &r.pairs {
                writeln!(csv, "{},{},{},{}", p.x1, p.x2, p.distance, p.bound).ok();
            }
            to_value(&r)
        }
        Command::Converge { model, epsilons, sim } => {
            let r = run_averaging_convergence(&get_builtin(model)?, epsilons, sim, exec)?;
            csv.push_str("epsilon,dt,w1_terminal,noise_floor\n");
            for i in 0..r.epsilons.len() {
                writeln!(csv, "{},{},{},{}", r.epsilons[i], r.steps[i], r.w1_terminal[i], r.noise_floor).ok();
            }
            to_value(&r)
        }
        Command::L2Fail { epsilons, sim } => {
            let r = run_l2_failure(sim, epsilons, exec)?;
            csv.push_str(
                "epsilon,dt,mean_square_gap,mc_standard_error,predicted_limit,relative_error,w1_terminal,noise_floor\n",
            );
            for i in 0..r.epsilons.len() {
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    r.epsilons[i],
                    r.steps[i],
                    r.mean_square_gap[i],
                    r.mc_standard_error[i],
                    r.predicted_limit,
                    r.relative_error[i],
                    r.w1_terminal[i],
                    r.noise_floor
                )
                .ok();
            }
            to_value(&r)
        }
        Command::Decay { model, x, y0, y1, times, sim } => {
            let m = get_builtin(model)?;
            let grid = decay_grid(&m, *x, *y0)?;
            let tv = tv_decay_curve_from(&m, *x, &Initial::Point(*y0), times, &grid)?;
            let w1 = w1_decay_coupling(&m, *x, *y0, *y1, times, sim, exec)?;
            let rates = classify(&m, *x)?.with_rates(&tv, &w1);
            csv.push_str("t,tv,w1_coupling\n");
            for ((t, a), b) in times.iter().zip(&tv.values).zip(&w1.values) {
                writeln!(csv, "{t},{a},{b}").ok();
            }
            json!({ "tv": tv, "w1_coupling": w1, "classification": rates })
        }
    };
    match format {
        Format::Json => wrap(cmd, report),
        Format::Csv => Ok(csv.into_bytes()),
    }
}
