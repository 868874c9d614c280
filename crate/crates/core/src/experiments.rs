//! Averaging studies: weak convergence of the slow component and the failure of
//! mean-square convergence.

use serde::{Deserialize, Serialize};

use crate::averaging::build_averaged_model;
use crate::error::{Error, Result};
use crate::metrics::w1_empirical;
use crate::models::{get_builtin, ModelSpec, StateDomain};
use crate::par::Execution;
use crate::rng::sub_seed;
use crate::simulate::{
    mean_var, simulate_averaged_with, simulate_coupled_with, AveragedDynamics, AveragedSde, SimConfig, StoreMode,
    STABILITY_GUARD,
};
use crate::stationary::{stationary_density_default, EmpiricalMeasure};

/// Independent pairs of averaged ensembles whose distances are averaged into the noise floor.
pub const NOISE_FLOOR_PAIRS: usize = 4;

/// Averaged dynamics for `model`: closed forms when declared, otherwise a table over
/// the slow domain (or `x0 +- 10` on the line).
pub fn averaged_dynamics(model: &ModelSpec, x0: f64, exec: Execution) -> Result<Box<dyn AveragedDynamics>> {
    if let Some(a) = &model.analytic {
        if let (Some(b), Some(d)) = (a.averaged_drift.clone(), a.averaged_diffusion.clone()) {
            return Ok(Box::new(AveragedSde::new(
                format!("averaged({})", model.name),
                move |x| b(x),
                move |x| d(x).sqrt(),
                model.slow_domain,
            )));
        }
    }
    let (lo, hi, nodes) = match model.slow_domain {
        StateDomain::IntervalReflecting { lower, upper } => (lower, upper, 101),
        StateDomain::HalfLineReflecting { lower } => (lower, lower.max(x0) + 10.0, 201),
        StateDomain::FullLine => (x0 - 10.0, x0 + 10.0, 201),
    };
    let grid: Vec<f64> = (0..nodes).map(|i| lo + (hi - lo) * i as f64 / (nodes - 1) as f64).collect();
    Ok(Box::new(build_averaged_model(model, &grid, exec)?))
}

fn terminal(values: Vec<f64>) -> Result<EmpiricalMeasure> {
    EmpiricalMeasure::new(values)
}

/// Slow step used at a given `epsilon`: the configured step, reduced to satisfy the
/// stability guard.
pub fn step_for(config: &SimConfig, epsilon: f64) -> f64 {
    config.dt.min(STABILITY_GUARD * epsilon)
}

fn check_ladder(epsilons: &[f64]) -> Result<()> {
    if epsilons.is_empty() || epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::Config("epsilon ladder must be nonempty and positive".into()));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("epsilon ladder must be strictly decreasing".into()));
    }
    Ok(())
}

/// Mean W1 distance between [`NOISE_FLOOR_PAIRS`] pairs of independent averaged ensembles.
fn noise_floor(avg: &dyn AveragedDynamics, config: &SimConfig, exec: Execution) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..NOISE_FLOOR_PAIRS {
        let run = |s: u64| -> Result<EmpiricalMeasure> {
            let c = SimConfig { seed: sub_seed(config.seed, s), store: StoreMode::TerminalOnly, ..config.clone() };
            terminal(simulate_averaged_with(avg, &c, false, exec)?.terminal_slow())
        };
        let a = run(1000 + 2 * k as u64)?;
        let b = run(1001 + 2 * k as u64)?;
        total += w1_empirical(&a, &b);
    }
    Ok(total / NOISE_FLOOR_PAIRS as f64)
}

/// Gap in a bounded test functional between the coupled and averaged terminal laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalGaps {
    pub sin: f64,
    pub cos: f64,
    /// `clip(x, -2, 2)^2`
    pub clipped_square: f64,
}

fn functional_gaps(a: &[f64], b: &[f64]) -> FunctionalGaps {
    let mean = |v: &[f64], f: &dyn Fn(f64) -> f64| v.iter().map(|&x| f(x)).sum::<f64>() / v.len() as f64;
    let gap = |f: &dyn Fn(f64) -> f64| (mean(a, f) - mean(b, f)).abs();
    FunctionalGaps {
        sin: gap(&f64::sin),
        cos: gap(&f64::cos),
        clipped_square: gap(&|x: f64| x.clamp(-2.0, 2.0).powi(2)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub model: String,
    pub horizon: f64,
    pub epsilons: Vec<f64>,
    /// Slow step used at each epsilon.
    pub steps: Vec<f64>,
    pub w1_terminal: Vec<f64>,
    pub functionals: Vec<FunctionalGaps>,
    pub n_paths: usize,
    pub seed: u64,
    pub noise_floor: f64,
    pub noise_floor_pairs: usize,
    pub notes: Vec<String>,
}

impl ConvergenceReport {
    /// `w1_terminal` never rises by more than `slack` noise floors along the ladder.
    pub fn nonincreasing_within(&self, slack: f64) -> bool {
        self.w1_terminal.windows(2).all(|w| w[1] <= w[0] + slack * self.noise_floor)
    }
}

/// Distance between the terminal slow laws of the coupled system at each `epsilon` and
/// of the averaged equation, against the noise floor of the averaged ensembles.
pub fn run_averaging_convergence(
    model: &ModelSpec,
    epsilons: &[f64],
    config: &SimConfig,
    exec: Execution,
) -> Result<ConvergenceReport> {
    check_ladder(epsilons)?;
    config.validate()?;
    let avg = averaged_dynamics(model, config.x0, exec)?;
    let base = SimConfig { store: StoreMode::TerminalOnly, ..config.clone() };
    let reference = {
        let c = SimConfig { seed: sub_seed(config.seed, 0), ..base.clone() };
        simulate_averaged_with(avg.as_ref(), &c, false, exec)?.terminal_slow()
    };
    let reference_m = terminal(reference.clone())?;
    let mut w1 = Vec::new();
    let mut steps = Vec::new();
    let mut functionals = Vec::new();
    for (k, &eps) in epsilons.iter().enumerate() {
        let c = SimConfig {
            epsilon: eps,
            dt: step_for(config, eps),
            seed: sub_seed(config.seed, 1 + k as u64),
            ..base.clone()
        };
        let xs = simulate_coupled_with(model, &c, exec)?.terminal_slow();
        functionals.push(functional_gaps(&xs, &reference));
        w1.push(w1_empirical(&terminal(xs)?, &reference_m));
        steps.push(c.dt);
    }
    Ok(ConvergenceReport {
        model: model.name.clone(),
        horizon: config.horizon,
        epsilons: epsilons.to_vec(),
        steps,
        w1_terminal: w1,
        functionals,
        n_paths: config.n_paths,
        seed: config.seed,
        noise_floor: noise_floor(avg.as_ref(), &base, exec)?,
        noise_floor_pairs: NOISE_FLOOR_PAIRS,
        notes: vec!["weak convergence is measured on the terminal marginal only, not on path space".into()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Report {
    pub model: String,
    pub horizon: f64,
    pub epsilons: Vec<f64>,
    pub steps: Vec<f64>,
    pub mean_square_gap: Vec<f64>,
    /// Monte Carlo standard error of each mean-square gap.
    pub mc_standard_error: Vec<f64>,
    pub predicted_limit: f64,
    pub relative_error: Vec<f64>,
    /// W1 between the terminal laws of the coupled and averaged runs.
    pub w1_terminal: Vec<f64>,
    pub noise_floor: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// [`run_l2_failure_with`] on the built-in `pure-fast-l2` model.
pub fn run_l2_failure(config: &SimConfig, epsilons: &[f64], exec: Execution) -> Result<L2Report> {
    run_l2_failure_with(&get_builtin("pure-fast-l2")?, config, epsilons, exec)
}

/// Mean-square gap between the coupled slow path and the averaged path driven by the
/// same Brownian motion, against `T int (sigma(y) - sigma_bar)^2 mu(dy)`.
///
/// The prediction assumes the coefficients do not depend on the slow state; it is
/// evaluated at `x0`.
pub fn run_l2_failure_with(
    model: &ModelSpec,
    config: &SimConfig,
    epsilons: &[f64],
    exec: Execution,
) -> Result<L2Report> {
    check_ladder(epsilons)?;
    config.validate()?;
    let x0 = config.x0;
    let mu = stationary_density_default(model, x0)?;
    let sigma_bar = mu.expect(|y| (model.coefficients.sigma)(x0, y).powi(2)).sqrt();
    let predicted_limit = config.horizon * mu.expect(|y| ((model.coefficients.sigma)(x0, y) - sigma_bar).powi(2));
    let avg = averaged_dynamics(model, x0, exec)?;
    let base = SimConfig { store: StoreMode::TerminalOnly, ..config.clone() };
    let mut report = L2Report {
        model: model.name.clone(),
        horizon: config.horizon,
        epsilons: epsilons.to_vec(),
        steps: Vec::new(),
        mean_square_gap: Vec::new(),
        mc_standard_error: Vec::new(),
        predicted_limit,
        relative_error: Vec::new(),
        w1_terminal: Vec::new(),
        noise_floor: 0.0,
        n_paths: config.n_paths,
        seed: config.seed,
    };
    for (k, &eps) in epsilons.iter().enumerate() {
        let c = SimConfig {
            epsilon: eps,
            dt: step_for(config, eps),
            seed: sub_seed(config.seed, 1 + k as u64),
            ..base.clone()
        };
        let xs = simulate_coupled_with(model, &c, exec)?.terminal_slow();
        let xbar = simulate_averaged_with(avg.as_ref(), &c, true, exec)?.terminal_slow();
        let sq: Vec<f64> = xs.iter().zip(&xbar).map(|(a, b)| (a - b).powi(2)).collect();
        let (m, v) = mean_var(&sq);
        report.steps.push(c.dt);
        report.mean_square_gap.push(m);
        report.mc_standard_error.push((v / sq.len() as f64).sqrt());
        report.relative_error.push(if predicted_limit > 0.0 {
            (m - predicted_limit).abs() / predicted_limit
        } else {
            f64::NAN
        });
        // the weak comparison uses an independent averaged ensemble
        let indep = SimConfig { seed: sub_seed(config.seed, 0), ..base.clone() };
        let reference = simulate_averaged_with(avg.as_ref(), &indep, false, exec)?.terminal_slow();
        report.w1_terminal.push(w1_empirical(&terminal(xs)?, &terminal(reference)?));
    }
    report.noise_floor = noise_floor(avg.as_ref(), &base, exec)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::CoefficientSet;

    #[test]
    fn still_model_has_zero_distances() {
        let m = ModelSpec::new(
            "still",
            CoefficientSet::new(|_, _| 0.0, |_, _| 0.0, |_, y| -y, |_, _| 1.0),
            StateDomain::FullLine,
            StateDomain::FullLine,
        );
        let cfg = SimConfig { n_paths: 50, horizon: 0.2, dt: 0.01, x0: 0.3, ..SimConfig::default() };
        let err = run_averaging_convergence(&m, &[0.1, 0.05], &cfg, Execution::Sequential);
        // degenerate averaged diffusion is refused by the table builder
        assert!(err.is_err());
        let m = m.with_analytic(crate::models::Analytic {
            stationary_density: None,
            averaged_drift: Some(std::sync::Arc::new(|_| 0.0)),
            averaged_diffusion: Some(std::sync::Arc::new(|_| 0.0)),
        });
        let r = run_averaging_convergence(&m, &[0.1, 0.05], &cfg, Execution::Sequential).unwrap();
        assert!(r.w1_terminal.iter().all(|w| *w == 0.0));
        assert_eq!(r.noise_floor, 0.0);
    }

    #[test]
    fn ladder_validation() {
        let m = get_builtin("ou-coupled").unwrap();
        let cfg = SimConfig::default();
        assert!(run_averaging_convergence(&m, &[0.01, 0.1], &cfg, Execution::Sequential).is_err());
        assert!(run_averaging_convergence(&m, &[], &cfg, Execution::Sequential).is_err());
    }

    #[test]
    fn constant_sigma_has_no_l2_gap() {
        let m = ModelSpec::new(
            "flat-sigma",
            CoefficientSet::new(|_, _| 0.0, |_, _| 1.5, |_, y| -y, |_, _| std::f64::consts::SQRT_2),
            StateDomain::FullLine,
            StateDomain::FullLine,
        );
        let cfg = SimConfig { n_paths: 200, horizon: 0.5, seed: 9, ..SimConfig::default() };
        let r = run_l2_failure_with(&m, &cfg, &[0.1], Execution::Sequential).unwrap();
        assert!(r.predicted_limit.abs() < 1e-12);
        assert!(r.mean_square_gap[0] < 1e-20, "{:?}", r.mean_square_gap);
    }

    #[test]
    fn small_l2_run_is_in_range() {
        let cfg = SimConfig { n_paths: 400, horizon: 1.0, seed: 5, ..SimConfig::default() };
        let r = run_l2_failure(&cfg, &[0.05], Execution::Sequential).unwrap();
        assert!((r.predicted_limit - 2.0).abs() < 1e-6);
        let z = (r.mean_square_gap[0] - 2.0) / r.mc_standard_error[0];
        assert!(z.abs() < 4.5, "gap {} se {}", r.mean_square_gap[0], r.mc_standard_error[0]);
    }
}
