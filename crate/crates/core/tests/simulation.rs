use slowfast::models::{check_assumptions, eval_coefficients, get_builtin, sample_tuples, CheckStatus, StateDomain};
use slowfast::par::Execution;
use slowfast::simulate::{simulate_averaged_with, simulate_coupled_with, AveragedSde, SimConfig, StoreMode};

#[test]
fn weak_order_one() {
    // dX = -X dt + dW from X0 = 100: the Euler mean is 100 (1 - dt)^(T/dt)
    let ou = AveragedSde::new("ou", |x| -x, |_| 1.0, StateDomain::FullLine);
    let x0 = 100.0;
    let steps = [1e-2, 5e-3, 2.5e-3];
    let errors: Vec<f64> = steps
        .iter()
        .map(|&dt| {
            let cfg = SimConfig { dt, horizon: 1.0, n_paths: 40_000, seed: 11, x0, ..SimConfig::default() };
            let ens = simulate_averaged_with(&ou, &cfg, false, Execution::default()).unwrap();
            let xs = ens.terminal_slow();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            (mean - x0 * (-1.0f64).exp()).abs()
        })
        .collect();
    let lx: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / 3.0, ly.iter().sum::<f64>() / 3.0);
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() < 0.3, "slope {slope}, errors {errors:?}");
}

#[test]
fn coupled_paths_stay_in_domain() {
    let m = get_builtin("example21").unwrap();
    let cfg = SimConfig {
        epsilon: 0.05,
        dt: 5e-3,
        horizon: 1.0,
        n_paths: 64,
        seed: 2,
        x0: 0.95,
        y0: 0.01,
        store: StoreMode::FullPaths,
        ..SimConfig::default()
    };
    let ens = simulate_coupled_with(&m, &cfg, Execution::default()).unwrap();
    for p in &ens.paths {
        assert!(p.slow.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(p.fast.iter().all(|y| *y >= 0.0));
    }
}

#[test]
fn ensembles_do_not_depend_on_execution_mode() {
    let m = get_builtin("ou-coupled").unwrap();
    let cfg = SimConfig { epsilon: 0.05, dt: 5e-3, n_paths: 33, seed: 8, ..SimConfig::for_model(&m) };
    let seq = simulate_coupled_with(&m, &cfg, Execution::Sequential).unwrap();
    let par = simulate_coupled_with(&m, &cfg, Execution::Parallel).unwrap();
    assert_eq!(seq.paths, par.paths);
}

#[test]
fn coefficient_evaluation_is_pure() {
    for name in ["example21", "ou-coupled", "pure-fast-l2"] {
        let m = get_builtin(name).unwrap();
        let a = eval_coefficients(&m, 0.4, 1.3).unwrap();
        let b = eval_coefficients(&m, 0.4, 1.3).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}

#[test]
fn ou_slow_sensitivity_constant() {
    let m = get_builtin("ou-coupled").unwrap();
    for seed in [1, 2, 3] {
        let r = check_assumptions(&m, &sample_tuples(&m, 500, 5.0, seed)).unwrap();
        assert_eq!(r.b1.status, CheckStatus::Pass);
        assert!(r.b1.estimated_constant <= 1.0 + 1e-9, "{:?}", r.b1);
    }
}
