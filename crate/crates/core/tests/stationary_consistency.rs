use slowfast::ergodicity::{forward_pde_solve_many, Initial};
use slowfast::metrics::tv_distance;
use slowfast::models::get_builtin;
use slowfast::quad::integrate;
use slowfast::stationary::stationary_density_default;

#[test]
fn example21_closed_form_is_normalized() {
    let m = get_builtin("example21").unwrap();
    let rho = m.analytic_density().unwrap().clone();
    for k in 0..=10 {
        let x = k as f64 / 10.0;
        // split at 60 so the slow tail at small x is still resolved
        let (head, _) = integrate(|y| rho(x, y), 0.0, 60.0, 1e-13);
        let (tail, _) = integrate(|u| rho(x, 60.0 + u / (1.0 - u)) / (1.0 - u).powi(2), 0.0, 1.0, 1e-13);
        assert!((head + tail - 1.0).abs() < 1e-8, "x = {x}: {}", head + tail);
    }
}

#[test]
fn densities_are_normalized() {
    for name in ["example21", "ou-coupled", "pure-fast-l2"] {
        let m = get_builtin(name).unwrap();
        for x in [0.0, 0.5, 1.0] {
            let d = stationary_density_default(&m, x).unwrap();
            assert!((d.mass() - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn stationary_start_is_preserved_by_the_forward_solver() {
    for (name, x) in [("example21", 0.5), ("ou-coupled", 1.0)] {
        let m = get_builtin(name).unwrap();
        let pi = stationary_density_default(&m, x).unwrap();
        let p = forward_pde_solve_many(&m, x, &Initial::Density(pi.clone()), &[1.0], &pi.grid).unwrap();
        assert!(tv_distance(&p[0], &pi) < 1e-4);
    }
}
