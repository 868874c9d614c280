//! Averaged coefficients and their regularity in the slow variable.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{tv_distance, w1_density, wbl_distance, Metric};
use crate::models::{ModelSpec, StateDomain};
use crate::par::{try_map_indexed, Execution};
use crate::quad;
use crate::simulate::AveragedDynamics;
use crate::stationary::{interp, stationary_density_default, Density1D};

/// Mass left outside the truncated comparison grid in the tail-sensitivity check.
const SENSITIVITY_MASS: f64 = 1e-6;

/// `int h(y) pi^x(dy)` on the density grid. Heavy tails are detected by comparing with
/// the same integral cut where the remaining tail mass is [`SENSITIVITY_MASS`]: for an
/// integrable tail the far part barely matters.
fn average(model: &ModelSpec, x: f64, d: &Density1D, h: &dyn Fn(f64) -> f64) -> Result<f64> {
    let vals: Vec<f64> = d.grid.iter().zip(&d.values).map(|(&y, &p)| h(y) * p).collect();
    let v = quad::simpson(&d.grid, &vals) / quad::simpson(&d.grid, &d.values);
    if !v.is_finite() {
        return Err(Error::InfiniteAverage { x, detail: "integral is not finite".into() });
    }
    let n = d.grid.len();
    let lo = if model.fast_domain.lower().is_none() {
        d.cdf.partition_point(|&c| c < SENSITIVITY_MASS).saturating_sub(1)
    } else {
        0
    };
    let hi = if model.fast_domain.upper().is_none() {
        (d.cdf.partition_point(|&c| c <= 1.0 - SENSITIVITY_MASS) + 1).min(n)
    } else {
        n
    };
    if hi - lo >= 2 {
        let cut = quad::simpson(&d.grid[lo..hi], &vals[lo..hi]) / quad::simpson(&d.grid, &d.values);
        let far = (v - cut).abs();
        if far > 1e-3 * (v.abs() + 1.0) {
            return Err(Error::InfiniteAverage {
                x,
                detail: format!("integrand tail carries {far:e} beyond the last {SENSITIVITY_MASS:e} of mass"),
            });
        }
    }
    Ok(v)
}

/// `b_bar(x) = int b(x, y) pi^x(dy)` by quadrature against the stationary density.
pub fn averaged_drift(model: &ModelSpec, x: f64) -> Result<f64> {
    model.check_point(x, model.fast_domain.lower().unwrap_or(0.0))?;
    let d = stationary_density_default(model, x)?;
    average(model, x, &d, &|y| (model.coefficients.b)(x, y))
}

/// `(a_bar(x), sigma_bar(x))` with `a = sigma^2` and `sigma_bar = sqrt(a_bar)`.
pub fn averaged_diffusion(model: &ModelSpec, x: f64) -> Result<(f64, f64)> {
    model.check_point(x, model.fast_domain.lower().unwrap_or(0.0))?;
    let d = stationary_density_default(model, x)?;
    diffusion_from(model, x, &d)
}

fn diffusion_from(model: &ModelSpec, x: f64, d: &Density1D) -> Result<(f64, f64)> {
    let a = average(model, x, d, &|y| {
        let s = (model.coefficients.sigma)(x, y);
        s * s
    })?;
    if !(a > 0.0) {
        return Err(Error::Degenerate(format!("averaged diffusion a_bar({x}) = {a:e} is not positive")));
    }
    Ok((a, a.sqrt()))
}

/// Tabulated averaged coefficients with piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedModel {
    pub source: String,
    pub x_grid: Vec<f64>,
    pub b_bar: Vec<f64>,
    pub a_bar: Vec<f64>,
    pub sigma_bar: Vec<f64>,
    pub interpolation: String,
    /// `true` when closed forms were used instead of quadrature.
    pub analytic: bool,
    #[serde(skip, default = "default_domain")]
    pub domain: StateDomain,
}

fn default_domain() -> StateDomain {
    StateDomain::FullLine
}

impl AveragedModel {
    pub fn b_bar_at(&self, x: f64) -> f64 {
        clamped_interp(&self.x_grid, &self.b_bar, x)
    }

    pub fn a_bar_at(&self, x: f64) -> f64 {
        clamped_interp(&self.x_grid, &self.a_bar, x)
    }

    /// CSV with columns `x,b_bar,a_bar,sigma_bar`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,b_bar,a_bar,sigma_bar")?;
        for i in 0..self.x_grid.len() {
            writeln!(w, "{},{},{},{}", self.x_grid[i], self.b_bar[i], self.a_bar[i], self.sigma_bar[i])?;
        }
        Ok(())
    }
}

fn clamped_interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.len() == 1 {
        return ys[0];
    }
    interp(xs, ys, x, ys[0], ys[ys.len() - 1])
}

impl AveragedDynamics for AveragedModel {
    fn drift(&self, x: f64) -> f64 {
        self.b_bar_at(x)
    }

    /// Square root of the interpolated `a_bar`, so it matches `sigma_bar` at the nodes.
    fn diffusion(&self, x: f64) -> f64 {
        self.a_bar_at(x).sqrt()
    }

    fn domain(&self) -> StateDomain {
        self.domain
    }

    fn label(&self) -> String {
        format!("averaged({})", self.source)
    }
}

/// Tabulate the averaged coefficients on `x_grid`.
pub fn build_averaged_model(model: &ModelSpec, x_grid: &[f64], exec: Execution) -> Result<AveragedModel> {
    if x_grid.is_empty() || x_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("x grid must be nonempty and strictly increasing".into()));
    }
    let analytic =
        model.analytic.as_ref().and_then(|a| Some((a.averaged_drift.clone()?, a.averaged_diffusion.clone()?)));
    let nodes = try_map_indexed(x_grid.len(), exec, |i| {
        let x = x_grid[i];
        let node = || -> Result<(f64, f64)> {
            if !model.slow_domain.contains(x) {
                return Err(Error::Domain { coordinate: "x", value: x });
            }
            if let Some((b, a)) = &analytic {
                return Ok((b(x), a(x)));
            }
            let d = stationary_density_default(model, x)?;
            let b = average(model, x, &d, &|y| (model.coefficients.b)(x, y))?;
            Ok((b, diffusion_from(model, x, &d)?.0))
        };
        node().map_err(|e| Error::Node { index: i, x, source: Box::new(e) })
    })?;
    for (i, (_, a)) in nodes.iter().enumerate() {
        if !(*a > 0.0) {
            return Err(Error::Node {
                index: i,
                x: x_grid[i],
                source: Box::new(Error::Degenerate(format!("a_bar = {a:e} is not positive"))),
            });
        }
    }
    Ok(AveragedModel {
        source: model.name.clone(),
        x_grid: x_grid.to_vec(),
        b_bar: nodes.iter().map(|n| n.0).collect(),
        a_bar: nodes.iter().map(|n| n.1).collect(),
        sigma_bar: nodes.iter().map(|n| n.1.sqrt()).collect(),
        interpolation: "piecewise-linear".into(),
        analytic: analytic.is_some(),
        domain: model.slow_domain,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscontinuityProbe {
    pub x0: f64,
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub value_at_x0: f64,
    pub right_limit_estimate: f64,
    pub gap: f64,
}

/// Compare `b_bar(x0)` with the extrapolated limit of `b_bar(x0 + delta)` as `delta -> 0`.
pub fn discontinuity_probe(model: &ModelSpec, x0: f64, deltas: &[f64]) -> Result<DiscontinuityProbe> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) || deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Input("deltas must be positive and strictly decreasing".into()));
    }
    let value_at_x0 = averaged_drift(model, x0)?;
    let values = deltas.iter().map(|d| averaged_drift(model, x0 + d)).collect::<Result<Vec<_>>>()?;
    let k = deltas.len();
    // Lagrange polynomial through the last (up to) three points, evaluated at delta = 0
    let start = k.saturating_sub(3);
    let (ds, vs) = (&deltas[start..], &values[start..]);
    let mut limit = 0.0;
    for i in 0..ds.len() {
        let mut w = 1.0;
        for j in 0..ds.len() {
            if i != j {
                w *= ds[j] / (ds[j] - ds[i]);
            }
        }
        limit += w * vs[i];
    }
    Ok(DiscontinuityProbe {
        x0,
        deltas: deltas.to_vec(),
        values,
        value_at_x0,
        right_limit_estimate: limit,
        gap: (limit - value_at_x0).abs(),
    })
}

/// Reference two-regime bound: `|d|` when `|d| >= 2 kappa`, `|d|^exponent` below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderReference {
    pub exponent: f64,
    pub kappa: f64,
}

impl HolderReference {
    /// Exponent `lambda / (lambda + k3)` from a contraction rate and a sensitivity constant.
    pub fn from_rates(lambda: f64, k3: f64, kappa: f64) -> Self {
        Self { exponent: lambda / (lambda + k3), kappa }
    }

    pub fn bound(&self, delta: f64) -> f64 {
        let d = delta.abs();
        if d >= 2.0 * self.kappa {
            d
        } else {
            d.powf(self.exponent)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderPair {
    pub x1: f64,
    pub x2: f64,
    pub distance: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFitReport {
    pub metric: Metric,
    pub pairs: Vec<HolderPair>,
    pub fitted_exponent: f64,
    pub fitted_constant: f64,
    pub r2: f64,
    pub reference_exponent: f64,
    pub kappa: f64,
    /// Absolute slack allowed in the bound check for quadrature error.
    pub tolerance: f64,
    pub bound_satisfied: bool,
}

/// Slack in the bound check, at the accuracy of the density quadrature.
pub const BOUND_TOLERANCE: f64 = 1e-6;

/// Distances between invariant measures over `pairs`, a log-log power fit, and a check
/// against the two-regime reference bound.
pub fn holder_fit(
    metric: Metric,
    model: &ModelSpec,
    pairs: &[(f64, f64)],
    reference: HolderReference,
    exec: Execution,
) -> Result<HolderFitReport> {
    let distances = try_map_indexed(pairs.len(), exec, |i| {
        let (x1, x2) = pairs[i];
        if x1 == x2 {
            return Ok(0.0);
        }
        let p = stationary_density_default(model, x1)?;
        let q = stationary_density_default(model, x2)?;
        match metric {
            Metric::Tv => Ok(tv_distance(&p, &q)),
            Metric::W1 => w1_density(&p, &q),
            Metric::Wbl => wbl_distance(&p, &q),
        }
    })?;
    let pairs: Vec<HolderPair> = pairs
        .iter()
        .zip(&distances)
        .map(|(&(x1, x2), &distance)| HolderPair { x1, x2, distance, bound: reference.bound(x1 - x2) })
        .collect();
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|p| p.distance > 0.0 && p.x1 != p.x2)
        .map(|p| ((p.x1 - p.x2).abs().ln(), p.distance.ln()))
        .collect();
    let (slope, intercept, r2) = linear_fit(&pts);
    let bound_satisfied = pairs.iter().all(|p| p.distance <= p.bound + BOUND_TOLERANCE);
    Ok(HolderFitReport {
        metric,
        pairs,
        fitted_exponent: slope,
        fitted_constant: intercept.exp(),
        r2,
        reference_exponent: reference.exponent,
        kappa: reference.kappa,
        tolerance: BOUND_TOLERANCE,
        bound_satisfied,
    })
}

/// Least-squares line `v = slope u + intercept` with r².
fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN, 0.0);
    }
    let n = pts.len() as f64;
    let mu = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let suu: f64 = pts.iter().map(|p| (p.0 - mu).powi(2)).sum();
    let suv: f64 = pts.iter().map(|p| (p.0 - mu) * (p.1 - mv)).sum();
    let svv: f64 = pts.iter().map(|p| (p.1 - mv).powi(2)).sum();
    if suu == 0.0 {
        return (f64::NAN, f64::NAN, 0.0);
    }
    let slope = suv / suu;
    let r2 = if svv > 0.0 { (suv * suv / (suu * svv)).clamp(0.0, 1.0) } else { 1.0 };
    (slope, mv - slope * mu, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{get_builtin, CoefficientSet};
    use crate::quad::integrate;

    #[test]
    fn example21_drift_closed_form() {
        let m = get_builtin("example21").unwrap();
        assert!((averaged_drift(&m, 0.0).unwrap() - 1.0).abs() < 1e-6);
        for k in 1..=10 {
            let x = k as f64 / 10.0;
            let b = averaged_drift(&m, x).unwrap();
            assert!((b - (2.0 - x)).abs() < 1e-6, "x = {x}: {b}");
        }
    }

    #[test]
    fn example21_diffusion_against_exponential_moments() {
        // int y^2 (0.25 e^{-y/2} + 0.5 e^{-y}) dy = 0.25 * 2 / 0.125 + 0.5 * 2
        let oracle = 0.25 * 2.0 / 0.125 + 0.5 * 2.0;
        let m = get_builtin("example21").unwrap();
        let (a, s) = averaged_diffusion(&m, 0.5).unwrap();
        assert!((a - oracle).abs() < 1e-6, "{a} vs {oracle}");
        assert!((s * s - a).abs() < 1e-12);
    }

    #[test]
    fn ou_against_quadrature_oracle() {
        let m = get_builtin("ou-coupled").unwrap();
        let gauss = |mu: f64, h: &dyn Fn(f64) -> f64| {
            integrate(
                |y| h(y) * (-(y - mu).powi(2) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
                mu - 40.0,
                mu + 40.0,
                1e-14,
            )
            .0
        };
        let b_oracle = -1.0 + gauss(1.0, &|y| y.sin());
        assert!((b_oracle - (-1.0 + 1f64.sin() * (-0.5f64).exp())).abs() < 1e-12);
        assert!((averaged_drift(&m, 1.0).unwrap() - b_oracle).abs() < 1e-6);
        let a_oracle = gauss(0.0, &|y| 1.0 + 0.5 * y.cos());
        assert!((averaged_diffusion(&m, 0.0).unwrap().0 - a_oracle).abs() < 1e-6);
    }

    #[test]
    fn heavy_tail_average_errors() {
        // speed density ~ y^-4, so b = y^4 has no mean under it
        let m = ModelSpec::new(
            "heavy",
            CoefficientSet::new(
                |_, y| y.powi(4),
                |_, _| 1.0,
                |_, y| -4.0 * y / (1.0 + y * y),
                |_, _| std::f64::consts::SQRT_2,
            ),
            StateDomain::FullLine,
            StateDomain::FullLine,
        );
        assert!(matches!(averaged_drift(&m, 0.0), Err(Error::InfiniteAverage { .. })));
    }

    #[test]
    fn tables() {
        let m = get_builtin("example21").unwrap();
        let grid: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let quad_model = ModelSpec { analytic: None, ..m.clone() };
        let t = build_averaged_model(&quad_model, &grid, Execution::Sequential).unwrap();
        assert!(!t.analytic);
        for (x, b) in t.x_grid.iter().zip(&t.b_bar) {
            assert!((b - (2.0 - x)).abs() < 1e-6);
        }
        for (a, s) in t.a_bar.iter().zip(&t.sigma_bar) {
            assert!((s * s - a).abs() <= 1e-12 * a);
        }
        assert!(build_averaged_model(&m, &grid, Execution::Sequential).unwrap().analytic);

        let l2 = ModelSpec { analytic: None, ..get_builtin("pure-fast-l2").unwrap() };
        let t = build_averaged_model(&l2, &[-1.0, 0.0, 2.0], Execution::Sequential).unwrap();
        assert!(t.b_bar.iter().all(|b| b.abs() < 1e-12));
        assert!(t.sigma_bar.iter().all(|s| (s - 1.0).abs() < 1e-6));

        let flat = ModelSpec::new(
            "flat",
            CoefficientSet::new(|_, _| 0.3, |_, _| 2.0, |_, y| -y, |_, _| 1.0),
            StateDomain::FullLine,
            StateDomain::FullLine,
        );
        let t = build_averaged_model(&flat, &[0.0, 1.0], Execution::Sequential).unwrap();
        assert!(t.b_bar.iter().all(|b| (b - 0.3).abs() < 1e-12));
        assert!(t.sigma_bar.iter().all(|s| (s - 2.0).abs() < 1e-12));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,b_bar,a_bar,sigma_bar\n"));
    }

    #[test]
    fn node_failure_is_located() {
        let m = get_builtin("example21").unwrap();
        let err = build_averaged_model(&m, &[0.5, 1.5], Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::Node { index: 1, .. }));
    }

    #[test]
    fn probes() {
        let m = get_builtin("example21").unwrap();
        let p = discontinuity_probe(&m, 0.0, &[0.1, 0.03, 0.01, 0.003]).unwrap();
        assert!((p.gap - 1.0).abs() < 0.02, "{p:?}");
        let ou = get_builtin("ou-coupled").unwrap();
        assert!(discontinuity_probe(&ou, 0.0, &[0.1, 0.03, 0.01, 0.003]).unwrap().gap < 0.01);
        let flat = ModelSpec::new(
            "flat",
            CoefficientSet::new(|_, _| 0.3, |_, _| 1.0, |_, y| -y, |_, _| 1.0),
            StateDomain::FullLine,
            StateDomain::FullLine,
        );
        assert!(discontinuity_probe(&flat, 0.0, &[0.1, 0.01, 0.001]).unwrap().gap < 1e-12);
    }

    #[test]
    fn holder_ou_and_example21() {
        let ou = get_builtin("ou-coupled").unwrap();
        let pairs: Vec<(f64, f64)> =
            [1e-3, 1e-2, 0.1, 0.5, 1.0].iter().map(|d| (0.2, 0.2 + d)).chain([(0.4, 0.4)]).collect();
        let r = holder_fit(Metric::W1, &ou, &pairs, HolderReference::from_rates(1.0, 1.0, 1.0), Execution::Sequential)
            .unwrap();
        assert!((r.fitted_exponent - 1.0).abs() < 0.05);
        assert!(r.bound_satisfied);
        assert_eq!(r.pairs.last().unwrap().distance, 0.0);

        let m = get_builtin("example21").unwrap();
        let pairs = [(0.3, 0.0), (0.1, 0.0), (0.03, 0.0)];
        let r =
            holder_fit(Metric::W1, &m, &pairs, HolderReference { exponent: 0.5, kappa: 1.0 }, Execution::Sequential)
                .unwrap();
        for p in &r.pairs {
            assert!((p.distance - (1.0 - p.x1)).abs() < 1e-4);
        }
        assert!(!r.bound_satisfied);
    }
}
