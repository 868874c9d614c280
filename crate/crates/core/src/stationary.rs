//! Invariant measures of the frozen fast process.
//!
//! For a one-dimensional fast equation `dY = f(x, Y) dt + g(x, Y) dB` the invariant
//! density is proportional to the speed density `exp(Phi_x(y)) / g(x, y)^2` with
//! `Phi_x(y) = int_{y_ref}^y 2 f / g^2`. Densities live on a grid and are normalized by
//! the trapezoidal rule; empirical measures are sorted samples.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, StateDomain};
use crate::par::Execution;
use crate::quad;
use crate::simulate::{simulate_frozen_with, SimConfig};

/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 4096;
/// Tail mass left outside the default grid.
pub const TAIL_MASS: f64 = 1e-14;
const MAX_DOUBLINGS: usize = 64;
const PANELS_PER_SEGMENT: usize = 64;

/// Grid-sampled probability density with its trapezoidal cumulative function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density1D {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl Density1D {
    /// Normalize nonnegative `values` on `grid` and build the cumulative function.
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::Input("density needs at least two grid points and matching values".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input("density grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Input("density values must be finite and nonnegative".into()));
        }
        let mass = quad::trapezoid(&grid, &values);
        if !(mass > 0.0) {
            return Err(Error::Input("density has zero mass on its grid".into()));
        }
        let values: Vec<f64> = values.into_iter().map(|v| v / mass).collect();
        let mut cdf = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..grid.len() {
            acc += 0.5 * (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]);
            cdf.push(acc);
        }
        let last = acc;
        for c in &mut cdf {
            *c = (*c / last).min(1.0);
        }
        Ok(Self { grid, values, cdf })
    }

    /// Tabulate `f` on `grid` and normalize.
    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&y| f(y)).collect();
        Self::new(grid, values)
    }

    pub fn lower(&self) -> f64 {
        self.grid[0]
    }

    pub fn upper(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Piecewise-linear interpolation, zero outside the grid.
    pub fn density_at(&self, y: f64) -> f64 {
        interp(&self.grid, &self.values, y, 0.0, 0.0)
    }

    pub fn cdf_at(&self, y: f64) -> f64 {
        interp(&self.grid, &self.cdf, y, 0.0, 1.0)
    }

    /// Trapezoidal integral of `h` against the density.
    pub fn expect(&self, h: impl Fn(f64) -> f64) -> f64 {
        let v: Vec<f64> = self.grid.iter().zip(&self.values).map(|(&y, &p)| h(y) * p).collect();
        quad::trapezoid(&self.grid, &v)
    }

    pub fn mass(&self) -> f64 {
        quad::trapezoid(&self.grid, &self.values)
    }

    pub fn mean(&self) -> f64 {
        self.expect(|y| y)
    }

    /// Two-column CSV `y,density`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "y,density")?;
        for (y, p) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{y},{p}")?;
        }
        Ok(())
    }
}

pub(crate) fn interp(xs: &[f64], ys: &[f64], x: f64, left: f64, right: f64) -> f64 {
    let n = xs.len();
    if x < xs[0] {
        return left;
    }
    if x > xs[n - 1] {
        return right;
    }
    let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => return ys[i],
        Err(i) => i,
    };
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

/// Sorted sample representation of a probability measure (uniform weights).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub samples: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Input("empirical measure needs at least one sample".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("empirical samples must be finite".into()));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// One-column CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "y")?;
        for y in &self.samples {
            writeln!(w, "{y}")?;
        }
        Ok(())
    }
}

/// k-th raw moment of a measure.
pub trait Moment {
    fn moment(&self, k: u32) -> Result<f64>;
}

impl Moment for Density1D {
    fn moment(&self, k: u32) -> Result<f64> {
        let m = self.expect(|y| y.powi(k as i32));
        // the truncated tail must be negligible: compare the integrand mass near each end
        let n = self.grid.len();
        let end_weight = |i: usize| {
            let y: f64 = self.grid[i];
            y.abs().powi(k as i32 + 1) * self.values[i]
        };
        let tail = end_weight(0).max(end_weight(n - 1));
        if !m.is_finite() || tail > 1e-3 * (m.abs() + 1.0) {
            return Err(Error::InfiniteMoment { order: k });
        }
        Ok(m)
    }
}

impl Moment for EmpiricalMeasure {
    fn moment(&self, k: u32) -> Result<f64> {
        let m = self.samples.iter().map(|y| y.powi(k as i32)).sum::<f64>() / self.len() as f64;
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::InfiniteMoment { order: k })
        }
    }
}

pub fn moment<M: Moment + ?Sized>(measure: &M, k: u32) -> Result<f64> {
    measure.moment(k)
}

// ---------------------------------------------------------------------------
// Scale/speed machinery

fn reference_point(domain: &StateDomain) -> f64 {
    domain.lower().unwrap_or(0.0)
}

/// `2 f / g^2` at `(x, y)`, or a degeneracy error when `g` vanishes.
pub(crate) fn log_speed_slope(model: &ModelSpec, x: f64, y: f64) -> std::result::Result<f64, f64> {
    let g = (model.coefficients.g)(x, y);
    if !(g.abs() > 1e-150) || !g.is_finite() {
        return Err(y);
    }
    Ok(2.0 * (model.coefficients.f)(x, y) / (g * g))
}

fn degenerate(x: f64, y: f64) -> Error {
    Error::Degenerate(format!("fast diffusion g({x}, {y}) vanishes"))
}

/// Integrate `2 f / g^2` over `[a, b]` at absolute tolerance `tol`.
pub(crate) fn potential_increment(model: &ModelSpec, x: f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    for y in [a, b] {
        log_speed_slope(model, x, y).map_err(|y| degenerate(x, y))?;
    }
    let bad = std::cell::Cell::new(None);
    let (v, _) = quad::integrate(
        |y| match log_speed_slope(model, x, y) {
            Ok(s) => s,
            Err(y) => {
                bad.set(Some(y));
                0.0
            }
        },
        a,
        b,
        tol,
    );
    match bad.get() {
        Some(y) => Err(degenerate(x, y)),
        None => Ok(v),
    }
}

/// `Phi_x(y) = int_{y_ref}^y 2 f(x, z) / g(x, z)^2 dz` with `y_ref` the lower domain bound
/// (0 on the full line).
pub fn potential(model: &ModelSpec, x: f64, y: f64) -> Result<f64> {
    if model.dy != 1 {
        return Err(Error::Input("potential needs a one-dimensional fast component".into()));
    }
    model.check_point(x, y)?;
    potential_increment(model, x, reference_point(&model.fast_domain), y, 1e-10)
}

/// Outcome of walking outward from an anchor in doubling segments.
struct TailWalk {
    end: f64,
    /// (position, log speed density) samples used for the scale estimate
    samples: Vec<(f64, f64, f64)>,
}

/// Walk from `anchor` in direction `dir` (+1 or -1), doubling the distance until the
/// next segment carries less than `TAIL_MASS` of the accumulated mass.
fn walk_tail(model: &ModelSpec, x: f64, anchor: f64, phi_anchor: f64, dir: f64) -> Result<TailWalk> {
    let ln_g2 = |y: f64| {
        let g = (model.coefficients.g)(x, y);
        (g * g).ln()
    };
    let mut ln_total = f64::NEG_INFINITY;
    let mut samples = Vec::new();
    let mut pos = anchor;
    let mut phi = phi_anchor;
    let mut width = 1.0;
    let mut prev_end = anchor;
    for k in 0..MAX_DOUBLINGS {
        let seg_end = anchor + dir * width;
        let h = (seg_end - pos) / PANELS_PER_SEGMENT as f64;
        let mut ln_seg = f64::NEG_INFINITY;
        let mut lm_a = phi - ln_g2(pos);
        for _ in 0..PANELS_PER_SEGMENT {
            let next = pos + h;
            let bad = std::cell::Cell::new(None);
            let dphi = quad::gauss_legendre8(
                |y| match log_speed_slope(model, x, y) {
                    Ok(s) => s,
                    Err(y) => {
                        bad.set(Some(y));
                        0.0
                    }
                },
                pos,
                next,
            );
            if let Some(y) = bad.get() {
                return Err(degenerate(x, y));
            }
            phi += dphi;
            let lm_b = phi - ln_g2(next);
            let ln_panel = quad::ln_exp_linear(h.abs(), lm_a, lm_b);
            ln_seg = quad::ln_add_exp(ln_seg, ln_panel);
            samples.push((0.5 * (pos + next), ln_panel, h.abs()));
            pos = next;
            lm_a = lm_b;
        }
        if !ln_seg.is_finite() && ln_seg > 0.0 {
            break;
        }
        let ln_new_total = quad::ln_add_exp(ln_total, ln_seg);
        if k > 0 && ln_seg - ln_new_total < TAIL_MASS.ln() {
            return Ok(TailWalk { end: prev_end, samples });
        }
        ln_total = ln_new_total;
        prev_end = seg_end;
        width *= 2.0;
    }
    Err(Error::NotPositiveRecurrent {
        x,
        detail: format!("speed measure keeps growing after {MAX_DOUBLINGS} domain doublings in direction {dir:+}"),
    })
}

/// Check that the speed measure is finite and return the default density grid:
/// `points` nodes covering all but `TAIL_MASS` of the mass, refined near reflecting
/// boundaries (and around the mode on the full line).
pub fn default_grid(model: &ModelSpec, x: f64, points: usize) -> Result<Vec<f64>> {
    if points < 3 {
        return Err(Error::Input("grid needs at least three points".into()));
    }
    let domain = model.fast_domain;
    if let StateDomain::IntervalReflecting { lower, upper } = domain {
        // Chebyshev-like clustering at both reflecting ends
        return Ok((0..points)
            .map(|i| {
                let u = i as f64 / (points - 1) as f64;
                lower + (upper - lower) * 0.5 * (1.0 - (std::f64::consts::PI * u).cos())
            })
            .collect());
    }
    let anchor = reference_point(&domain);
    let right = walk_tail(model, x, anchor, 0.0, 1.0)?;
    let left = match domain {
        StateDomain::FullLine => Some(walk_tail(model, x, anchor, 0.0, -1.0)?),
        _ => None,
    };
    // moments of the coarse panel masses give a spread estimate and a mode
    let all: Vec<&(f64, f64, f64)> = right.samples.iter().chain(left.iter().flat_map(|l| l.samples.iter())).collect();
    let ln_max = all.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    let mut mode = anchor;
    let mut best = f64::NEG_INFINITY;
    for &&(y, lp, w) in &all {
        let p = (lp - ln_max).exp();
        m0 += p;
        m1 += p * y;
        m2 += p * y * y;
        if lp - w.ln() > best {
            best = lp - w.ln();
            mode = y;
        }
    }
    let mean = m1 / m0;
    let std = (m2 / m0 - mean * mean).max(0.0).sqrt();
    let scale = (0.5 * std).max(1e-6);
    let n1 = (points - 1) as f64;
    match (domain, left) {
        (StateDomain::HalfLineReflecting { lower }, _) => {
            let umax = (1.0 + (right.end - lower) / scale).ln();
            Ok((0..points).map(|i| lower + scale * ((umax * i as f64 / n1).exp() - 1.0)).collect())
        }
        (_, Some(left)) => {
            let c = mode;
            let ua = ((left.end - c) / scale).asinh();
            let ub = ((right.end - c) / scale).asinh();
            Ok((0..points).map(|i| c + scale * (ua + (ub - ua) * i as f64 / n1).sinh()).collect())
        }
        _ => unreachable!("interval handled above"),
    }
}

/// Invariant density of the frozen fast process at `x` on `grid`.
pub fn stationary_density(model: &ModelSpec, x: f64, grid: &[f64]) -> Result<Density1D> {
    if model.dy != 1 {
        return Err(Error::Input("stationary density needs a one-dimensional fast component".into()));
    }
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("grid must be strictly increasing with at least two points".into()));
    }
    for &y in [grid[0], grid[grid.len() - 1]].iter() {
        model.check_point(x, y)?;
    }
    if !model.fast_domain.is_bounded() {
        // establishes positive recurrence (errors otherwise)
        let anchor = reference_point(&model.fast_domain);
        walk_tail(model, x, anchor, 0.0, 1.0)?;
        if matches!(model.fast_domain, StateDomain::FullLine) {
            walk_tail(model, x, anchor, 0.0, -1.0)?;
        }
    }
    let n = grid.len();
    let tol = 1e-10 / n as f64;
    let mut phi = Vec::with_capacity(n);
    phi.push(potential(model, x, grid[0])?);
    for i in 1..n {
        let d = potential_increment(model, x, grid[i - 1], grid[i], tol)?;
        phi.push(phi[i - 1] + d);
    }
    let log_m: Vec<f64> = grid
        .iter()
        .zip(&phi)
        .map(|(&y, &p)| {
            let g = (model.coefficients.g)(x, y);
            p - (g * g).ln()
        })
        .collect();
    let top = log_m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let values = log_m.iter().map(|l| (l - top).exp()).collect();
    Density1D::new(grid.to_vec(), values)
}

/// [`stationary_density`] on the [`default_grid`].
pub fn stationary_density_default(model: &ModelSpec, x: f64) -> Result<Density1D> {
    let grid = default_grid(model, x, DEFAULT_GRID_POINTS)?;
    stationary_density(model, x, &grid)
}

/// Pool post-burn-in stored states of frozen runs into one sorted sample.
pub fn empirical_invariant(model: &ModelSpec, x: f64, config: &SimConfig, burn_in: f64) -> Result<EmpiricalMeasure> {
    empirical_invariant_with(model, x, config, burn_in, Execution::default())
}

pub fn empirical_invariant_with(
    model: &ModelSpec,
    x: f64,
    config: &SimConfig,
    burn_in: f64,
    exec: Execution,
) -> Result<EmpiricalMeasure> {
    if !(burn_in > 0.0 && burn_in < config.horizon) {
        return Err(Error::Config(format!("burn-in {burn_in} must lie in (0, horizon = {})", config.horizon)));
    }
    let ens = simulate_frozen_with(model, x, config, exec)?;
    let cutoff = burn_in - 1e-9 * config.horizon;
    let samples: Vec<f64> = ens
        .paths
        .iter()
        .flat_map(|p| p.times.iter().zip(&p.fast).filter(|(t, _)| **t >= cutoff).map(|(_, y)| *y))
        .collect();
    EmpiricalMeasure::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{get_builtin, CoefficientSet};
    use crate::simulate::StoreMode;

    fn example21_exact(x: f64, y: f64) -> f64 {
        x * x * (-x * y).exp() + (1.0 - x) * (-y).exp()
    }

    #[test]
    fn potential_values() {
        let m = get_builtin("example21").unwrap();
        assert_eq!(potential(&m, 0.4, 0.0).unwrap(), 0.0);
        for y in [0.5, 3.0, 10.0] {
            assert!((potential(&m, 0.0, y).unwrap() + y).abs() < 1e-10);
            let exact = (example21_exact(0.4, y) / example21_exact(0.4, 0.0)).ln();
            assert!((potential(&m, 0.4, y).unwrap() - exact).abs() < 1e-9);
        }
        let ou = get_builtin("ou-coupled").unwrap();
        for y in [-2.0, 0.7, 3.0] {
            assert!((potential(&ou, 0.0, y).unwrap() + y * y / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn potential_rejects_vanishing_g() {
        let m = ModelSpec::new(
            "deg",
            CoefficientSet::new(|_, _| 0.0, |_, _| 1.0, |_, y| -y, |_, y| y),
            StateDomain::FullLine,
            StateDomain::FullLine,
        );
        assert!(matches!(potential(&m, 0.0, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn example21_density_matches_closed_form() {
        let m = get_builtin("example21").unwrap();
        for x in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let d = stationary_density_default(&m, x).unwrap();
            let err =
                d.grid.iter().zip(&d.values).map(|(&y, &p)| (p - example21_exact(x, y)).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "x = {x}: max error {err:e}");
            assert!((d.mass() - 1.0).abs() < 1e-8);
            assert!((d.cdf.last().unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn ou_density_is_gaussian() {
        let m = get_builtin("ou-coupled").unwrap();
        for x in [0.0, 0.25, 0.5, 0.75, 1.0, 4.0] {
            let d = stationary_density_default(&m, x).unwrap();
            let err = d
                .grid
                .iter()
                .zip(&d.values)
                .map(|(&y, &p)| (p - (-(y - x).powi(2) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "x = {x}: {err:e}");
        }
    }

    #[test]
    fn non_normalizable_is_reported() {
        let m = ModelSpec::new(
            "transient",
            CoefficientSet::new(|_, _| 0.0, |_, _| 1.0, |_, _| 0.5, |_, _| 1.0),
            StateDomain::FullLine,
            StateDomain::HalfLineReflecting { lower: 0.0 },
        );
        let grid: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        assert!(matches!(stationary_density(&m, 0.0, &grid), Err(Error::NotPositiveRecurrent { .. })));
    }

    #[test]
    fn moments() {
        let m = get_builtin("example21").unwrap();
        let d = stationary_density_default(&m, 0.5).unwrap();
        assert!((moment(&d, 1).unwrap() - 1.5).abs() < 1e-6);
        let e = EmpiricalMeasure::new(vec![2.5; 10]).unwrap();
        assert_eq!(moment(&e, 3).unwrap(), 2.5f64.powi(3));
        let exp1 = stationary_density_default(&m, 0.0).unwrap();
        // oracle: Gamma(3) = 2, by adaptive quadrature independent of the grid
        let (oracle, _) = quad::integrate(|y| y * y * (-y).exp(), 0.0, 60.0, 1e-13);
        assert!((oracle - 2.0).abs() < 1e-12);
        assert!((moment(&exp1, 2).unwrap() - oracle).abs() < 1e-6);
    }

    #[test]
    fn heavy_tail_moment_is_rejected() {
        let grid: Vec<f64> = (0..=20_000).map(|i| -1e3 + i as f64 * 0.1).collect();
        let cauchy = Density1D::from_fn(grid, |y| 1.0 / (1.0 + y * y)).unwrap();
        assert!(matches!(moment(&cauchy, 2), Err(Error::InfiniteMoment { order: 2 })));
    }

    #[test]
    fn empirical_invariant_frozen_point() {
        let m = ModelSpec::new(
            "still",
            CoefficientSet::new(|_, _| 0.0, |_, _| 0.0, |_, _| 0.0, |_, _| 0.0),
            StateDomain::FullLine,
            StateDomain::FullLine,
        );
        let cfg = SimConfig {
            dt: 0.1,
            horizon: 2.0,
            n_paths: 4,
            y0: 5.0,
            store: StoreMode::Strided(2),
            ..SimConfig::default()
        };
        let e = empirical_invariant(&m, 0.0, &cfg, 1.0).unwrap();
        assert!(e.samples.iter().all(|&y| y == 5.0));
        assert_eq!(e.len(), 4 * 6);
    }

    #[test]
    fn empirical_invariant_ou_mean() {
        let m = get_builtin("ou-coupled").unwrap();
        let cfg = SimConfig {
            dt: 0.01,
            horizon: 30.0,
            n_paths: 400,
            y0: 2.0,
            seed: 17,
            store: StoreMode::Strided(300),
            ..SimConfig::default()
        };
        let e = empirical_invariant(&m, 2.0, &cfg, 9.0).unwrap();
        let n = e.len() as f64;
        let mean = e.mean();
        let sd = (e.samples.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * sd / n.sqrt(), "mean {mean}");
    }
}
