//! Distances between probability measures on the line.
//!
//! Total variation uses the `int |p - q|` convention (range `[0, 2]`). The Wasserstein
//! distance is the integral of the absolute CDF difference. The bounded-Lipschitz
//! distance is an exact transport cost with ground cost `min(|u - v|, 2)` between
//! atomized measures.

mod transport;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::abs_linear;
use crate::stationary::{moment, Density1D, EmpiricalMeasure};

pub use transport::{coarsen, min_cost_transport, Atomize, Atoms, ATOM_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Tv,
    W1,
    Wbl,
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tv" => Ok(Metric::Tv),
            "w1" => Ok(Metric::W1),
            "wbl" => Ok(Metric::Wbl),
            other => Err(Error::Input(format!("unknown metric `{other}` (tv, w1, wbl)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    CdfIntegral,
    SortedSamples,
    DiscreteTransport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub metric: Metric,
    pub value: f64,
    pub method: Method,
    /// Grid points, samples or atoms the computation ran on.
    pub resolution: usize,
}

/// A measure in either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Density(Density1D),
    Empirical(EmpiricalMeasure),
}

impl Measure {
    fn size(&self) -> usize {
        match self {
            Measure::Density(d) => d.grid.len(),
            Measure::Empirical(e) => e.len(),
        }
    }

    fn cdf(&self) -> Cdf<'_> {
        match self {
            Measure::Density(d) => Cdf::Linear { x: &d.grid, f: &d.cdf },
            Measure::Empirical(e) => Cdf::Samples(&e.samples),
        }
    }
}

impl Atomize for Measure {
    fn atoms(&self, cap: usize) -> Result<Atoms> {
        match self {
            Measure::Density(d) => d.atoms(cap),
            Measure::Empirical(e) => e.atoms(cap),
        }
    }
}

/// Compute `metric` between two measures and describe how.
pub fn distance(metric: Metric, p: &Measure, q: &Measure) -> Result<DistanceReport> {
    let resolution = p.size() + q.size();
    let (value, method) = match (metric, p, q) {
        (Metric::Tv, Measure::Density(a), Measure::Density(b)) => (tv_distance(a, b), Method::Quadrature),
        (Metric::Tv, _, _) => {
            return Err(Error::Input("total variation needs two densities".into()));
        }
        (Metric::W1, Measure::Density(a), Measure::Density(b)) => (w1_density(a, b)?, Method::CdfIntegral),
        (Metric::W1, Measure::Empirical(a), Measure::Empirical(b)) => {
            let m = if a.len() == b.len() { Method::SortedSamples } else { Method::CdfIntegral };
            (w1_empirical(a, b), m)
        }
        (Metric::W1, _, _) => (w1_cdf(&p.cdf(), &q.cdf()), Method::CdfIntegral),
        (Metric::Wbl, _, _) => {
            let (a, b) = (p.atoms(ATOM_CAP)?, q.atoms(ATOM_CAP)?);
            return Ok(DistanceReport {
                metric,
                value: wbl_atoms(&a, &b),
                method: Method::DiscreteTransport,
                resolution: a.len() + b.len(),
            });
        }
    };
    Ok(DistanceReport { metric, value, method, resolution })
}

/// Sorted union of two grids without duplicates.
fn union_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = a.iter().chain(b).copied().collect();
    u.sort_by(|x, y| x.partial_cmp(y).unwrap());
    u.dedup();
    u
}

/// Value of a piecewise-linear density on `[u, v]` at both ends, zero off its support.
fn segment_ends(d: &Density1D, u: f64, v: f64) -> (f64, f64) {
    if u < d.lower() || v > d.upper() {
        (0.0, 0.0)
    } else {
        (d.density_at(u), d.density_at(v))
    }
}

/// `int |p - q|` over the union grid; densities are linear between their nodes and zero
/// outside their grids.
pub fn tv_distance(p: &Density1D, q: &Density1D) -> f64 {
    let grid = union_grid(&p.grid, &q.grid);
    let mut total = 0.0;
    for w in grid.windows(2) {
        let (pa, pb) = segment_ends(p, w[0], w[1]);
        let (qa, qb) = segment_ends(q, w[0], w[1]);
        total += abs_linear(w[1] - w[0], pa - qa, pb - qb);
    }
    total.min(2.0)
}

/// Cumulative distribution function: piecewise linear (density) or a step function
/// (sorted samples with equal weights, or weighted atoms).
pub enum Cdf<'a> {
    Linear { x: &'a [f64], f: &'a [f64] },
    Samples(&'a [f64]),
    Atoms(&'a Atoms),
}

impl Cdf<'_> {
    fn breakpoints(&self) -> &[f64] {
        match self {
            Cdf::Linear { x, .. } => x,
            Cdf::Samples(s) => s,
            Cdf::Atoms(a) => &a.points,
        }
    }

    /// Values at the two ends of a segment `[u, v]` containing no interior breakpoint.
    fn segment(&self, u: f64, v: f64) -> (f64, f64) {
        match self {
            Cdf::Linear { x, f } => {
                let at = |y: f64| crate::stationary::interp(x, f, y, 0.0, 1.0);
                (at(u), at(v))
            }
            Cdf::Samples(s) => {
                let k = s.partition_point(|&z| z <= u);
                let c = k as f64 / s.len() as f64;
                (c, c)
            }
            Cdf::Atoms(a) => {
                let k = a.points.partition_point(|&z| z <= u);
                let c = a.cumulative(k);
                (c, c)
            }
        }
    }
}

/// `int |F_p - F_q|`, exact for piecewise-linear and step CDFs.
pub fn w1_cdf(p: &Cdf<'_>, q: &Cdf<'_>) -> f64 {
    let grid = union_grid(p.breakpoints(), q.breakpoints());
    let mut total = 0.0;
    for w in grid.windows(2) {
        let (pa, pb) = p.segment(w[0], w[1]);
        let (qa, qb) = q.segment(w[0], w[1]);
        total += abs_linear(w[1] - w[0], pa - qa, pb - qb);
    }
    total
}

/// Wasserstein-1 distance between densities; errors when either tail is too heavy for a
/// finite first moment.
pub fn w1_density(p: &Density1D, q: &Density1D) -> Result<f64> {
    moment(p, 1)?;
    moment(q, 1)?;
    Ok(w1_cdf(&Cdf::Linear { x: &p.grid, f: &p.cdf }, &Cdf::Linear { x: &q.grid, f: &q.cdf }))
}

/// Optimal transport cost between two empirical measures.
pub fn w1_empirical(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
    if a.len() == b.len() {
        a.samples.iter().zip(&b.samples).map(|(u, v)| (u - v).abs()).sum::<f64>() / a.len() as f64
    } else {
        w1_cdf(&Cdf::Samples(&a.samples), &Cdf::Samples(&b.samples))
    }
}

/// Total variation `sum |a_i - b_i|` between finitely supported measures.
pub fn tv_atoms(a: &Atoms, b: &Atoms) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    while i < a.len() || j < b.len() {
        let pa = a.points.get(i).copied().unwrap_or(f64::INFINITY);
        let pb = b.points.get(j).copied().unwrap_or(f64::INFINITY);
        if pa == pb {
            total += (a.weights[i] - b.weights[j]).abs();
            i += 1;
            j += 1;
        } else if pa < pb {
            total += a.weights[i];
            i += 1;
        } else {
            total += b.weights[j];
            j += 1;
        }
    }
    total.min(2.0)
}

/// Wasserstein-1 distance between finitely supported measures.
pub fn w1_atoms(a: &Atoms, b: &Atoms) -> f64 {
    w1_cdf(&Cdf::Atoms(a), &Cdf::Atoms(b))
}

/// Bounded-Lipschitz distance; both inputs are atomized to at most [`ATOM_CAP`] atoms.
pub fn wbl_distance<P: Atomize + ?Sized, Q: Atomize + ?Sized>(p: &P, q: &Q) -> Result<f64> {
    Ok(wbl_atoms(&p.atoms(ATOM_CAP)?, &q.atoms(ATOM_CAP)?))
}

fn wbl_atoms(a: &Atoms, b: &Atoms) -> f64 {
    min_cost_transport(a, b, 2.0)
}
