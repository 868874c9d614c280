//! Atomized measures and an exact transport solver for truncated line costs.
//!
//! With ground cost `min(|u - v|, c)` the cost is the shortest-path metric of a wheel
//! graph: support points in order joined by edges of length equal to their gap, plus a
//! hub joined to every point by an edge of length `c / 2`. Optimal transport for a
//! graph metric is an uncapacitated min-cost flow of the signed mass difference, solved
//! here by successive shortest paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stationary::{Density1D, EmpiricalMeasure};

/// Largest number of atoms the transport solver accepts per measure.
pub const ATOM_CAP: usize = 512;

/// Finitely supported probability measure with sorted distinct points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atoms {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Atoms {
    /// Merge duplicate points and normalize to unit mass.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::Input("atoms need matching, nonempty points and weights".into()));
        }
        if points.iter().any(|p| !p.is_finite()) || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Input("atoms need finite points and nonnegative weights".into()));
        }
        let mut pairs: Vec<(f64, f64)> = points.into_iter().zip(weights).filter(|p| p.1 > 0.0).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(Error::Input("atoms carry no mass".into()));
        }
        let mut out = Atoms { points: Vec::new(), weights: Vec::new() };
        for (p, w) in pairs {
            if out.points.last() == Some(&p) {
                *out.weights.last_mut().unwrap() += w / total;
            } else {
                out.points.push(p);
                out.weights.push(w / total);
            }
        }
        Ok(out)
    }

    pub fn dirac(y: f64) -> Self {
        Atoms { points: vec![y], weights: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mass of the first `k` atoms.
    pub fn cumulative(&self, k: usize) -> f64 {
        self.weights[..k].iter().sum::<f64>().min(1.0)
    }
}

/// Conversion to at most `cap` atoms.
pub trait Atomize {
    fn atoms(&self, cap: usize) -> Result<Atoms>;
}

impl Atomize for Atoms {
    fn atoms(&self, cap: usize) -> Result<Atoms> {
        if self.len() > cap {
            return Err(Error::Resolution { atoms: self.len(), cap });
        }
        Ok(self.clone())
    }
}

impl Atomize for EmpiricalMeasure {
    /// Exact: one atom per distinct sample value, or a resolution error.
    fn atoms(&self, cap: usize) -> Result<Atoms> {
        let mut distinct = 1;
        for w in self.samples.windows(2) {
            if w[1] != w[0] {
                distinct += 1;
            }
        }
        if distinct > cap {
            return Err(Error::Resolution { atoms: distinct, cap });
        }
        Atoms::new(self.samples.clone(), vec![1.0; self.len()])
    }
}

impl Atomize for Density1D {
    /// Grid segments aggregated into `cap` cells of (nearly) equal mass, each replaced by
    /// an atom at its barycenter.
    fn atoms(&self, cap: usize) -> Result<Atoms> {
        let mut points = vec![0.0; cap];
        let mut weights = vec![0.0; cap];
        let mut acc = 0.0;
        for i in 1..self.grid.len() {
            let (a, b) = (self.grid[i - 1], self.grid[i]);
            let (pa, pb) = (self.values[i - 1], self.values[i]);
            let h = b - a;
            let mass = 0.5 * h * (pa + pb);
            let first = h * (pa * (2.0 * a + b) + pb * (a + 2.0 * b)) / 6.0;
            let cell = (((acc + 0.5 * mass) * cap as f64) as usize).min(cap - 1);
            acc += mass;
            weights[cell] += mass;
            points[cell] += first;
        }
        for (p, w) in points.iter_mut().zip(&weights) {
            if *w > 0.0 {
                *p /= w;
            }
        }
        Atoms::new(points, weights)
    }
}

/// Reduce a sample to at most `cap` equal-count cells at their means.
pub fn coarsen(measure: &EmpiricalMeasure, cap: usize) -> Result<Atoms> {
    if cap == 0 {
        return Err(Error::Input("coarsening cap must be positive".into()));
    }
    let n = measure.len();
    let cells = cap.min(n);
    let mut points = Vec::with_capacity(cells);
    let mut weights = Vec::with_capacity(cells);
    for c in 0..cells {
        let (lo, hi) = (c * n / cells, (c + 1) * n / cells);
        let chunk = &measure.samples[lo..hi];
        points.push(chunk.iter().sum::<f64>() / chunk.len() as f64);
        weights.push(chunk.len() as f64);
    }
    Atoms::new(points, weights)
}

#[derive(Clone, Copy)]
struct Arc {
    to: usize,
    cost: f64,
    /// None for forward arcs (uncapacitated); residual arcs carry the flow they undo.
    reverse_of: Option<usize>,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal).then(other.1.cmp(&self.1))
    }
}

/// Exact transport cost between `a` and `b` for the ground cost `min(|u - v|, cap_cost)`.
pub fn min_cost_transport(a: &Atoms, b: &Atoms, cap_cost: f64) -> f64 {
    // fixed argument order keeps the result exactly symmetric
    let key = |m: &Atoms| (m.points.clone(), m.weights.clone());
    let (a, b) = if key(a).partial_cmp(&key(b)) == Some(Ordering::Greater) { (b, a) } else { (a, b) };
    let mut points: Vec<f64> = a.points.iter().chain(&b.points).copied().collect();
    points.sort_by(|x, y| x.partial_cmp(y).unwrap());
    points.dedup();
    let n = points.len();
    let hub = n;
    let mut supply = vec![0.0; n + 1];
    for (p, w) in a.points.iter().zip(&a.weights) {
        supply[points.partition_point(|z| z < p)] += w;
    }
    for (p, w) in b.points.iter().zip(&b.weights) {
        supply[points.partition_point(|z| z < p)] -= w;
    }

    // forward arcs, each followed by its residual twin
    let mut arcs: Vec<Arc> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    let mut add = |arcs: &mut Vec<Arc>, u: usize, v: usize, cost: f64| {
        let id = arcs.len();
        arcs.push(Arc { to: v, cost, reverse_of: None });
        arcs.push(Arc { to: u, cost: -cost, reverse_of: Some(id) });
        adj[u].push(id);
        adj[v].push(id + 1);
    };
    for i in 0..n.saturating_sub(1) {
        let gap = points[i + 1] - points[i];
        add(&mut arcs, i, i + 1, gap);
        add(&mut arcs, i + 1, i, gap);
    }
    for i in 0..n {
        add(&mut arcs, i, hub, 0.5 * cap_cost);
        add(&mut arcs, hub, i, 0.5 * cap_cost);
    }
    let mut flow = vec![0.0; arcs.len()];

    let eps = 1e-14;
    let mut potential = vec![0.0; n + 1];
    let mut dist = vec![f64::INFINITY; n + 1];
    let mut via: Vec<Option<usize>> = vec![None; n + 1];
    loop {
        if supply.iter().all(|s| *s <= eps) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        via.iter_mut().for_each(|v| *v = None);
        let mut heap = BinaryHeap::new();
        for (v, s) in supply.iter().enumerate() {
            if *s > eps {
                dist[v] = 0.0;
                heap.push(Entry(0.0, v));
            }
        }
        let mut target = None;
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if supply[u] < -eps {
                target = Some(u);
                break;
            }
            for &id in &adj[u] {
                let arc = arcs[id];
                if let Some(fwd) = arc.reverse_of {
                    if flow[fwd] <= eps {
                        continue;
                    }
                }
                let reduced = (arc.cost + potential[u] - potential[arc.to]).max(0.0);
                let nd = d + reduced;
                if nd < dist[arc.to] {
                    dist[arc.to] = nd;
                    via[arc.to] = Some(id);
                    heap.push(Entry(nd, arc.to));
                }
            }
        }
        let Some(t) = target else { break };
        let dt = dist[t];
        for v in 0..=n {
            potential[v] += dist[v].min(dt);
        }
        // walk back to the source and find the bottleneck
        let mut amount = -supply[t];
        let mut v = t;
        while let Some(id) = via[v] {
            if let Some(fwd) = arcs[id].reverse_of {
                amount = amount.min(flow[fwd]);
            }
            v = arcs[id ^ 1].to;
        }
        let s = v;
        amount = amount.min(supply[s]);
        let mut v = t;
        while let Some(id) = via[v] {
            match arcs[id].reverse_of {
                Some(fwd) => flow[fwd] -= amount,
                None => flow[id] += amount,
            }
            v = arcs[id ^ 1].to;
        }
        supply[s] -= amount;
        supply[t] += amount;
    }
    arcs.iter().zip(&flow).filter(|(a, _)| a.reverse_of.is_none()).map(|(a, f)| a.cost * f.max(0.0)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_masses() {
        assert_eq!(min_cost_transport(&Atoms::dirac(0.0), &Atoms::dirac(0.0), 2.0), 0.0);
        assert!((min_cost_transport(&Atoms::dirac(0.0), &Atoms::dirac(1.0), 2.0) - 1.0).abs() < 1e-12);
        for c in [2.0, 3.0, 50.0] {
            assert!((min_cost_transport(&Atoms::dirac(0.0), &Atoms::dirac(c), 2.0) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn split_mass() {
        let a = Atoms::new(vec![0.0, 10.0], vec![1.0, 1.0]).unwrap();
        let b = Atoms::new(vec![0.5, 10.0], vec![1.0, 1.0]).unwrap();
        assert!((min_cost_transport(&a, &b, 2.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn empirical_cap() {
        let e = EmpiricalMeasure::new((0..600).map(|i| i as f64).collect()).unwrap();
        assert!(matches!(e.atoms(ATOM_CAP), Err(Error::Resolution { atoms: 600, cap: 512 })));
        let c = coarsen(&e, ATOM_CAP).unwrap();
        assert!(c.len() <= ATOM_CAP);
        assert!((c.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mean: f64 = c.points.iter().zip(&c.weights).map(|(p, w)| p * w).sum();
        assert!((mean - e.mean()).abs() < 1e-9);
    }

    #[test]
    fn density_atoms_preserve_mean() {
        let grid: Vec<f64> = (0..4096).map(|i| i as f64 * 0.01).collect();
        let d = Density1D::from_fn(grid, |y| (-y).exp()).unwrap();
        let a = d.atoms(ATOM_CAP).unwrap();
        assert!(a.len() <= ATOM_CAP);
        let mean: f64 = a.points.iter().zip(&a.weights).map(|(p, w)| p * w).sum();
        // exact first moment of the piecewise-linear interpolant, by Simpson per segment
        let exact: f64 = d
            .grid
            .windows(2)
            .zip(d.values.windows(2))
            .map(|(g, v)| {
                let m = 0.5 * (g[0] + g[1]);
                (g[1] - g[0]) / 6.0 * (g[0] * v[0] + 4.0 * m * 0.5 * (v[0] + v[1]) + g[1] * v[1])
            })
            .sum();
        assert!((mean - exact / a.weights.iter().sum::<f64>()).abs() < 1e-9, "{mean} vs {exact}");
    }
}
