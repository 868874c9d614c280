//! Ergodicity of one-dimensional frozen fast processes.
//!
//! Classification uses the scale density `s = exp(-Phi)` and speed density
//! `m = exp(Phi) / g^2` on each unbounded end of the domain. All integrals are
//! accumulated in log space through recurrences that only ever see local increments of
//! `Phi`, so steep potentials neither overflow nor cancel.
//!
//! The forward equation is solved by a finite-volume scheme with Scharfetter-Gummel
//! fluxes, whose discrete equilibrium is the sampled speed density exactly.

use std::io::{self, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::metrics::tv_distance;
use crate::models::{ModelSpec, StateDomain};
use crate::par::Execution;
use crate::quad::{self, gauss_legendre8, ln_add_exp, ln_exp_linear};
use crate::simulate::{simulate_frozen_with, SimConfig, StoreMode};
use crate::stationary::{default_grid, log_speed_slope, stationary_density, Density1D, DEFAULT_GRID_POINTS};

/// Partial integrals are read at `a + 2^k` for `k` up to this value.
pub const MAX_DOUBLINGS: usize = 20;
/// A partial integral above this size with non-decaying increments diverges.
pub const GROWTH_CAP: f64 = 1e6;
/// Relative increment below which a partial integral has converged.
pub const INCREMENT_FLOOR: f64 = 1e-10;
/// Increment ratio that, sustained over the last four doublings, signals divergence.
pub const SUSTAINED_RATIO: f64 = 0.9;

/// Three-valued verdict; serializes as `true`, `false` or `"inconclusive"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    True,
    False,
    Inconclusive,
}

impl Verdict {
    fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::False, _) | (_, Verdict::False) => Verdict::False,
            (Verdict::True, Verdict::True) => Verdict::True,
            _ => Verdict::Inconclusive,
        }
    }

    fn from_bool(b: bool) -> Verdict {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Verdict::True => s.serialize_bool(true),
            Verdict::False => s.serialize_bool(false),
            Verdict::Inconclusive => s.serialize_str("inconclusive"),
        }
    }
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Bool(bool),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Bool(b) => Ok(Verdict::from_bool(b)),
            Raw::Str(s) if s == "inconclusive" => Ok(Verdict::Inconclusive),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unknown verdict `{s}`"))),
        }
    }
}

/// Behaviour of one partial-integral sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behaviour {
    Converges,
    Diverges,
    Undecided,
}

/// One criterion quantity on one end of the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionIntegral {
    /// `speed-mass`, `recurrence`, `exponential` or `strong`.
    pub name: String,
    /// `upper` or `lower` end.
    pub side: String,
    pub behaviour: Behaviour,
    /// Natural log of the last partial value (integral or running supremum).
    pub ln_value: f64,
    /// The value itself when representable.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRates {
    pub kappa1: f64,
    pub lambda1: f64,
    pub kappa2: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub x: f64,
    pub ergodic: Verdict,
    pub exp_ergodic: Verdict,
    pub strongly_ergodic: Verdict,
    pub integrals: Vec<CriterionIntegral>,
    pub fitted_rates: Option<FittedRates>,
    pub notes: Vec<String>,
}

impl ErgodicityReport {
    /// Attach decay-rate fits; these are per-start evidence, not a uniform bound.
    pub fn with_rates(mut self, tv: &DecayCurve, w1: &DecayCurve) -> Self {
        self.fitted_rates = Some(FittedRates {
            kappa1: tv.fit.amplitude,
            lambda1: tv.fit.rate,
            kappa2: w1.fit.amplitude,
            lambda2: w1.fit.rate,
        });
        self.notes
            .push("fitted rates come from single starting points; the supremum over starts is not certified".into());
        self
    }
}

/// Decide a sequence of log partial values read after successive doublings.
fn behaviour(ln_partial: &[f64]) -> Behaviour {
    let k = ln_partial.len();
    if k < 3 {
        return Behaviour::Undecided;
    }
    // log increments: ln(I_k - I_{k-1})
    let ln_inc: Vec<f64> = ln_partial
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            if d <= 0.0 {
                f64::NEG_INFINITY
            } else {
                w[1] + (-(-d).exp_m1()).ln()
            }
        })
        .collect();
    let last = ln_partial[k - 1];
    let li = ln_inc[ln_inc.len() - 1];
    let prev = ln_inc[ln_inc.len() - 2];
    // relative increment taken from the log difference, exact even for huge logs
    let d = last - ln_partial[k - 2];
    let small = if last <= 0.0 { li <= INCREMENT_FLOOR.ln() } else { d <= 0.0 || -(-d).exp_m1() <= INCREMENT_FLOOR };
    if small {
        return Behaviour::Converges;
    }
    if last > GROWTH_CAP.ln() && li >= prev {
        return Behaviour::Diverges;
    }
    if ln_inc.len() >= 5 {
        let tail = &ln_inc[ln_inc.len() - 5..];
        if tail.windows(2).all(|w| w[1] - w[0] >= SUSTAINED_RATIO.ln()) {
            return Behaviour::Diverges;
        }
    }
    Behaviour::Undecided
}

/// Criterion integrals on a reflected half-line `[0, inf)` with log-speed slope `psi`
/// and log squared diffusion `ln_g2`.
struct HalfLine<'a> {
    psi: &'a dyn Fn(f64) -> std::result::Result<f64, f64>,
    ln_g2: &'a dyn Fn(f64) -> f64,
}

struct SideResult {
    speed_mass: (Behaviour, f64),
    recurrence: (Behaviour, f64),
    exponential: (Behaviour, f64),
    strong: (Behaviour, f64),
}

impl HalfLine<'_> {
    fn nodes() -> (Vec<f64>, Vec<usize>) {
        let top = (1u64 << (MAX_DOUBLINGS + 1)) as f64;
        let mut nodes = vec![0.0];
        let mut marks = Vec::new();
        let mut next_mark = 1.0;
        let mut y: f64 = 0.0;
        while y < top {
            let mut step = (0.01 * y).max(0.005);
            if y + step > next_mark {
                step = next_mark - y;
            }
            y += step;
            nodes.push(y);
            if y >= next_mark {
                marks.push(nodes.len() - 1);
                next_mark *= 2.0;
            }
        }
        (nodes, marks)
    }

    fn evaluate(&self) -> std::result::Result<SideResult, f64> {
        let (nodes, marks) = Self::nodes();
        let n = nodes.len();
        let mut d = Vec::with_capacity(n - 1);
        for w in nodes.windows(2) {
            let bad = std::cell::Cell::new(None);
            let v = gauss_legendre8(
                |y| match (self.psi)(y) {
                    Ok(s) => s,
                    Err(y) => {
                        bad.set(Some(y));
                        0.0
                    }
                },
                w[0],
                w[1],
            );
            if let Some(y) = bad.get() {
                return Err(y);
            }
            d.push(v);
        }
        let lg: Vec<f64> = nodes.iter().map(|&y| (self.ln_g2)(y)).collect();
        let h: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();

        // Phi(y_i) with Phi(0) = 0, only used for the speed mass
        let mut phi = vec![0.0; n];
        for i in 0..n - 1 {
            phi[i + 1] = phi[i] + d[i];
        }
        // speed mass partials
        let mut ln_m = f64::NEG_INFINITY;
        let mut ln_m_nodes = vec![f64::NEG_INFINITY; n];
        for i in 0..n - 1 {
            ln_m = ln_add_exp(ln_m, ln_exp_linear(h[i], phi[i] - lg[i], phi[i + 1] - lg[i + 1]));
            ln_m_nodes[i + 1] = ln_m;
        }
        // R(y) = M([y, inf)) s(y), backward: R_i = local_i + e^{d_i} R_{i+1}
        let mut ln_r = vec![f64::NEG_INFINITY; n];
        for i in (0..n - 1).rev() {
            let local = ln_exp_linear(h[i], -lg[i], d[i] - lg[i + 1]);
            ln_r[i] = ln_add_exp(local, d[i] + ln_r[i + 1]);
        }
        // P(y) = s(y) M([0, y]), forward: P_{i+1} = e^{-d_i} P_i + local_i
        let mut ln_p = vec![f64::NEG_INFINITY; n];
        // Q(y) = e^{Phi(y)} S([0, y]), forward: Q_{i+1} = e^{d_i} Q_i + local_i
        let mut ln_q = vec![f64::NEG_INFINITY; n];
        for i in 0..n - 1 {
            let lp = ln_exp_linear(h[i], -d[i] - lg[i], -lg[i + 1]);
            ln_p[i + 1] = ln_add_exp(-d[i] + ln_p[i], lp);
            let lq = ln_exp_linear(h[i], d[i], 0.0);
            ln_q[i + 1] = ln_add_exp(d[i] + ln_q[i], lq);
        }

        let mut int_p = f64::NEG_INFINITY;
        let mut int_r = f64::NEG_INFINITY;
        let mut sup_rq = f64::NEG_INFINITY;
        let (mut seq_m, mut seq_p, mut seq_r, mut seq_rq) = (vec![], vec![], vec![], vec![]);
        let mut mark = marks.iter().peekable();
        for i in 0..n - 1 {
            int_p = ln_add_exp(int_p, ln_exp_linear(h[i], ln_p[i], ln_p[i + 1]));
            int_r = ln_add_exp(int_r, ln_exp_linear(h[i], ln_r[i], ln_r[i + 1]));
            sup_rq = sup_rq.max(ln_r[i + 1] + ln_q[i + 1]);
            if mark.peek() == Some(&&(i + 1)) {
                mark.next();
                seq_m.push(ln_m_nodes[i + 1]);
                seq_p.push(int_p);
                seq_r.push(int_r);
                seq_rq.push(sup_rq);
            }
        }
        // the last mark is the truncation end; drop it so tail masses are not cut short
        for s in [&mut seq_m, &mut seq_p, &mut seq_r, &mut seq_rq] {
            s.truncate(MAX_DOUBLINGS + 1);
        }
        let pick = |s: &Vec<f64>| (behaviour(s), *s.last().unwrap());
        Ok(SideResult {
            speed_mass: pick(&seq_m),
            recurrence: pick(&seq_p),
            exponential: pick(&seq_rq),
            strong: pick(&seq_r),
        })
    }
}

/// Classify the frozen fast process at `x`.
pub fn classify(model: &ModelSpec, x: f64) -> Result<ErgodicityReport> {
    if model.dy != 1 {
        return Err(Error::Input("classification needs a one-dimensional fast component".into()));
    }
    let mut report = ErgodicityReport {
        x,
        ergodic: Verdict::True,
        exp_ergodic: Verdict::True,
        strongly_ergodic: Verdict::True,
        integrals: Vec::new(),
        fitted_rates: None,
        notes: Vec::new(),
    };
    let ln_g2 = |y: f64| {
        let g = (model.coefficients.g)(x, y);
        (g * g).ln()
    };
    let sides: Vec<(&str, f64, f64)> = match model.fast_domain {
        StateDomain::IntervalReflecting { .. } => {
            report.notes.push("bounded reflecting domain: all criterion integrals are finite".into());
            return Ok(report);
        }
        StateDomain::HalfLineReflecting { lower } => vec![("upper", lower, 1.0)],
        StateDomain::FullLine => vec![("upper", 0.0, 1.0), ("lower", 0.0, -1.0)],
    };
    for (side, origin, dir) in sides {
        let psi = |u: f64| log_speed_slope(model, x, origin + dir * u).map(|s| dir * s);
        let lg = |u: f64| ln_g2(origin + dir * u);
        let half = HalfLine { psi: &psi, ln_g2: &lg };
        let res = match half.evaluate() {
            Ok(r) => r,
            Err(y) => {
                report
                    .notes
                    .push(format!("fast diffusion vanishes at y = {}; verdicts inconclusive", origin + dir * y));
                report.ergodic = Verdict::Inconclusive;
                report.exp_ergodic = Verdict::Inconclusive;
                report.strongly_ergodic = Verdict::Inconclusive;
                continue;
            }
        };
        let to_verdict = |b: Behaviour, finite_is: bool| match b {
            Behaviour::Converges => Verdict::from_bool(finite_is),
            Behaviour::Diverges => Verdict::from_bool(!finite_is),
            Behaviour::Undecided => Verdict::Inconclusive,
        };
        // the tail criteria presuppose a finite speed measure
        let finite_speed = to_verdict(res.speed_mass.0, true);
        let ergodic = finite_speed.and(to_verdict(res.recurrence.0, false));
        report.ergodic = report.ergodic.and(ergodic);
        report.exp_ergodic = report.exp_ergodic.and(finite_speed).and(to_verdict(res.exponential.0, true));
        report.strongly_ergodic = report.strongly_ergodic.and(finite_speed).and(to_verdict(res.strong.0, true));
        for (name, (b, ln_v)) in [
            ("speed-mass", res.speed_mass),
            ("recurrence", res.recurrence),
            ("exponential", res.exponential),
            ("strong", res.strong),
        ] {
            report.integrals.push(CriterionIntegral {
                name: name.into(),
                side: side.into(),
                behaviour: b,
                ln_value: ln_v,
                value: Some(ln_v.exp()).filter(|v| v.is_finite()),
            });
        }
    }
    let order = [report.ergodic, report.exp_ergodic, report.strongly_ergodic];
    let inconsistent = order.windows(2).any(|w| w[0] == Verdict::False && w[1] == Verdict::True);
    if inconsistent {
        report.notes.push("criterion verdicts contradict strong => exponential => ergodic; marked inconclusive".into());
        for (i, v) in
            [&mut report.ergodic, &mut report.exp_ergodic, &mut report.strongly_ergodic].into_iter().enumerate()
        {
            if order[i] != Verdict::True || order[..i].contains(&Verdict::False) {
                *v = Verdict::Inconclusive;
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Forward equation

/// Initial law for the forward solver.
#[derive(Debug, Clone)]
pub enum Initial {
    /// Gaussian mollifier of width two local grid cells.
    Point(f64),
    Density(Density1D),
}

/// `z / (e^z - 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-6 {
        1.0 - 0.5 * z + z * z / 12.0
    } else if z > 700.0 {
        z * (-z).exp()
    } else {
        z / z.exp_m1()
    }
}

struct Operator {
    weights: Vec<f64>,
    /// flux coefficients: J_{i+1/2} = lo[i] p_i - hi[i] p_{i+1}
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Operator {
    fn new(model: &ModelSpec, x: f64, grid: &[f64]) -> Result<Self> {
        let n = grid.len();
        let mut lo = Vec::with_capacity(n - 1);
        let mut hi = Vec::with_capacity(n - 1);
        let half_g2 = |y: f64| {
            let g = (model.coefficients.g)(x, y);
            0.5 * g * g
        };
        for w in grid.windows(2) {
            let dphi = crate::stationary::potential_increment(model, x, w[0], w[1], 1e-12)?;
            let h = w[1] - w[0];
            lo.push(bernoulli(-dphi) * half_g2(w[0]) / h);
            hi.push(bernoulli(dphi) * half_g2(w[1]) / h);
        }
        Ok(Self { weights: quad::trapezoid_weights(grid), lo, hi })
    }

    /// Tridiagonal `(c W - A)` for the implicit step `c W p_new - A p_new = rhs`.
    fn factor(&self, c: f64) -> Tridiagonal {
        let n = self.weights.len();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for i in 0..n {
            diag[i] = c * self.weights[i];
            if i + 1 < n {
                // outflow to the right and inflow from the right
                diag[i] += self.lo[i];
                sup[i] = -self.hi[i];
            }
            if i > 0 {
                diag[i] += self.hi[i - 1];
                sub[i] = -self.lo[i - 1];
            }
        }
        Tridiagonal::new(sub, diag, sup)
    }
}

struct Tridiagonal {
    sub: Vec<f64>,
    sup_mod: Vec<f64>,
    diag_inv: Vec<f64>,
}

impl Tridiagonal {
    fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Self {
        let n = diag.len();
        let mut sup_mod = vec![0.0; n];
        let mut diag_inv = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let d = diag[i] - sub[i] * prev;
            diag_inv[i] = 1.0 / d;
            sup_mod[i] = sup[i] * diag_inv[i];
            prev = sup_mod[i];
        }
        Self { sub, sup_mod, diag_inv }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        let mut prev = 0.0;
        for ((r, sub), d) in rhs.iter_mut().zip(&self.sub).zip(&self.diag_inv) {
            *r = (*r - sub * prev) * d;
            prev = *r;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.sup_mod[i] * rhs[i + 1];
        }
    }
}

fn initial_values(grid: &[f64], weights: &[f64], init: &Initial) -> Result<Vec<f64>> {
    let mut p: Vec<f64> = match init {
        Initial::Point(y0) => {
            let (lo, hi) = (grid[0], grid[grid.len() - 1]);
            if !(*y0 >= lo && *y0 <= hi) {
                return Err(Error::Domain { coordinate: "y0", value: *y0 });
            }
            let k = grid.partition_point(|&g| g < *y0).clamp(1, grid.len() - 1);
            let width = 2.0 * (grid[k] - grid[k - 1]);
            grid.iter().map(|&y| (-0.5 * ((y - y0) / width).powi(2)).exp()).collect()
        }
        Initial::Density(d) => grid.iter().map(|&y| d.density_at(y)).collect(),
    };
    let mass: f64 = p.iter().zip(weights).map(|(a, b)| a * b).sum();
    if !(mass > 0.0) {
        return Err(Error::Input("initial law has no mass on the solver grid".into()));
    }
    p.iter_mut().for_each(|v| *v /= mass);
    Ok(p)
}

/// Steps per unit time interval: at least this many, and no step longer than `MAX_STEP`.
const MIN_STEPS: usize = 1000;
const MAX_STEP: f64 = 0.005;

/// Transition densities at each of the increasing `times`.
pub fn forward_pde_solve_many(
    model: &ModelSpec,
    x: f64,
    init: &Initial,
    times: &[f64],
    grid: &[f64],
) -> Result<Vec<Density1D>> {
    if model.dy != 1 {
        return Err(Error::Input("the forward solver needs a one-dimensional fast component".into()));
    }
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("solver grid must be strictly increasing with at least three points".into()));
    }
    if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("output times must be positive and strictly increasing".into()));
    }
    model.check_point(x, grid[0])?;
    model.check_point(x, grid[grid.len() - 1])?;
    let op = Operator::new(model, x, grid)?;
    let mut p = initial_values(grid, &op.weights, init)?;
    let mut out = Vec::with_capacity(times.len());
    let mut t_now = 0.0;
    for &t in times {
        let span = t - t_now;
        let steps = MIN_STEPS.max((span / MAX_STEP).ceil() as usize);
        let tau = span / steps as f64;
        // one backward-Euler start, then BDF2
        let be = op.factor(1.0 / tau);
        let mut prev = p.clone();
        let mut rhs: Vec<f64> = p.iter().zip(&op.weights).map(|(v, w)| v * w / tau).collect();
        be.solve(&mut rhs);
        p = rhs;
        let bdf = op.factor(1.5 / tau);
        for _ in 1..steps {
            let mut rhs: Vec<f64> = (0..p.len()).map(|i| op.weights[i] * (2.0 * p[i] - 0.5 * prev[i]) / tau).collect();
            bdf.solve(&mut rhs);
            prev = std::mem::replace(&mut p, rhs);
        }
        t_now = t;
        let mass: f64 = p.iter().zip(&op.weights).map(|(a, b)| a * b).sum();
        if (mass - 1.0).abs() > 1e-4 || !mass.is_finite() {
            return Err(Error::Conservation { drift: mass - 1.0 });
        }
        let clipped: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
        out.push(Density1D::new(grid.to_vec(), clipped)?);
    }
    Ok(out)
}

/// Transition density from `y0` after time `t` on `grid`.
pub fn forward_pde_solve(model: &ModelSpec, x: f64, y0: f64, t: f64, grid: &[f64]) -> Result<Density1D> {
    Ok(forward_pde_solve_many(model, x, &Initial::Point(y0), &[t], grid)?.remove(0))
}

// ---------------------------------------------------------------------------
// Decay curves

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub amplitude: f64,
    pub rate: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: ExpFit,
}

impl DecayCurve {
    /// Fit `value ~ amplitude * exp(-rate t)` over points with `floor < value < 1`.
    pub fn new(times: Vec<f64>, values: Vec<f64>, floor: f64) -> Self {
        let pts: Vec<(f64, f64)> =
            times.iter().zip(&values).filter(|(_, v)| **v < 1.0 && **v > floor).map(|(t, v)| (*t, v.ln())).collect();
        let fit = log_linear_fit(&pts);
        Self { times, values, fit }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }
}

fn log_linear_fit(pts: &[(f64, f64)]) -> ExpFit {
    if pts.len() < 2 {
        let amplitude = pts.first().map(|p| p.1.exp()).unwrap_or(0.0);
        return ExpFit { amplitude, rate: 0.0, r2: 0.0 };
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stv: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
    let svv: f64 = pts.iter().map(|p| (p.1 - mv).powi(2)).sum();
    let slope = stv / stt;
    let r2 = if svv > 0.0 { (stv * stv / (stt * svv)).clamp(0.0, 1.0) } else { 1.0 };
    ExpFit { amplitude: (mv - slope * mt).exp(), rate: (-slope).max(0.0), r2 }
}

/// Solver grid: the stationary grid, extended to contain `y0` with room to spare.
pub fn decay_grid(model: &ModelSpec, x: f64, y0: f64) -> Result<Vec<f64>> {
    let mut grid = default_grid(model, x, DEFAULT_GRID_POINTS)?;
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let margin = 0.25 * (hi - lo);
    let step = (hi - lo) / DEFAULT_GRID_POINTS as f64;
    if y0 + margin > hi && !model.fast_domain.is_bounded() {
        let end = y0 + margin;
        let mut y = hi + step;
        while y < end {
            grid.push(y);
            y += step;
        }
    }
    if y0 - margin < lo && matches!(model.fast_domain, StateDomain::FullLine) {
        let mut head = Vec::new();
        let mut y = lo - step;
        while y > y0 - margin {
            head.push(y);
            y -= step;
        }
        head.reverse();
        head.extend(grid);
        grid = head;
    }
    Ok(grid)
}

/// Total-variation distance to stationarity along the forward solution from `init`.
pub fn tv_decay_curve_from(
    model: &ModelSpec,
    x: f64,
    init: &Initial,
    times: &[f64],
    grid: &[f64],
) -> Result<DecayCurve> {
    let pi = stationary_density(model, x, grid)?;
    let sols = forward_pde_solve_many(model, x, init, times, grid)?;
    let values = sols.iter().map(|p| tv_distance(p, &pi)).collect();
    Ok(DecayCurve::new(times.to_vec(), values, 1e-9))
}

/// [`tv_decay_curve_from`] a point start on [`decay_grid`].
pub fn tv_decay_curve(model: &ModelSpec, x: f64, y0: f64, times: &[f64]) -> Result<DecayCurve> {
    let grid = decay_grid(model, x, y0)?;
    tv_decay_curve_from(model, x, &Initial::Point(y0), times, &grid)
}

/// Mean distance between synchronously coupled frozen paths started at `y` and `y2`.
///
/// `config` supplies the step, path count and seed; its horizon is raised to the last
/// time and times are read at the nearest step.
pub fn w1_decay_coupling(
    model: &ModelSpec,
    x: f64,
    y: f64,
    y2: f64,
    times: &[f64],
    config: &SimConfig,
    exec: Execution,
) -> Result<DecayCurve> {
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Input("coupling times must be positive".into()));
    }
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let base = SimConfig { horizon, store: StoreMode::FullPaths, ..config.clone() };
    let a = simulate_frozen_with(model, x, &SimConfig { y0: y, ..base.clone() }, exec)?;
    let b = simulate_frozen_with(model, x, &SimConfig { y0: y2, ..base.clone() }, exec)?;
    let values: Vec<f64> = times
        .iter()
        .map(|&t| {
            let k = ((t / base.dt).round() as usize).min(a.paths[0].fast.len() - 1);
            a.paths.iter().zip(&b.paths).map(|(p, q)| (p.fast[k] - q.fast[k]).abs()).sum::<f64>() / a.paths.len() as f64
        })
        .collect();
    let scale = (y - y2).abs().max(f64::MIN_POSITIVE);
    let scaled: Vec<f64> = values.iter().map(|v| v / scale).collect();
    let fit_curve = DecayCurve::new(times.to_vec(), scaled, 1e-12);
    Ok(DecayCurve {
        times: times.to_vec(),
        values,
        fit: ExpFit { amplitude: fit_curve.fit.amplitude * scale, ..fit_curve.fit },
    })
}
