//! Coupled slow-fast model specifications and the built-in registry.
//!
//! A model couples a slow scalar state `x` and a fast scalar state `y`:
//!
//! ```text
//! dX = b(X, Y) dt + sigma(X, Y) dW
//! dY = f(X, Y)/eps dt + g(X, Y)/sqrt(eps) dB
//! ```
//!
//! Coefficients are plain Rust closures; new models are added in code behind
//! [`ModelSpec::new`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_id, StreamTag};

/// A scalar coefficient map `(x, y) -> value`.
pub type CoefFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// A scalar map of the slow state.
pub type SlowFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Names accepted by [`get_builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["example21", "ou-coupled", "pure-fast-l2"];

#[derive(Clone)]
pub struct CoefficientSet {
    pub b: CoefFn,
    pub sigma: CoefFn,
    pub f: CoefFn,
    pub g: CoefFn,
}

impl CoefficientSet {
    pub fn new(
        b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { b: Arc::new(b), sigma: Arc::new(sigma), f: Arc::new(f), g: Arc::new(g) }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> Coefficients {
        Coefficients { b: (self.b)(x, y), sigma: (self.sigma)(x, y), f: (self.f)(x, y), g: (self.g)(x, y) }
    }
}

/// Coefficient values at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub b: f64,
    pub sigma: f64,
    pub f: f64,
    pub g: f64,
}

/// State space of one component, with its boundary behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateDomain {
    FullLine,
    HalfLineReflecting { lower: f64 },
    IntervalReflecting { lower: f64, upper: f64 },
}

impl StateDomain {
    pub fn half_line(lower: f64) -> Result<Self> {
        if !lower.is_finite() {
            return Err(Error::InvalidDomain(format!("half-line lower bound {lower} is not finite")));
        }
        Ok(Self::HalfLineReflecting { lower })
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidDomain(format!("interval [{lower}, {upper}] needs finite lower < upper")));
        }
        Ok(Self::IntervalReflecting { lower, upper })
    }

    pub fn contains(&self, v: f64) -> bool {
        match *self {
            Self::FullLine => v.is_finite(),
            Self::HalfLineReflecting { lower } => v >= lower && v.is_finite(),
            Self::IntervalReflecting { lower, upper } => v >= lower && v <= upper,
        }
    }

    pub fn lower(&self) -> Option<f64> {
        match *self {
            Self::FullLine => None,
            Self::HalfLineReflecting { lower } | Self::IntervalReflecting { lower, .. } => Some(lower),
        }
    }

    pub fn upper(&self) -> Option<f64> {
        match *self {
            Self::IntervalReflecting { upper, .. } => Some(upper),
            _ => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Self::IntervalReflecting { .. })
    }

    /// Mirror projection back into the domain.
    #[inline]
    pub fn reflect(&self, v: f64) -> f64 {
        match *self {
            Self::FullLine => v,
            Self::HalfLineReflecting { lower } => {
                if v < lower {
                    2.0 * lower - v
                } else {
                    v
                }
            }
            Self::IntervalReflecting { lower, upper } => {
                if v >= lower && v <= upper {
                    return v;
                }
                // fold onto the period-2L sawtooth
                let len = upper - lower;
                let mut r = (v - lower).rem_euclid(2.0 * len);
                if r > len {
                    r = 2.0 * len - r;
                }
                lower + r
            }
        }
    }
}

/// Closed-form ground truth shipped with a built-in model.
#[derive(Clone, Default)]
pub struct Analytic {
    pub stationary_density: Option<CoefFn>,
    pub averaged_drift: Option<SlowFn>,
    pub averaged_diffusion: Option<SlowFn>,
}

/// Constants of the standing slow/fast assumptions, when known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub lambda3: f64,
}

#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub dx: usize,
    pub dy: usize,
    pub coefficients: CoefficientSet,
    pub slow_domain: StateDomain,
    pub fast_domain: StateDomain,
    pub analytic: Option<Analytic>,
    pub assumption_constants: Option<AssumptionConstants>,
    /// Default `(x0, y0)` used when a configuration does not give one.
    pub default_initial: (f64, f64),
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dx", &self.dx)
            .field("dy", &self.dy)
            .field("slow_domain", &self.slow_domain)
            .field("fast_domain", &self.fast_domain)
            .field("analytic", &self.analytic.is_some())
            .field("assumption_constants", &self.assumption_constants)
            .finish()
    }
}

impl ModelSpec {
    /// A scalar (dx = dy = 1) model without analytic ground truth.
    pub fn new(
        name: impl Into<String>,
        coefficients: CoefficientSet,
        slow_domain: StateDomain,
        fast_domain: StateDomain,
    ) -> Self {
        let x0 = slow_domain.lower().unwrap_or(0.0);
        let y0 = fast_domain.lower().unwrap_or(0.0);
        Self {
            name: name.into(),
            dx: 1,
            dy: 1,
            coefficients,
            slow_domain,
            fast_domain,
            analytic: None,
            assumption_constants: None,
            default_initial: (x0, y0),
        }
    }

    pub fn with_analytic(mut self, analytic: Analytic) -> Self {
        self.analytic = Some(analytic);
        self
    }

    pub fn with_initial(mut self, x0: f64, y0: f64) -> Self {
        self.default_initial = (x0, y0);
        self
    }

    pub fn with_constants(mut self, constants: AssumptionConstants) -> Self {
        self.assumption_constants = Some(constants);
        self
    }

    /// The same slow equation with the fast dynamics switched off (`f = g = 0`), so
    /// `Y` stays at its initial value.
    pub fn with_frozen_fast(&self) -> Self {
        let mut m = self.clone();
        m.name = format!("{}-frozen-fast", self.name);
        m.coefficients.f = Arc::new(|_, _| 0.0);
        m.coefficients.g = Arc::new(|_, _| 0.0);
        m.analytic = None;
        m
    }

    pub fn check_point(&self, x: f64, y: f64) -> Result<()> {
        if !self.slow_domain.contains(x) {
            return Err(Error::Domain { coordinate: "x", value: x });
        }
        if !self.fast_domain.contains(y) {
            return Err(Error::Domain { coordinate: "y", value: y });
        }
        Ok(())
    }

    pub fn analytic_density(&self) -> Option<&CoefFn> {
        self.analytic.as_ref()?.stationary_density.as_ref()
    }
}

/// Evaluate all four coefficients at `(x, y)`.
pub fn eval_coefficients(model: &ModelSpec, x: f64, y: f64) -> Result<Coefficients> {
    model.check_point(x, y)?;
    Ok(model.coefficients.eval(x, y))
}

/// Look up a built-in model by its registry name.
pub fn get_builtin(name: &str) -> Result<ModelSpec> {
    match name {
        "example21" => Ok(example21()),
        "ou-coupled" => Ok(ou_coupled()),
        "pure-fast-l2" => Ok(pure_fast_l2()),
        _ => Err(Error::UnknownModel {
            name: name.to_string(),
            valid: BUILTIN_NAMES.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

/// Fast drift of the discontinuous-average example, written relative to `e^{-xy}` so
/// it stays finite for large `y`.
pub fn example21_fast_drift(x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return -1.0;
    }
    let r = (1.0 - x) * (-(1.0 - x) * y).exp();
    (-x * x * x - r) / (x * x + r)
}

fn example21_density(x: f64, y: f64) -> f64 {
    x * x * (-x * y).exp() + (1.0 - x) * (-y).exp()
}

fn example21() -> ModelSpec {
    let coefficients = CoefficientSet::new(|_, y| y, |_, y| y, example21_fast_drift, |_, _| std::f64::consts::SQRT_2);
    let analytic = Analytic {
        stationary_density: Some(Arc::new(example21_density)),
        averaged_drift: Some(Arc::new(|x| if x > 0.0 { 2.0 - x } else { 1.0 })),
        averaged_diffusion: Some(Arc::new(|x| if x > 0.0 { 2.0 / x + 2.0 * (1.0 - x) } else { 2.0 })),
    };
    ModelSpec {
        name: "example21".into(),
        dx: 1,
        dy: 1,
        coefficients,
        slow_domain: StateDomain::IntervalReflecting { lower: 0.0, upper: 1.0 },
        fast_domain: StateDomain::HalfLineReflecting { lower: 0.0 },
        analytic: Some(analytic),
        assumption_constants: None,
        default_initial: (0.5, 1.0),
    }
}

fn ou_coupled() -> ModelSpec {
    let damp = (-0.5f64).exp();
    let coefficients = CoefficientSet::new(
        |x, y| -x + y.sin(),
        |_, y| (1.0 + 0.5 * y.cos()).sqrt(),
        |x, y| x - y,
        |_, _| std::f64::consts::SQRT_2,
    );
    let analytic = Analytic {
        stationary_density: Some(Arc::new(|x, y| {
            (-(y - x) * (y - x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
        })),
        averaged_drift: Some(Arc::new(move |x| -x + x.sin() * damp)),
        averaged_diffusion: Some(Arc::new(move |x| 1.0 + 0.5 * x.cos() * damp)),
    };
    ModelSpec {
        name: "ou-coupled".into(),
        dx: 1,
        dy: 1,
        coefficients,
        slow_domain: StateDomain::FullLine,
        fast_domain: StateDomain::FullLine,
        analytic: Some(analytic),
        assumption_constants: Some(AssumptionConstants {
            k1: 2.0,
            k2: f64::INFINITY,
            k3: 1.0,
            k4: f64::INFINITY,
            lambda3: 2.0,
        }),
        default_initial: (1.0, 1.0),
    }
}

fn pure_fast_l2() -> ModelSpec {
    let coefficients = CoefficientSet::new(|_, _| 0.0, |_, y| y, |_, y| -y, |_, _| std::f64::consts::SQRT_2);
    let analytic = Analytic {
        stationary_density: Some(Arc::new(|_, y| (-y * y / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt())),
        averaged_drift: Some(Arc::new(|_| 0.0)),
        averaged_diffusion: Some(Arc::new(|_| 1.0)),
    };
    ModelSpec {
        name: "pure-fast-l2".into(),
        dx: 1,
        dy: 1,
        coefficients,
        slow_domain: StateDomain::FullLine,
        fast_domain: StateDomain::FullLine,
        analytic: Some(analytic),
        assumption_constants: None,
        default_initial: (0.0, 0.0),
    }
}

// ---------------------------------------------------------------------------
// Assumption spot-checks

/// One sampled tuple `(x, y, x', y')`.
pub type Tuple4 = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    UnboundedDomainCaveat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub condition: String,
    pub status: CheckStatus,
    /// Tuple attaining the estimate, or violating the inequality on failure.
    pub witness: Option<Tuple4>,
    pub estimated_constant: f64,
    /// Per-term constants where a condition has several parts.
    pub components: Vec<(String, f64)>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub model: String,
    pub samples: usize,
    pub a1: ConditionEntry,
    pub a2: ConditionEntry,
    pub a3: ConditionEntry,
    pub b1: ConditionEntry,
    pub b2: ConditionEntry,
    pub b3: ConditionEntry,
    /// Sampling is evidence, not proof.
    pub caveat: String,
}

impl AssumptionReport {
    pub fn entries(&self) -> [&ConditionEntry; 6] {
        [&self.a1, &self.a2, &self.a3, &self.b1, &self.b2, &self.b3]
    }
}

const CHECK_TOL: f64 = 1e-9;

/// Uniform random tuples inside the model's domains, truncated to `[-half_width, half_width]`
/// on unbounded directions (a half-line `[a, inf)` becomes `[a, a + 2 half_width]`).
pub fn sample_tuples(model: &ModelSpec, n: usize, half_width: f64, seed: u64) -> Vec<Tuple4> {
    fn range(d: &StateDomain, w: f64) -> (f64, f64) {
        match *d {
            StateDomain::FullLine => (-w, w),
            StateDomain::HalfLineReflecting { lower } => (lower, lower + 2.0 * w),
            StateDomain::IntervalReflecting { lower, upper } => (lower, upper),
        }
    }
    let sx = range(&model.slow_domain, half_width);
    let sy = range(&model.fast_domain, half_width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(0, StreamTag::Init));
    let mut unif = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    (0..n).map(|_| [unif(sx), unif(sy), unif(sx), unif(sy)]).collect()
}

struct Running {
    value: f64,
    witness: Option<Tuple4>,
}

impl Running {
    fn max() -> Self {
        Self { value: f64::NEG_INFINITY, witness: None }
    }
    fn min() -> Self {
        Self { value: f64::INFINITY, witness: None }
    }
    fn push_max(&mut self, v: f64, t: Tuple4) {
        if v.is_finite() && v > self.value {
            self.value = v;
            self.witness = Some(t);
        }
    }
    fn push_min(&mut self, v: f64, t: Tuple4) {
        if v.is_finite() && v < self.value {
            self.value = v;
            self.witness = Some(t);
        }
    }
    fn or_zero(&self) -> f64 {
        if self.value.is_finite() {
            self.value
        } else {
            0.0
        }
    }
}

/// Spot-check the slow (A1)-(A3) and fast (B1)-(B3) conditions on sampled tuples.
///
/// Each estimated constant is the smallest one making every sampled inequality hold.
/// Declared constants, when the model carries them, are checked against the samples.
pub fn check_assumptions(model: &ModelSpec, grid: &[Tuple4]) -> Result<AssumptionReport> {
    if grid.is_empty() {
        return Err(Error::Input("assumption grid is empty".into()));
    }
    for t in grid {
        model.check_point(t[0], t[1])?;
        model.check_point(t[2], t[3])?;
    }
    let c = &model.coefficients;
    let declared = model.assumption_constants;

    let mut a1_b = Running::max();
    let mut a1_s = Running::max();
    let mut a1 = Running::max();
    let mut b1_x = Running::max();
    let mut b1_mono = Running::max();
    let mut a2_all = Running::max();
    let mut b2_all = Running::max();
    let mut a3 = Running::min();
    let mut b3 = Running::min();

    let extent = grid.iter().flat_map(|t| t.iter().map(|v| v.abs())).fold(0.0f64, f64::max);
    let mut a2_inner = 0.0f64;
    let mut b2_inner = 0.0f64;

    for &t in grid {
        let [x1, y1, x2, y2] = t;
        let p = c.eval(x1, y1);
        let q = c.eval(x2, y2);
        let dx = x1 - x2;
        let dy = y1 - y2;
        let d2 = dx * dx + dy * dy;
        if d2 > 0.0 {
            let rb = (p.b - q.b).powi(2) / d2;
            let rs = (p.sigma - q.sigma).powi(2) / d2;
            a1_b.push_max(rb, t);
            a1_s.push_max(rs, t);
            a1.push_max(rb + rs, t);
            let mono = ((p.f - q.f) * dy + (p.g - q.g).powi(2)) / d2;
            b1_mono.push_max(mono, t);
        }
        // (f(x1, y) - f(x2, y)) z <= K |x1 - x2| |z| with y = y1, z = y2
        if dx != 0.0 && y2 != 0.0 {
            let fx = (c.f)(x1, y1) - (c.f)(x2, y1);
            b1_x.push_max(fx * y2.signum() / dx.abs(), t);
        }
        for (x, y, co) in [(x1, y1, p), (x2, y2, q)] {
            let s = co.b.abs() + co.sigma.abs();
            let r = co.f.abs() + co.g.abs();
            a2_all.push_max(s, t);
            b2_all.push_max(r, t);
            if x.abs().max(y.abs()) <= 0.5 * extent {
                a2_inner = a2_inner.max(s);
                b2_inner = b2_inner.max(r);
            }
            a3.push_min(co.sigma * co.sigma, t);
            b3.push_min(co.g * co.g, t);
        }
    }

    let unbounded = !model.slow_domain.is_bounded() || !model.fast_domain.is_bounded();
    let growth = |inner: f64, all: f64| unbounded && all > 1.5 * inner && all > CHECK_TOL;

    let lipschitz_entry = |name: &str, est: &Running, parts: Vec<(String, f64)>, decl: Option<f64>| {
        let (status, note) = match decl {
            Some(k) if est.value > k + CHECK_TOL => {
                (CheckStatus::Fail, format!("sampled ratio exceeds declared constant {k}"))
            }
            _ => (CheckStatus::Pass, String::new()),
        };
        ConditionEntry {
            condition: name.into(),
            status,
            witness: est.witness,
            estimated_constant: est.or_zero().max(0.0),
            components: parts,
            note,
        }
    };

    let bound_entry = |name: &str, est: &Running, inner: f64, decl: Option<f64>| {
        let (status, note) = match decl {
            Some(k) if est.value > k + CHECK_TOL => {
                (CheckStatus::Fail, format!("sampled value exceeds declared bound {k}"))
            }
            _ if growth(inner, est.value) => (
                CheckStatus::UnboundedDomainCaveat,
                format!("sup grows with grid extent ({inner:.3e} on the inner half, {:.3e} overall)", est.value),
            ),
            _ => (CheckStatus::Pass, String::new()),
        };
        ConditionEntry {
            condition: name.into(),
            status,
            witness: est.witness,
            estimated_constant: est.or_zero(),
            components: Vec::new(),
            note,
        }
    };

    let ellipticity_entry = |name: &str, est: &Running, decl: Option<f64>| {
        let (status, note) = if est.value <= CHECK_TOL {
            (CheckStatus::Fail, "degenerate: squared coefficient vanishes".to_string())
        } else {
            match decl {
                Some(l) if est.value < l - CHECK_TOL => (CheckStatus::Fail, format!("below declared lower bound {l}")),
                _ => (CheckStatus::Pass, String::new()),
            }
        };
        ConditionEntry {
            condition: name.into(),
            status,
            witness: est.witness,
            estimated_constant: est.or_zero(),
            components: Vec::new(),
            note,
        }
    };

    let k3 = if b1_x.value >= b1_mono.value { &b1_x } else { &b1_mono };

    Ok(AssumptionReport {
        model: model.name.clone(),
        samples: grid.len(),
        a1: lipschitz_entry(
            "A1",
            &a1,
            vec![("b".into(), a1_b.or_zero()), ("sigma".into(), a1_s.or_zero())],
            declared.map(|d| d.k1),
        ),
        a2: bound_entry("A2", &a2_all, a2_inner, declared.map(|d| d.k2)),
        a3: ellipticity_entry("A3", &a3, None),
        b1: lipschitz_entry(
            "B1",
            k3,
            vec![("slow-sensitivity".into(), b1_x.or_zero()), ("monotonicity".into(), b1_mono.or_zero())],
            declared.map(|d| d.k3),
        ),
        b2: bound_entry("B2", &b2_all, b2_inner, declared.map(|d| d.k4)),
        b3: ellipticity_entry("B3", &b3, declared.map(|d| d.lambda3)),
        caveat: "sampled inequalities only; pass is evidence, not proof".into(),
    })
}
