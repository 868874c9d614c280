//! One-dimensional quadrature helpers.

/// Gauss–Kronrod 7/15 abscissae on [-1, 1] (non-negative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Returns the estimate and the accumulated error estimate. Intervals are bisected
/// until their local error falls below their share of `tol` or the depth limit is hit.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    if b < a {
        let (v, e) = integrate(f, b, a, tol);
        return (-v, e);
    }
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    let mut err = 0.0;
    let width = b - a;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        let share = tol * (hi - lo) / width;
        if e <= share.max(1e-15 * v.abs()) || depth >= 48 {
            total += v;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    (total, err)
}

/// Eight-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre8<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    const X: [f64; 4] =
        [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    const W: [f64; 4] =
        [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..4 {
        s += W[k] * (f(c - h * X[k]) + f(c + h * X[k]));
    }
    s * h
}

/// Trapezoidal integral of sampled values on a (possibly non-uniform) grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2).zip(values.windows(2)).map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1])).sum()
}

/// Composite Simpson rule on a non-uniform grid (piecewise quadratic interpolation).
///
/// Pairs of intervals use the three-point rule; with an odd interval count the last
/// interval integrates the quadratic through the final three nodes.
pub fn simpson(grid: &[f64], values: &[f64]) -> f64 {
    let n = grid.len();
    if n < 3 {
        return trapezoid(grid, values);
    }
    let mut s = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let (h0, h1) = (grid[i + 1] - grid[i], grid[i + 2] - grid[i + 1]);
        let (f0, f1, f2) = (values[i], values[i + 1], values[i + 2]);
        s += (h0 + h1) / 6.0 * ((2.0 - h1 / h0) * f0 + (h0 + h1) * (h0 + h1) / (h0 * h1) * f1 + (2.0 - h0 / h1) * f2);
        i += 2;
    }
    if i + 1 < n {
        let (h0, h1) = (grid[n - 2] - grid[n - 3], grid[n - 1] - grid[n - 2]);
        let (f0, f1, f2) = (values[n - 3], values[n - 2], values[n - 1]);
        s += h1
            * (f2 * (2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1)) + f1 * (h1 + 3.0 * h0) / (6.0 * h0)
                - f0 * h1 * h1 / (6.0 * h0 * (h0 + h1)));
    }
    s
}

/// Trapezoidal quadrature weights for a grid (the finite-volume cell sizes).
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (grid[i + 1] - grid[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Exact integral of `|u|` over `[0, h]` where `u` is linear from `a` to `b`.
pub fn abs_linear(h: f64, a: f64, b: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * h * (a.abs() + b.abs())
    } else {
        0.5 * h * (a * a + b * b) / (a.abs() + b.abs())
    }
}

/// Integral of `exp(u)` over an interval of width `h` where `u` is linear from `ua` to `ub`.
/// Returned as a natural logarithm so that huge or tiny magnitudes survive.
pub fn ln_exp_linear(h: f64, ua: f64, ub: f64) -> f64 {
    let d = ub - ua;
    let hi = ua.max(ub);
    // h * (e^{ub} - e^{ua}) / (ub - ua) = h * e^{hi} * (1 - e^{-|d|}) / |d|
    let ad = d.abs();
    let factor = if ad < 1e-8 { 1.0 - 0.5 * ad } else { -(-ad).exp_m1() / ad };
    h.ln() + hi + factor.ln()
}

/// `ln(e^a + e^b)` without overflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
