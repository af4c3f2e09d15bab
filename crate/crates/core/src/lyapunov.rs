//! One-step polarization operators acting on Lyapunov (test) functions and
//! the contraction constants they certify.
//!
//! For an operator with child maps `c_0, ..., c_{a-1}` the one-step update of
//! a function `V` on `[0, 1]` is
//!
//! ```text
//! (T V)(x) = (1/a) sum_i V(c_i(x))
//! ```
//!
//! and `lambda = sup_x (T V)(x) / V(x)` bounds the expected decay of
//! `V(X_n)`: `P(X_n in [eta, 1 - eta]) <= lambda^n V(x) / V(eta)` for
//! `V(x) = (x(1-x))^beta`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::de::{binomial_pmf, psi_all, ErasureProb};
use crate::error::{out_of_range, Error, Result};
use crate::numeric::{fmt_real, golden_max, kahan_sum};

/// Default number of grid points for the supremum search.
pub const DEFAULT_GRID_POINTS: usize = 10_000;
/// Default width of the golden-section bracket.
pub const DEFAULT_REFINE_TOL: f64 = 1e-10;
/// Where the search grid starts instead of the 0/0 point `x = 0`.
pub const GRID_EDGE: f64 = 1e-12;
/// Iterated functions with more leaves than this per evaluation are
/// tabulated instead of evaluated recursively.
pub const MAX_RECURSIVE_LEAVES: u64 = 64;
/// Nodes of the tabulation grid for deep iterated functions.
pub const ITERATED_GRID_POINTS: usize = 100_001;

/// A channel map given by per-row erasure probabilities conditioned on the
/// number `d` of unerased outputs among `m`.
///
/// Child `i` of a channel with erasure probability `x` has erasure
/// probability `sum_d C(m,d) x^(m-d) (1-x)^d erased[i][d]`.
#[derive(Debug, Clone)]
pub struct ErasureTransform {
    m: usize,
    erased: Vec<Vec<f64>>,
    kept: Vec<Vec<f64>>,
    symmetric: bool,
}

impl ErasureTransform {
    /// `erased[i][d]` and `kept[i][d] = 1 - erased[i][d]` must both be
    /// accurate; `symmetric` states that the multiset of child maps is
    /// closed under `c(x) -> 1 - c(1 - x)`.
    pub fn new(erased: Vec<Vec<f64>>, kept: Vec<Vec<f64>>, symmetric: bool) -> ErasureTransform {
        let m = erased.len();
        assert!(m > 0 && kept.len() == m);
        assert!(erased.iter().chain(&kept).all(|row| row.len() == m + 1));
        ErasureTransform {
            m,
            erased,
            kept,
            symmetric,
        }
    }

    pub fn arity(&self) -> usize {
        self.m
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn child(&self, i: usize, x: ErasureProb) -> ErasureProb {
        let pmf = binomial_pmf(self.m, x.flip());
        self.child_with(&pmf, i)
    }

    fn child_with(&self, received_pmf: &[f64], i: usize) -> ErasureProb {
        let e = kahan_sum(received_pmf.iter().zip(&self.erased[i]).map(|(p, w)| p * w));
        let k = kahan_sum(received_pmf.iter().zip(&self.kept[i]).map(|(p, w)| p * w));
        ErasureProb::from_parts(e, k)
    }

    pub fn children(&self, x: ErasureProb) -> Vec<ErasureProb> {
        let pmf = binomial_pmf(self.m, x.flip());
        (0..self.m).map(|i| self.child_with(&pmf, i)).collect()
    }
}

/// Which one-step polarization operator to apply.
#[derive(Debug, Clone)]
pub enum OperatorSpec {
    /// The `q x q` Reed–Solomon kernel on the `q`-ary erasure channel.
    Rs { q: usize },
    /// A fixed kernel, through its exact erasure polynomials.
    Fixed {
        label: String,
        transform: Arc<ErasureTransform>,
    },
    /// The average over uniformly random invertible `m x m` kernels.
    EnsembleAvg {
        m: usize,
        q: u32,
        transform: Arc<ErasureTransform>,
    },
    /// `op` applied `times` times in a row.
    Repeated { op: Box<OperatorSpec>, times: u32 },
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorSpec::Rs { q } => write!(f, "rs(q={q})"),
            OperatorSpec::Fixed { label, transform } => {
                write!(f, "fixed({label}, m={})", transform.arity())
            }
            OperatorSpec::EnsembleAvg { m, q, .. } => write!(f, "ensemble(m={m}, q={q})"),
            OperatorSpec::Repeated { op, times } => write!(f, "{op}^{times}"),
        }
    }
}

impl OperatorSpec {
    pub fn rs(q: usize) -> Result<OperatorSpec> {
        if q < 2 {
            return Err(out_of_range("q", q, ">= 2"));
        }
        Ok(OperatorSpec::Rs { q })
    }

    pub fn repeated(self, times: u32) -> OperatorSpec {
        OperatorSpec::Repeated {
            op: Box::new(self),
            times,
        }
    }

    /// Number of child channels per step.
    pub fn arity(&self) -> u64 {
        match self {
            OperatorSpec::Rs { q } => *q as u64,
            OperatorSpec::Fixed { transform, .. } | OperatorSpec::EnsembleAvg { transform, .. } => {
                transform.arity() as u64
            }
            OperatorSpec::Repeated { op, times } => op.arity().saturating_pow(*times),
        }
    }

    /// Whether `(T g)(x) = (T g)(1 - x)` whenever `g(x) = g(1 - x)`.
    pub fn is_symmetric(&self) -> bool {
        match self {
            OperatorSpec::Rs { .. } => true,
            OperatorSpec::Fixed { transform, .. } | OperatorSpec::EnsembleAvg { transform, .. } => {
                transform.is_symmetric()
            }
            OperatorSpec::Repeated { op, .. } => op.is_symmetric(),
        }
    }

    /// The child erasure probabilities of a channel with erasure
    /// probability `x`.
    pub fn children(&self, x: ErasureProb) -> Vec<ErasureProb> {
        match self {
            OperatorSpec::Rs { q } => psi_all(*q, x),
            OperatorSpec::Fixed { transform, .. } | OperatorSpec::EnsembleAvg { transform, .. } => {
                transform.children(x)
            }
            OperatorSpec::Repeated { op, times } => {
                let mut level = vec![x];
                for _ in 0..*times {
                    level = level.into_iter().flat_map(|c| op.children(c)).collect();
                }
                level
            }
        }
    }
}

/// A test function on `[0, 1]`.
#[derive(Debug, Clone)]
pub enum LyapunovFn {
    /// `(x(1-x))^beta`.
    Power { beta: f64 },
    /// `T^depth base`, evaluated by recursion.
    Iterated {
        base: Box<LyapunovFn>,
        op: OperatorSpec,
        depth: u32,
    },
    /// Piecewise-linear interpolation of samples.
    Grid(GridFn),
}

/// Samples of a function on a sorted grid, interpolated linearly.
#[derive(Debug, Clone)]
pub struct GridFn {
    xs: Vec<f64>,
    ys: Vec<f64>,
    symmetric: bool,
    interp_error: f64,
    beta: Option<f64>,
}

impl GridFn {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<GridFn> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::DimensionMismatch(format!(
                "grid needs matching xs/ys of length >= 2, got {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) || xs[0] < 0.0 || xs[xs.len() - 1] > 1.0 {
            return Err(out_of_range("grid", "xs", "strictly increasing within [0, 1]"));
        }
        let n = xs.len();
        let symmetric =
            (0..n).all(|k| (xs[k] + xs[n - 1 - k] - 1.0).abs() < 1e-12 && (ys[k] - ys[n - 1 - k]).abs() < 1e-12);
        let interp_error = second_difference_bound(&xs, &ys);
        Ok(GridFn {
            xs,
            ys,
            symmetric,
            interp_error,
            beta: None,
        })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Estimated worst-case linear interpolation error: the largest second
    /// difference magnitude over 8.
    pub fn interpolation_error(&self) -> f64 {
        self.interp_error
    }

    pub fn eval(&self, x: f64) -> f64 {
        let xs = &self.xs;
        if x <= xs[0] {
            return self.ys[0];
        }
        let n = xs.len();
        if x >= xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = xs.partition_point(|&g| g <= x) - 1;
        let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
        self.ys[k] + t * (self.ys[k + 1] - self.ys[k])
    }
}

fn second_difference_bound(xs: &[f64], ys: &[f64]) -> f64 {
    (1..xs.len() - 1)
        .map(|k| {
            let left = (ys[k] - ys[k - 1]) / (xs[k] - xs[k - 1]);
            let right = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
            let h = (xs[k + 1] - xs[k - 1]) / 2.0;
            ((right - left) * h).abs() / 8.0
        })
        .fold(0.0, f64::max)
}

/// Uniform grid of `n` points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

impl LyapunovFn {
    pub fn power(beta: f64) -> Result<LyapunovFn> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(out_of_range("beta", beta, "(0, 1)"));
        }
        Ok(LyapunovFn::Power { beta })
    }

    /// `T^depth base`. Evaluated by recursion when one evaluation touches at
    /// most [`MAX_RECURSIVE_LEAVES`] leaves; otherwise tabulated level by
    /// level on [`ITERATED_GRID_POINTS`] nodes.
    pub fn iterate(base: LyapunovFn, op: OperatorSpec, depth: u32) -> LyapunovFn {
        if depth == 0 {
            return base;
        }
        let leaves = op.arity().saturating_pow(depth);
        if leaves <= MAX_RECURSIVE_LEAVES {
            return LyapunovFn::Iterated {
                base: Box::new(base),
                op,
                depth,
            };
        }
        let beta = base.beta();
        let xs = uniform_grid(0.0, 1.0, ITERATED_GRID_POINTS);
        let mut current = base;
        let mut accumulated_error = 0.0;
        for _ in 0..depth {
            let ys: Vec<f64> = xs
                .par_iter()
                .map(|&x| apply_operator(&op, &current, ErasureProb::clamped(x)))
                .collect();
            let mut grid = GridFn::new(xs.clone(), ys).expect("uniform grid is valid");
            accumulated_error += grid.interp_error;
            grid.interp_error = accumulated_error;
            grid.beta = beta;
            current = LyapunovFn::Grid(grid);
        }
        current
    }

    pub fn eval(&self, x: ErasureProb) -> f64 {
        match self {
            LyapunovFn::Power { beta } => x.variance_term().powf(*beta),
            LyapunovFn::Iterated { base, op, depth } => eval_iterated(base, op, *depth, x),
            LyapunovFn::Grid(g) => g.eval(x.value()),
        }
    }

    pub fn eval_at(&self, x: f64) -> f64 {
        self.eval(ErasureProb::clamped(x))
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            LyapunovFn::Power { .. } => true,
            LyapunovFn::Iterated { base, op, .. } => base.is_symmetric() && op.is_symmetric(),
            LyapunovFn::Grid(g) => g.symmetric,
        }
    }

    /// Exponent of the underlying power function, when there is one.
    pub fn beta(&self) -> Option<f64> {
        match self {
            LyapunovFn::Power { beta } => Some(*beta),
            LyapunovFn::Iterated { base, .. } => base.beta(),
            LyapunovFn::Grid(g) => g.beta,
        }
    }

    fn describe(&self) -> String {
        match self {
            LyapunovFn::Power { beta } => format!("power({beta})"),
            LyapunovFn::Iterated { base, op, depth } => {
                format!("iterated({}, {op}, {depth})", base.describe())
            }
            LyapunovFn::Grid(g) => format!("grid({} points)", g.xs.len()),
        }
    }
}

fn eval_iterated(base: &LyapunovFn, op: &OperatorSpec, depth: u32, x: ErasureProb) -> f64 {
    if depth == 0 {
        return base.eval(x);
    }
    let kids = op.children(x);
    let n = kids.len() as f64;
    kahan_sum(kids.into_iter().map(|c| eval_iterated(base, op, depth - 1, c))) / n
}

/// `(T V)(x)`: the average of `V` over the children of `x`.
pub fn apply_operator(op: &OperatorSpec, v: &LyapunovFn, x: ErasureProb) -> f64 {
    let kids = op.children(x);
    let n = kids.len() as f64;
    kahan_sum(kids.into_iter().map(|c| v.eval(c))) / n
}

/// `(T V)(x) / V(x)`.
pub fn ratio(op: &OperatorSpec, v: &LyapunovFn, x: ErasureProb) -> f64 {
    apply_operator(op, v, x) / v.eval(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaReport {
    pub operator: String,
    pub function: String,
    pub beta: Option<f64>,
    /// Refined supremum (never below `grid_lambda`).
    pub lambda: f64,
    /// Maximum over the uniform grid alone.
    pub grid_lambda: f64,
    pub argmax_x: f64,
    pub grid_points: usize,
    pub refine_tol: f64,
}

/// Supremum of `(T V)(x) / V(x)` over `(0, 1)`.
///
/// The ratio is sampled on `grid_points` uniform points from `1e-12` to
/// `1/2` (or to `1 - 1e-12` when `T` and `V` lack the mirror symmetry), and
/// the best grid cell is refined by golden-section search down to width
/// `refine_tol`. The open endpoint is safe to skip: for `V = (x(1-x))^beta`
/// the ratio tends to `a^(beta-1) < 1` as `x -> 0` for an operator of arity
/// `a`.
pub fn lambda_sup(op: &OperatorSpec, v: &LyapunovFn, grid_points: usize, refine_tol: f64) -> Result<LambdaReport> {
    if grid_points < 64 {
        return Err(out_of_range("grid_points", grid_points, ">= 64"));
    }
    let symmetric = op.is_symmetric() && v.is_symmetric();
    let hi = if symmetric { 0.5 } else { 1.0 - GRID_EDGE };
    let xs = uniform_grid(GRID_EDGE, hi, grid_points);
    let f = |x: f64| ratio(op, v, ErasureProb::clamped(x));
    let values: Vec<f64> = xs.par_iter().map(|&x| f(x)).collect();
    let (best, grid_lambda) =
        values.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (k, &r)| if r > acc.1 { (k, r) } else { acc },
        );
    let lo_cell = xs[best.saturating_sub(1)];
    let hi_cell = xs[(best + 1).min(grid_points - 1)];
    let (x_ref, refined) = golden_max(f, lo_cell, hi_cell, refine_tol);
    let (lambda, argmax_x) = if refined > grid_lambda {
        (refined, x_ref)
    } else {
        (grid_lambda, xs[best])
    };
    Ok(LambdaReport {
        operator: op.to_string(),
        function: v.describe(),
        beta: v.beta(),
        lambda,
        grid_lambda,
        argmax_x,
        grid_points,
        refine_tol,
    })
}

/// Samples of `(x, (T V)(x) / V(x))` on `points` uniform points of
/// `[1e-12, 1 - 1e-12]`.
pub fn ratio_curve(op: &OperatorSpec, v: &LyapunovFn, points: usize) -> Vec<(f64, f64)> {
    uniform_grid(GRID_EDGE, 1.0 - GRID_EDGE, points.max(2))
        .into_par_iter()
        .map(|x| (x, ratio(op, v, ErasureProb::clamped(x))))
        .collect()
}

/// CSV with header `x,ratio`.
pub fn write_ratio_csv<W: Write>(mut w: W, curve: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "x,ratio")?;
    for &(x, r) in curve {
        writeln!(w, "{},{}", fmt_real(x), fmt_real(r))?;
    }
    Ok(())
}

fn check_beta_half(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 0.5) {
        return Err(out_of_range("beta", beta, "(0, 1/2]"));
    }
    Ok(())
}

/// Closed-form upper bound `6 / sqrt(q beta) * (1/4)^(1/2 - beta)` on
/// `lambda_{q,beta}` for the power function.
pub fn lemma2_bound(q: usize, beta: f64) -> Result<f64> {
    check_beta_half(beta)?;
    Ok(6.0 / (q as f64 * beta).sqrt() * 0.25f64.powf(0.5 - beta))
}

/// Exponent `e` in the tail bound `N^e` for alphabet size `exp(ln_q)`.
pub fn theorem1_exponent(ln_q: f64, gamma: f64, beta: f64) -> f64 {
    let c = 6f64.ln() - 0.5 * beta.ln() + (beta - 0.5) * 4f64.ln();
    gamma * beta - 0.5 + c / ln_q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1Bound {
    pub q: usize,
    pub n: u32,
    pub gamma: f64,
    pub beta: f64,
    /// `N^-gamma`.
    pub threshold: f64,
    pub exponent: f64,
    /// Bound on `P(X_n in [N^-gamma, 1 - N^-gamma])`.
    pub bound: f64,
}

impl Theorem1Bound {
    /// Bound on `P(X_n >= N^-gamma | X_0 = x)`.
    pub fn tail_bound(&self, x: f64) -> f64 {
        self.bound + x / (1.0 - self.threshold)
    }
}

/// Bound on the fraction of unpolarized channels after `n` stages.
/// Requires `N^-gamma <= 3/4`.
pub fn theorem1_bound(q: usize, n: u32, gamma: f64, beta: f64) -> Result<Theorem1Bound> {
    check_beta_half(beta)?;
    if !(gamma > 0.0) {
        return Err(out_of_range("gamma", gamma, "> 0"));
    }
    if q < 2 {
        return Err(out_of_range("q", q, ">= 2"));
    }
    let ln_q = (q as f64).ln();
    let ln_n = n as f64 * ln_q;
    let threshold = (-gamma * ln_n).exp();
    if threshold > 0.75 {
        return Err(Error::Hypothesis { value: threshold });
    }
    let exponent = theorem1_exponent(ln_q, gamma, beta);
    Ok(Theorem1Bound {
        q,
        n,
        gamma,
        beta,
        threshold,
        exponent,
        bound: (exponent * ln_n).exp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Q0Threshold {
    pub gamma: f64,
    pub delta: f64,
    /// `delta / (2 gamma)`.
    pub beta: f64,
    pub ln_q0: f64,
    /// `exp(ln_q0)`; infinite when it overflows.
    pub q0: f64,
}

/// Alphabet size beyond which the tail exponent is at most `-1/2 + delta`.
pub fn q0_threshold(gamma: f64, delta: f64) -> Result<Q0Threshold> {
    if !(gamma >= 0.5) {
        return Err(out_of_range("gamma", gamma, ">= 1/2"));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(out_of_range("delta", delta, "(0, 1/2]"));
    }
    let beta = delta / (2.0 * gamma);
    let ln4 = 4f64.ln();
    let ln_q0 = (2.0 * beta * ln4 - beta.ln() + 2.0 * 6f64.ln() - ln4) / delta;
    Ok(Q0Threshold {
        gamma,
        delta,
        beta,
        ln_q0,
        q0: ln_q0.exp(),
    })
}

/// Right-hand side `lambda^n V(x) / V(eta)` of the unpolarized-fraction
/// bound for `V = (x(1-x))^beta`.
pub fn unpolarized_bound(lambda: f64, n: u32, x: f64, eta: f64, beta: f64) -> f64 {
    let v = |t: f64| (t * (1.0 - t)).powf(beta);
    lambda.powi(n as i32) * v(x) / v(eta)
}

/// Gaussian tail `Q(z) = P(N(0,1) > z)`.
pub fn gaussian_q(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// `m(beta) = integral over the real line of (Q(z) Q(-z))^beta dz`.
pub fn m_beta(beta: f64) -> Result<f64> {
    check_beta_half(beta)?;
    // (Q(z)Q(-z))^beta < exp(-beta z^2 / 2) is far below 1e-12 at |z| = 40
    // for every beta the check above admits except the very smallest, and
    // the integrand is even.
    let f = |z: f64| (gaussian_q(z) * gaussian_q(-z)).powf(beta);
    let half = adaptive_simpson(&f, 0.0, 40.0, 1e-10, 60);
    Ok(2.0 * half)
}

/// Non-rigorous Gaussian estimate `m(beta) / sqrt(q) * (1/4)^(1/2 - beta)` of
/// `lambda_{q,beta}`.
pub fn lambda_tilde(q: usize, beta: f64) -> Result<f64> {
    Ok(m_beta(beta)? / (q as f64).sqrt() * 0.25f64.powf(0.5 - beta))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let c = 0.5 * (a + b);
    let fc = f(c);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, c, fa, fc, fd, left, tol / 2.0, depth - 1)
        + simpson_step(f, c, b, fc, fb, fe, right, tol / 2.0, depth - 1)
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Bernoulli Kullback–Leibler divergence `D(y || x)`.
pub fn kl_bernoulli(y: f64, x: f64) -> f64 {
    xlogy(y, y / x) + xlogy(1.0 - y, (1.0 - y) / (1.0 - x))
}

/// Quadratic-over-linear lower bound `d(y, x)` on `D(y || x)` for `x <= y`.
pub fn kl_lower_bound(y: f64, x: f64) -> f64 {
    0.5 * (y - x) * (y - x) / (x * (1.0 - x) + (1.0 - 2.0 * x) * (y - x) / 3.0)
}

/// `sqrt(pi) + sqrt(4 pi / 3) + sqrt(pi / 2)`.
pub fn proof_constant_a() -> f64 {
    let pi = std::f64::consts::PI;
    pi.sqrt() + (4.0 * pi / 3.0).sqrt() + (pi / 2.0).sqrt()
}

/// Grids and parameters for [`check_proof_inequalities`].
#[derive(Debug, Clone)]
pub struct InequalityGrid {
    /// Points per axis.
    pub points: usize,
    pub qs: Vec<usize>,
    pub betas: Vec<f64>,
}

impl Default for InequalityGrid {
    fn default() -> Self {
        InequalityGrid {
            points: 10_000,
            qs: vec![2, 16, 256],
            betas: vec![0.1, 0.3, 0.5],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Margin {
    pub name: &'static str,
    pub q: Option<usize>,
    pub beta: Option<f64>,
    /// Smallest `rhs - lhs` seen on the grid (for ">=" inequalities,
    /// `lhs - rhs`).
    pub min_slack: f64,
    pub witness_x: f64,
    pub witness_y: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub margins: Vec<Margin>,
}

/// Slack below which an inequality counts as violated.
pub const INEQUALITY_TOLERANCE: f64 = -1e-12;

impl InequalityReport {
    pub fn violations(&self) -> Vec<&Margin> {
        self.margins
            .iter()
            .filter(|m| !(m.min_slack >= INEQUALITY_TOLERANCE))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.violations().is_empty()
    }

    pub fn worst(&self) -> Option<&Margin> {
        self.margins.iter().min_by(|a, b| a.min_slack.total_cmp(&b.min_slack))
    }
}

fn min_over<F>(xs: &[f64], slack: F) -> (f64, f64)
where
    F: Fn(f64) -> f64 + Sync,
{
    xs.par_iter()
        .map(|&x| (slack(x), x))
        .reduce(|| (f64::INFINITY, f64::NAN), pick_min)
}

fn pick_min(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    // NaN slack counts as a violation.
    if b.0.is_nan() || b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

fn min_over_pairs<F>(xs: &[f64], ordered: bool, slack: F) -> (f64, f64, f64)
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    xs.par_iter()
        .map(|&x| {
            xs.iter()
                .filter(|&&y| !ordered || x <= y)
                .map(|&y| (slack(x, y), x, y))
                .fold((f64::INFINITY, f64::NAN, f64::NAN), |a, b| {
                    if b.0.is_nan() || b.0 < a.0 {
                        b
                    } else {
                        a
                    }
                })
        })
        .reduce(
            || (f64::INFINITY, f64::NAN, f64::NAN),
            |a, b| {
                if b.0.is_nan() || b.0 < a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
                    b
                } else {
                    a
                }
            },
        )
}

/// Evaluates the analytic inequalities behind the closed-form bound on
/// `lambda_{q,beta}` on dense grids and reports the smallest slack of each:
///
/// * `kl_quadratic`: `d(y, x) <= D(y || x)` for `0 < x <= y < 1`;
/// * `kl_linear`: `D(y || x) >= (y - x) + (1 - y) ln((1 - y)/(1 - x))`;
/// * `z_log`: `1 - z + z ln z >= (1 - z)^2 / 2` on `[0, 1]`;
/// * `middle_term`: `V(psi_{ceil(qx)-1}(x)) / q <= (2x(1-x))^beta / sqrt(2q)`
///   on `[1/2, 1]`;
/// * `tv_bound`: `(T_q V)(x) <= (2x(1-x))^beta / sqrt(2q)
///   + A sqrt(x(1-x)/(q beta))` on `[1/2, 1]`.
pub fn check_proof_inequalities(grid: &InequalityGrid) -> InequalityReport {
    let g = grid.points.max(2);
    let interior: Vec<f64> = (1..=g).map(|k| k as f64 / (g + 1) as f64).collect();
    let closed = uniform_grid(0.0, 1.0, g);
    let upper_half = uniform_grid(0.5, 1.0, g);
    let mut margins = Vec::new();

    let (s, x, y) = min_over_pairs(&interior, true, |x, y| kl_bernoulli(y, x) - kl_lower_bound(y, x));
    margins.push(Margin {
        name: "kl_quadratic",
        q: None,
        beta: None,
        min_slack: s,
        witness_x: x,
        witness_y: Some(y),
    });

    let (s, x, y) = min_over_pairs(&interior, false, |x, y| {
        kl_bernoulli(y, x) - ((y - x) + xlogy(1.0 - y, (1.0 - y) / (1.0 - x)))
    });
    margins.push(Margin {
        name: "kl_linear",
        q: None,
        beta: None,
        min_slack: s,
        witness_x: x,
        witness_y: Some(y),
    });

    let (s, z) = min_over(&closed, |z| (1.0 - z + xlogy(z, z)) - 0.5 * (1.0 - z) * (1.0 - z));
    margins.push(Margin {
        name: "z_log",
        q: None,
        beta: None,
        min_slack: s,
        witness_x: z,
        witness_y: None,
    });

    let a = proof_constant_a();
    for &q in &grid.qs {
        let qf = q as f64;
        for &beta in &grid.betas {
            let v = LyapunovFn::Power { beta };
            let op = OperatorSpec::Rs { q };
            let head = |x: f64| (2.0 * x * (1.0 - x)).powf(beta) / (2.0 * qf).sqrt();

            let (s, x) = min_over(&upper_half, |x| {
                let kids = psi_all(q, ErasureProb::clamped(x));
                let idx = ((qf * x).ceil() as usize).clamp(1, q) - 1;
                head(x) - v.eval(kids[idx]) / qf
            });
            margins.push(Margin {
                name: "middle_term",
                q: Some(q),
                beta: Some(beta),
                min_slack: s,
                witness_x: x,
                witness_y: None,
            });

            let (s, x) = min_over(&upper_half, |x| {
                let bound = head(x) + a * (x * (1.0 - x) / (qf * beta)).sqrt();
                bound - apply_operator(&op, &v, ErasureProb::clamped(x))
            });
            margins.push(Margin {
                name: "tv_bound",
                q: Some(q),
                beta: Some(beta),
                min_slack: s,
                witness_x: x,
                witness_y: None,
            });
        }
    }
    InequalityReport { margins }
}
