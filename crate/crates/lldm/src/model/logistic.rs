//! Ridge-penalized logistic regression by Newton-Raphson.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Gradient ∞-norm below which a fit counts as converged.
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Logistic function, computed without overflow.
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^s)` without overflow.
pub fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

/// Negative Bernoulli log-likelihood `Σ ln(1 + e^{s_i}) − y_i s_i` of scores `s`.
pub fn nll(scores: ArrayView1<f64>, y: &[u8]) -> f64 {
    scores
        .iter()
        .zip(y)
        .map(|(&s, &yi)| softplus(s) - f64::from(yi) * s)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    /// Penalty weight λ on `‖β‖²` (the intercept is not penalized).
    pub ridge: f64,
    pub intercept: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            ridge: DEFAULT_RIDGE,
            intercept: false,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub beta: Array1<f64>,
    /// Present exactly when the fit used an intercept.
    pub intercept: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticFit {
    pub fn scores(&self, features: ArrayView2<f64>) -> Array1<f64> {
        features.dot(&self.beta) + self.intercept.unwrap_or(0.0)
    }
}

/// Penalized negative log-likelihood `Σ ℓ_i + λ‖β‖²`.
pub fn penalized_nll(features: ArrayView2<f64>, y: &[u8], beta: ArrayView1<f64>, intercept: f64, ridge: f64) -> f64 {
    let scores = features.dot(&beta) + intercept;
    nll(scores.view(), y) + ridge * beta.dot(&beta)
}

fn check_inputs(features: ArrayView2<f64>, y: &[u8]) -> Result<()> {
    if features.nrows() != y.len() {
        return Err(Error::SizeMismatch {
            expected: features.nrows(),
            actual: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidParams(format!("label {bad} is not 0 or 1")));
    }
    let positive = y.iter().filter(|&&v| v == 1).count();
    if positive == 0 || positive == y.len() {
        return Err(Error::SingleClass);
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logistic features"));
    }
    Ok(())
}

/// Maximizes `Σ y_i ln π_i + (1 − y_i) ln(1 − π_i) − λ‖β‖²` over `β`
/// (and an intercept when requested), starting from zero.
///
/// With more features than examples the problem is solved in the span of
/// the examples, where the penalized optimum lies.
pub fn fit_beta(features: ArrayView2<f64>, y: &[u8], ridge: f64, intercept: bool) -> Result<LogisticFit> {
    let opts = LogisticOptions {
        ridge,
        intercept,
        ..Default::default()
    };
    fit_beta_with(features, y, &opts)
}

pub fn fit_beta_with(features: ArrayView2<f64>, y: &[u8], opts: &LogisticOptions) -> Result<LogisticFit> {
    check_inputs(features, y)?;
    let (n, p) = features.dim();
    if p > n && opts.ridge > 0.0 {
        return fit_in_example_span(features, y, opts);
    }
    if p > n {
        log::warn!("{p} features for {n} examples; the fit is not identifiable without a ridge term");
    }
    newton(features, y, opts, Array1::zeros(p), 0.0)
}

/// Newton iterations from `(beta, intercept)`. Every iteration decreases the
/// penalized objective or leaves it unchanged.
pub fn fit_beta_from(
    features: ArrayView2<f64>,
    y: &[u8],
    opts: &LogisticOptions,
    beta: Array1<f64>,
    intercept: f64,
) -> Result<LogisticFit> {
    check_inputs(features, y)?;
    if beta.len() != features.ncols() {
        return Err(Error::SizeMismatch {
            expected: features.ncols(),
            actual: beta.len(),
        });
    }
    newton(features, y, opts, beta, intercept)
}

/// Gradient of the penalized objective in `(β, intercept)`; the intercept
/// component is last and present only when `with_intercept`.
pub fn gradient(
    features: ArrayView2<f64>,
    y: &[u8],
    beta: ArrayView1<f64>,
    intercept: f64,
    ridge: f64,
    with_intercept: bool,
) -> Array1<f64> {
    let scores = features.dot(&beta) + intercept;
    let resid: Array1<f64> = scores.iter().zip(y).map(|(&s, &yi)| sigmoid(s) - f64::from(yi)).collect();
    let mut g = features.t().dot(&resid) + &(&beta * (2.0 * ridge));
    if with_intercept {
        let mut ext = g.to_vec();
        ext.push(resid.sum());
        g = Array1::from(ext);
    }
    g
}

fn newton(features: ArrayView2<f64>, y: &[u8], opts: &LogisticOptions, mut beta: Array1<f64>, mut b: f64) -> Result<LogisticFit> {
    let p = features.ncols();
    let m = p + usize::from(opts.intercept);
    if !opts.intercept {
        b = 0.0;
    }
    let mut obj = penalized_nll(features, y, beta.view(), b, opts.ridge);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let scores = features.dot(&beta) + b;
        let probs = scores.mapv(sigmoid);
        let g = gradient(features, y, beta.view(), b, opts.ridge, opts.intercept);
        if g.iter().fold(0.0f64, |a, v| a.max(v.abs())) < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let weights = probs.mapv(|q| q * (1.0 - q));
        let direction = newton_direction(features, weights.view(), &g, opts).unwrap_or_else(|| -&g);
        let slope = g.dot(&direction);
        let direction = if slope < 0.0 { direction } else { -&g };
        let slope = g.dot(&direction);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand_beta = &beta + &(&direction.slice(ndarray::s![..p]) * step);
            let cand_b = if opts.intercept { b + step * direction[m - 1] } else { 0.0 };
            let cand = penalized_nll(features, y, cand_beta.view(), cand_b, opts.ridge);
            if cand <= obj + 1e-4 * step * slope {
                beta = cand_beta;
                b = cand_b;
                accepted = cand < obj;
                obj = cand;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no representable decrease remains
            converged = g.iter().all(|v| v.is_finite());
            break;
        }
        if !obj.is_finite() {
            return Err(Error::NonFinite("logistic objective"));
        }
    }
    Ok(LogisticFit {
        beta,
        intercept: opts.intercept.then_some(b),
        iterations,
        converged,
    })
}

fn newton_direction(features: ArrayView2<f64>, weights: ArrayView1<f64>, g: &Array1<f64>, opts: &LogisticOptions) -> Option<Array1<f64>> {
    let (n, p) = features.dim();
    let m = g.len();
    let mut design = Array2::<f64>::ones((n, m));
    design.slice_mut(ndarray::s![.., ..p]).assign(&features);
    let weighted = &design * &weights.insert_axis(Axis(1));
    let hess = design.t().dot(&weighted);
    let h = DMatrix::from_fn(m, m, |i, j| hess[[i, j]] + if i == j && i < p { 2.0 * opts.ridge } else { 0.0 });
    let chol = h.cholesky()?;
    let rhs = DVector::from_iterator(m, g.iter().map(|v| -v));
    let d = chol.solve(&rhs);
    d.iter().all(|v| v.is_finite()).then(|| Array1::from_iter(d.iter().copied()))
}

/// Fits in coordinates of the example span: with `K = Z Zᵀ = V Λ Vᵀ`, the
/// features `V Λ^{1/2}` give the same scores and penalty as `β = Zᵀ V Λ^{-1/2} γ`.
fn fit_in_example_span(features: ArrayView2<f64>, y: &[u8], opts: &LogisticOptions) -> Result<LogisticFit> {
    let n = features.nrows();
    let gram = features.dot(&features.t());
    let eig = DMatrix::from_fn(n, n, |i, j| gram[[i, j]]).symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > top * 1e-12).collect();
    if keep.is_empty() {
        // all features zero: only the intercept can be fit
        let zero = Array2::zeros((n, 0));
        let fit = newton(zero.view(), y, opts, Array1::zeros(0), 0.0)?;
        return Ok(LogisticFit {
            beta: Array1::zeros(features.ncols()),
            ..fit
        });
    }
    let r = keep.len();
    let reduced = Array2::from_shape_fn((n, r), |(i, c)| {
        eig.eigenvectors[(i, keep[c])] * eig.eigenvalues[keep[c]].sqrt()
    });
    let fit = newton(reduced.view(), y, opts, Array1::zeros(r), 0.0)?;
    // coefficients on the examples: V Λ^{-1/2} γ
    let alpha = Array1::from_shape_fn(n, |i| {
        keep.iter()
            .zip(fit.beta.iter())
            .map(|(&c, &gam)| eig.eigenvectors[(i, c)] * gam / eig.eigenvalues[c].sqrt())
            .sum::<f64>()
    });
    Ok(LogisticFit {
        beta: features.t().dot(&alpha),
        ..fit
    })
}
