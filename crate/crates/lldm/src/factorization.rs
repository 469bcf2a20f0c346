//! Nonnegative and supervised matrix factorization.
//!
//! Both solvers factor a nonnegative data matrix `X` (d×n, one example per
//! column) as `X ≈ W H` with a nonnegative dictionary `W` (d×R) and codes `H`
//! (R×n). SMF additionally fits logistic coefficients `β` on the proximity
//! features `Wᵀ x_i`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::logistic::{self, LogisticOptions};
use crate::rng;

/// Additive guard in the multiplicative-update denominators.
pub const NMF_GUARD: f64 = 1e-12;

/// Nonnegative dictionary and codes.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
}

impl FactorPair {
    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    pub fn product(&self) -> Array2<f64> {
        self.w.dot(&self.h)
    }
}

fn check_nonnegative(x: ArrayView2<f64>) -> Result<()> {
    for ((row, col), &value) in x.indexed_iter() {
        if !(value >= 0.0) {
            if value.is_nan() {
                return Err(Error::NonFinite("data matrix"));
            }
            return Err(Error::NegativeEntry { row, col, value });
        }
    }
    Ok(())
}

fn check_rank(x: ArrayView2<f64>, rank: usize) -> Result<()> {
    let max = x.nrows().min(x.ncols());
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { rank, max });
    }
    Ok(())
}

/// Matrix of i.i.d. uniform(0, 1] entries.
fn uniform_matrix(rows: usize, cols: usize, r: &mut rng::Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || 1.0 - r.random::<f64>())
}

/// `‖X − W H‖²_F`, computed entrywise.
pub fn reconstruction_error(x: ArrayView2<f64>, w: ArrayView2<f64>, h: ArrayView2<f64>) -> f64 {
    let wh = w.dot(&h);
    Zip::from(&x).and(&wh).fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfResult {
    pub factors: FactorPair,
    /// Objective at initialization followed by its value after each iteration.
    pub trace: Vec<f64>,
}

/// Multiplicative-update NMF of `x` with `rank` components for `iters`
/// rounds, from uniform(0, 1] factors seeded by `seed`.
pub fn nmf(x: ArrayView2<f64>, rank: usize, iters: usize, seed: u64) -> Result<NmfResult> {
    check_nonnegative(x)?;
    check_rank(x, rank)?;
    let (d, n) = x.dim();
    let mut r = rng::seeded(seed);
    let mut w = uniform_matrix(d, rank, &mut r);
    let mut h = uniform_matrix(rank, n, &mut r);
    let mut trace = Vec::with_capacity(iters + 1);
    trace.push(reconstruction_error(x, w.view(), h.view()));
    for _ in 0..iters {
        let num = w.t().dot(&x);
        let den = w.t().dot(&w).dot(&h);
        Zip::from(&mut h)
            .and(&num)
            .and(&den)
            .for_each(|h, &a, &b| *h *= a / (b + NMF_GUARD));
        let num = x.dot(&h.t());
        let den = w.dot(&h.dot(&h.t()));
        Zip::from(&mut w)
            .and(&num)
            .and(&den)
            .for_each(|w, &a, &b| *w *= a / (b + NMF_GUARD));
        trace.push(reconstruction_error(x, w.view(), h.view()));
    }
    Ok(NmfResult {
        factors: FactorPair { w, h },
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDictionary {
    pub factors: FactorPair,
    /// Original indices of the columns kept, in order.
    pub kept: Vec<usize>,
    /// Original indices of zero columns that were dropped.
    pub dropped: Vec<usize>,
}

/// Scales each dictionary column to unit Euclidean norm and the matching
/// code row by the inverse factor, leaving `W H` unchanged. Zero columns
/// are dropped together with their code rows.
pub fn normalize_dictionary(p: &FactorPair) -> Result<NormalizedDictionary> {
    let norms: Vec<f64> = p.w.axis_iter(Axis(1)).map(|c| c.dot(&c).sqrt()).collect();
    let kept: Vec<usize> = (0..norms.len()).filter(|&j| norms[j] > 0.0).collect();
    let dropped: Vec<usize> = (0..norms.len()).filter(|&j| norms[j] == 0.0).collect();
    if kept.is_empty() {
        return Err(Error::AllColumnsZero);
    }
    if !dropped.is_empty() {
        log::warn!("dropping {} zero dictionary column(s): {dropped:?}", dropped.len());
    }
    let mut w = p.w.select(Axis(1), &kept);
    let mut h = p.h.select(Axis(0), &kept);
    for (c, &j) in kept.iter().enumerate() {
        w.column_mut(c).mapv_inplace(|v| v / norms[j]);
        h.row_mut(c).mapv_inplace(|v| v * norms[j]);
    }
    Ok(NormalizedDictionary {
        factors: FactorPair { w, h },
        kept,
        dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmfConfig {
    pub rank: usize,
    /// Weight ξ of the reconstruction term.
    pub xi: f64,
    pub iters: usize,
    /// Projected-gradient steps per block and outer iteration.
    pub inner_iters: usize,
    /// Ridge weight λ on `‖β‖²`.
    pub ridge: f64,
    pub intercept: bool,
    pub seed: u64,
}

impl SmfConfig {
    pub const XI_GRID: [f64; 3] = [0.1, 0.5, 1.0];

    pub fn new(rank: usize, xi: f64, seed: u64) -> Self {
        SmfConfig {
            rank,
            xi,
            iters: 250,
            inner_iters: 20,
            ridge: logistic::DEFAULT_RIDGE,
            intercept: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(Error::InvalidParams(format!("xi {} must be nonnegative", self.xi)));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidParams(format!("ridge {} must be nonnegative", self.ridge)));
        }
        if self.inner_iters == 0 {
            return Err(Error::InvalidParams("inner iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmfSolution {
    pub factors: FactorPair,
    pub beta: Array1<f64>,
    /// Present exactly when the configuration asked for one.
    pub intercept: Option<f64>,
    /// Penalized objective (see [`smf_penalized_objective`]) at
    /// initialization and after each outer iteration.
    pub trace: Vec<f64>,
}

impl SmfSolution {
    /// Classifier scores `βᵀ Wᵀ x_i + b` of the columns of `x`.
    pub fn scores(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.t().dot(&self.factors.w.dot(&self.beta)) + self.intercept.unwrap_or(0.0)
    }
}

fn check_smf_shapes(
    x: ArrayView2<f64>,
    y: &[u8],
    w: ArrayView2<f64>,
    h: ArrayView2<f64>,
    beta: ArrayView1<f64>,
) -> Result<()> {
    let (d, n) = x.dim();
    let r = w.ncols();
    if y.len() != n || w.nrows() != d || h.dim() != (r, n) || beta.len() != r {
        return Err(Error::ShapeMismatch(format!(
            "X {d}x{n}, y {}, W {:?}, H {:?}, beta {}",
            y.len(),
            w.dim(),
            h.dim(),
            beta.len()
        )));
    }
    Ok(())
}

/// Negative log-likelihood of the classifier `σ(⟨β, Wᵀx_i⟩)` with
/// probabilities clamped to `[1e-12, 1 − 1e-12]`, plus `ξ‖X − WH‖²_F`.
pub fn smf_objective(
    x: ArrayView2<f64>,
    y: &[u8],
    w: ArrayView2<f64>,
    h: ArrayView2<f64>,
    beta: ArrayView1<f64>,
    xi: f64,
) -> Result<f64> {
    check_smf_shapes(x, y, w, h, beta)?;
    let scores = x.t().dot(&w.dot(&beta));
    let classification: f64 = scores
        .iter()
        .zip(y)
        .map(|(&s, &yi)| {
            let p = logistic::sigmoid(s).clamp(1e-12, 1.0 - 1e-12);
            if yi == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(classification + xi * reconstruction_error(x, w, h))
}

/// The objective the solver decreases: exact negative log-likelihood of
/// `σ(⟨β, Wᵀx_i⟩ + b)`, plus `ξ‖X − WH‖²_F + λ‖β‖²`.
#[allow(clippy::too_many_arguments)]
pub fn smf_penalized_objective(
    x: ArrayView2<f64>,
    y: &[u8],
    w: ArrayView2<f64>,
    h: ArrayView2<f64>,
    beta: ArrayView1<f64>,
    intercept: f64,
    xi: f64,
    ridge: f64,
) -> Result<f64> {
    check_smf_shapes(x, y, w, h, beta)?;
    let scores = x.t().dot(&w.dot(&beta)) + intercept;
    Ok(logistic::nll(scores.view(), y) + xi * reconstruction_error(x, w, h) + ridge * beta.dot(&beta))
}

fn residuals(scores: ArrayView1<f64>, y: &[u8]) -> Array1<f64> {
    scores
        .iter()
        .zip(y)
        .map(|(&s, &yi)| logistic::sigmoid(s) - f64::from(yi))
        .collect()
}

/// Gradient in `W` of the penalized objective:
/// `X (σ(s) − y) βᵀ + 2ξ (W H Hᵀ − X Hᵀ)`.
pub fn w_block_gradient(
    x: ArrayView2<f64>,
    y: &[u8],
    w: ArrayView2<f64>,
    h: ArrayView2<f64>,
    beta: ArrayView1<f64>,
    intercept: f64,
    xi: f64,
) -> Array2<f64> {
    let scores = x.t().dot(&w.dot(&beta)) + intercept;
    let r = residuals(scores.view(), y);
    let xr = x.dot(&r);
    let mut g = outer(xr.view(), beta);
    g.scaled_add(2.0 * xi, &(w.dot(&h.dot(&h.t())) - x.dot(&h.t())));
    g
}

/// Gradient in `H` of the penalized objective: `2ξ (Wᵀ W H − Wᵀ X)`.
pub fn h_block_gradient(x: ArrayView2<f64>, w: ArrayView2<f64>, h: ArrayView2<f64>, xi: f64) -> Array2<f64> {
    (w.t().dot(&w).dot(&h) - w.t().dot(&x)) * (2.0 * xi)
}

/// Gradient in `β` of the penalized objective: `Wᵀ X (σ(s) − y) + 2λβ`.
pub fn beta_block_gradient(
    x: ArrayView2<f64>,
    y: &[u8],
    w: ArrayView2<f64>,
    beta: ArrayView1<f64>,
    intercept: f64,
    ridge: f64,
) -> Array1<f64> {
    let features = x.t().dot(&w);
    logistic::gradient(features.view(), y, beta, intercept, ridge, false)
}

fn outer(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let a2 = a.insert_axis(Axis(1));
    let b2 = b.insert_axis(Axis(0));
    a2.dot(&b2)
}

/// Largest singular value squared of `x`, by power iteration on `Xᵀ X`.
fn spectral_norm_sq(x: ArrayView2<f64>, xt: ArrayView2<f64>) -> f64 {
    let n = x.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..100 {
        let u = x.dot(&v);
        let next = xt.dot(&u);
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let prev = estimate;
        estimate = norm;
        v = next / norm;
        if (estimate - prev).abs() <= 1e-6 * estimate {
            break;
        }
    }
    // power iteration approaches from below
    estimate * 1.01
}

fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Working state of the block solver; products with the data are cached.
struct SmfState<'a> {
    x: ArrayView2<'a, f64>,
    xt: Array2<f64>,
    y: &'a [u8],
    x_norm_sq: f64,
    x_spec_sq: f64,
    cfg: SmfConfig,
    w: Array2<f64>,
    h: Array2<f64>,
    beta: Array1<f64>,
    b: f64,
}

impl SmfState<'_> {
    /// `‖X − WH‖²` from cached products `XHᵀ` and `HHᵀ`.
    fn reconstruction_from(&self, w: &Array2<f64>, xht: &Array2<f64>, hht: &Array2<f64>) -> f64 {
        let cross: f64 = Zip::from(w).and(xht).fold(0.0, |a, &p, &q| a + p * q);
        let wtw = w.t().dot(w);
        let quad: f64 = Zip::from(&wtw).and(hht).fold(0.0, |a, &p, &q| a + p * q);
        (self.x_norm_sq - 2.0 * cross + quad).max(0.0)
    }

    fn classification(&self, w: &Array2<f64>) -> (f64, Array1<f64>) {
        let scores = self.xt.dot(&w.dot(&self.beta)) + self.b;
        (logistic::nll(scores.view(), self.y), scores)
    }

    fn w_block(&mut self) {
        let xi = self.cfg.xi;
        let beta_sq = self.beta.dot(&self.beta);
        if beta_sq == 0.0 && xi == 0.0 {
            return;
        }
        let xht = self.x.dot(&self.h.t());
        let hht = self.h.dot(&self.h.t());
        let lipschitz = 0.25 * self.x_spec_sq * beta_sq + 2.0 * xi * frobenius(hht.view());
        if lipschitz == 0.0 {
            return;
        }
        let objective = |s: &Self, w: &Array2<f64>| {
            let (c, scores) = s.classification(w);
            (c + xi * s.reconstruction_from(w, &xht, &hht), scores)
        };
        let (mut f, mut scores) = objective(self, &self.w);
        let mut step = 1.0 / lipschitz;
        for _ in 0..self.cfg.inner_iters {
            let r = residuals(scores.view(), self.y);
            let mut grad = outer(self.x.dot(&r).view(), self.beta.view());
            grad.scaled_add(2.0 * xi, &(self.w.dot(&hht) - &xht));
            let mut accepted = false;
            for _ in 0..40 {
                let cand = (&self.w - &(&grad * step)).mapv(|v| v.max(0.0));
                let diff = &cand - &self.w;
                let model = f + Zip::from(&grad).and(&diff).fold(0.0, |a, &g, &d| a + g * d)
                    + diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * step);
                let (fc, sc) = objective(self, &cand);
                if fc <= model && fc <= f {
                    self.w = cand;
                    f = fc;
                    scores = sc;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            step *= 2.0;
        }
    }

    /// Projected gradient on the codes, returning the proximity features
    /// `Wᵀ X` used by the next block.
    fn h_block(&mut self) -> Array2<f64> {
        let xi = self.cfg.xi;
        let a = self.w.t().dot(&self.x);
        if xi == 0.0 {
            return a;
        }
        let p = self.w.t().dot(&self.w);
        let lipschitz = 2.0 * xi * frobenius(p.view());
        if lipschitz == 0.0 {
            return a;
        }
        // ξ(⟨P, HHᵀ⟩ − 2⟨H, A⟩) differs from the H-dependent part of the
        // objective by a constant
        let objective = |h: &Array2<f64>| {
            let hht = h.dot(&h.t());
            let quad: f64 = Zip::from(&p).and(&hht).fold(0.0, |s, &u, &v| s + u * v);
            let cross: f64 = Zip::from(h).and(&a).fold(0.0, |s, &u, &v| s + u * v);
            xi * (quad - 2.0 * cross)
        };
        let mut f = objective(&self.h);
        let step = 1.0 / lipschitz;
        for _ in 0..self.cfg.inner_iters {
            let grad = (p.dot(&self.h) - &a) * (2.0 * xi);
            let cand = (&self.h - &(&grad * step)).mapv(|v| v.max(0.0));
            let fc = objective(&cand);
            if fc > f {
                break;
            }
            self.h = cand;
            f = fc;
        }
        a
    }

    fn beta_block(&mut self, proximity: &Array2<f64>) -> Result<()> {
        let features = proximity.t();
        let opts = LogisticOptions {
            ridge: self.cfg.ridge,
            intercept: self.cfg.intercept,
            tol: logistic::DEFAULT_TOL,
            max_iter: self.cfg.inner_iters,
        };
        let fit = logistic::fit_beta_from(features, self.y, &opts, self.beta.clone(), self.b)?;
        self.beta = fit.beta;
        self.b = fit.intercept.unwrap_or(0.0);
        Ok(())
    }

    fn objective(&self) -> f64 {
        let (c, _) = self.classification(&self.w);
        c + self.cfg.xi * reconstruction_error(self.x, self.w.view(), self.h.view())
            + self.cfg.ridge * self.beta.dot(&self.beta)
    }
}

/// Supervised matrix factorization by cyclic block minimization over
/// `W`, `H` and `β`, each block taking `inner_iters` monotone steps.
pub fn smf(x: ArrayView2<f64>, y: &[u8], cfg: &SmfConfig) -> Result<SmfSolution> {
    cfg.validate()?;
    check_nonnegative(x)?;
    check_rank(x, cfg.rank)?;
    if y.len() != x.ncols() {
        return Err(Error::SizeMismatch {
            expected: x.ncols(),
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
    let (d, n) = x.dim();
    let mut r = rng::seeded(cfg.seed);
    let w = uniform_matrix(d, cfg.rank, &mut r);
    let h = uniform_matrix(cfg.rank, n, &mut r);
    let xt = x.t().as_standard_layout().into_owned();
    let x_spec_sq = spectral_norm_sq(x, xt.view());
    let mut state = SmfState {
        x,
        xt,
        y,
        x_norm_sq: x.iter().map(|v| v * v).sum(),
        x_spec_sq,
        cfg: *cfg,
        w,
        h,
        beta: Array1::zeros(cfg.rank),
        b: 0.0,
    };
    let mut trace = Vec::with_capacity(cfg.iters + 1);
    trace.push(state.objective());
    for _ in 0..cfg.iters {
        state.w_block();
        let proximity = state.h_block();
        state.beta_block(&proximity)?;
        let f = state.objective();
        if !f.is_finite() {
            return Err(Error::NonFinite("SMF objective"));
        }
        trace.push(f);
    }
    Ok(SmfSolution {
        factors: FactorPair {
            w: state.w,
            h: state.h,
        },
        beta: state.beta,
        intercept: cfg.intercept.then_some(state.b),
        trace,
    })
}
