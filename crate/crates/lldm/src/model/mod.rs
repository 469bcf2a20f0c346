//! The latent linear dynamics model (LLDM).
//!
//! A model is a dictionary of R nonnegative, unit-norm filters shaped like
//! the CATs it scores, plus logistic coefficients `β`. The proximity score
//! of an input CAT to filter j is their entrywise inner product, and the
//! predictive probability of synchronization is `σ(βᵀh [+ b])`.

pub mod logistic;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, DynamicsKind, DynamicsSpec, Trajectory};
use crate::encoding::{self, Cat, Dataset};
use crate::error::{Error, Result};
use crate::factorization::{self, FactorPair, SmfConfig};
use crate::graph::Graph;
use crate::rng::{self, Rng};
use crate::sampling::{self, WalkChain};

pub use logistic::{fit_beta, sigmoid, LogisticFit, LogisticOptions};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LldmModel {
    pub filters: Vec<Cat>,
    pub beta: Array1<f64>,
    pub intercept: Option<f64>,
    pub spec: DynamicsSpec,
    pub k: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelManifest {
    format_version: u32,
    rank: usize,
    k: usize,
    t_observed: usize,
    dynamics: DynamicsKind,
    kappa: u32,
    beta: Vec<f64>,
    intercept: Option<f64>,
}

impl LldmModel {
    pub fn rank(&self) -> usize {
        self.filters.len()
    }

    /// Checks filter shapes, nonnegativity and unit norms.
    pub fn validate(&self) -> Result<()> {
        if self.filters.len() != self.beta.len() || self.filters.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} filters and {} coefficients",
                self.filters.len(),
                self.beta.len()
            )));
        }
        for (j, f) in self.filters.iter().enumerate() {
            if f.shape() != (self.k, self.t) {
                return Err(Error::ShapeMismatch(format!("filter {j} has shape {:?}", f.shape())));
            }
            if f.data().iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::InvalidParams(format!("filter {j} has a negative entry")));
            }
            if (f.frobenius_norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParams(format!("filter {j} is not unit norm")));
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &Cat) -> Result<()> {
        if x.shape() != (self.k, self.t) {
            return Err(Error::ShapeMismatch(format!(
                "input of shape {:?} for a model expecting ({}, {})",
                x.shape(),
                self.k,
                self.t
            )));
        }
        Ok(())
    }

    /// `h_j = ⟨F_j, X⟩` for every filter.
    pub fn proximity_scores(&self, x: &Cat) -> Result<Array1<f64>> {
        self.check_input(x)?;
        self.filters.iter().map(|f| f.inner(x)).collect()
    }

    /// `βᵀh` plus the intercept, if any.
    pub fn logit(&self, x: &Cat) -> Result<f64> {
        Ok(self.beta.dot(&self.proximity_scores(x)?) + self.intercept.unwrap_or(0.0))
    }

    pub fn predict_prob(&self, x: &Cat) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    /// Label 1 exactly when the predictive probability exceeds 1/2.
    pub fn predict_label(&self, x: &Cat) -> Result<u8> {
        Ok(u8::from(self.logit(x)? > 0.0))
    }

    pub fn predict_probs(&self, cats: &[Cat]) -> Result<Vec<f64>> {
        cats.iter().map(|c| self.predict_prob(c)).collect()
    }

    /// Proximity scores of each example as the rows of an n×R matrix.
    pub fn proximity_matrix(&self, cats: &[Cat]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((cats.len(), self.rank()));
        for (mut row, c) in out.axis_iter_mut(Axis(0)).zip(cats) {
            row.assign(&self.proximity_scores(c)?);
        }
        Ok(out)
    }

    /// Writes `manifest.json` and `filters.f32` (filter-major, `(i, j, t)`
    /// order, little-endian) into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let manifest = ModelManifest {
            format_version: FORMAT_VERSION,
            rank: self.rank(),
            k: self.k,
            t_observed: self.t,
            dynamics: self.spec.kind,
            kappa: self.spec.kappa,
            beta: self.beta.to_vec(),
            intercept: self.intercept,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(dir.join("manifest.json"), text)?;
        let mut w = BufWriter::new(File::create(dir.join("filters.f32"))?);
        for f in &self.filters {
            encoding::write_f32(&mut w, f.data().iter().copied())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a model directory. Filters are renormalized to unit norm after
    /// the single-precision round trip.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m: ModelManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model format version {}", m.format_version)));
        }
        if m.beta.len() != m.rank {
            return Err(Error::Format(format!("rank {} but {} coefficients", m.rank, m.beta.len())));
        }
        let per = m.k * m.k * m.t_observed;
        let values = encoding::read_f32(&dir.join("filters.f32"), m.rank * per)?;
        let filters = values
            .chunks_exact(per.max(1))
            .take(m.rank)
            .map(|chunk| {
                let cat = encoding::devectorize(ndarray::ArrayView1::from(chunk), m.k, m.t_observed)?;
                let norm = cat.frobenius_norm();
                if norm == 0.0 {
                    return Err(Error::Format("zero filter in model file".into()));
                }
                Ok(cat.scaled(1.0 / norm))
            })
            .collect::<Result<Vec<_>>>()?;
        let model = LldmModel {
            filters,
            beta: Array1::from(m.beta),
            intercept: m.intercept,
            spec: DynamicsSpec {
                kappa: m.kappa,
                ..DynamicsSpec::default_for(m.dynamics)
            },
            k: m.k,
            t: m.t_observed,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Shared settings of the training recipes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Outer iterations of SMF or NMF.
    pub iters: usize,
    /// Inner steps per SMF block.
    pub inner_iters: usize,
    pub ridge: f64,
    pub intercept: bool,
    pub seed: u64,
    /// Distillation fractions used by [`train_lldm_t`].
    pub dense_frac: f64,
    pub sparse_frac: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iters: 250,
            inner_iters: 20,
            ridge: logistic::DEFAULT_RIDGE,
            intercept: false,
            seed: 0,
            dense_frac: 0.1,
            sparse_frac: 0.1,
        }
    }
}

fn check_trainable(ds: &Dataset) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if !ds.has_both_classes() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Unit-norm filters from a compact-coordinate dictionary, then `β` fit on
/// their proximity scores over `ds`.
fn finish_model(ds: &Dataset, w: &Array2<f64>, h: &Array2<f64>, cfg: &TrainConfig) -> Result<LldmModel> {
    let normalized = factorization::normalize_dictionary(&FactorPair { w: w.clone(), h: h.clone() })?;
    let (k, t) = (ds.manifest.k, ds.manifest.t_observed);
    let filters = normalized
        .factors
        .w
        .axis_iter(Axis(1))
        .map(|col| encoding::expand_compact(col, k, t))
        .collect::<Result<Vec<_>>>()?;
    let x = ds.compact_matrix()?;
    let features = x.t().dot(&normalized.factors.w);
    let fit = fit_beta(features.view(), &ds.labels, cfg.ridge, cfg.intercept)?;
    if !fit.converged {
        log::warn!("logistic fit stopped after {} iterations without converging", fit.iterations);
    }
    let model = LldmModel {
        filters,
        beta: fit.beta,
        intercept: fit.intercept,
        spec: ds.spec(),
        k,
        t,
    };
    model.validate()?;
    Ok(model)
}

/// Joint filter and coefficient learning by SMF, followed by dictionary
/// normalization and a refit of `β` on the normalized proximity scores.
pub fn train_lldm_smf(ds: &Dataset, rank: usize, xi: f64, cfg: &TrainConfig) -> Result<LldmModel> {
    check_trainable(ds)?;
    let x = ds.compact_matrix()?;
    let smf_cfg = SmfConfig {
        rank,
        xi,
        iters: cfg.iters,
        inner_iters: cfg.inner_iters,
        ridge: cfg.ridge,
        intercept: cfg.intercept,
        seed: cfg.seed,
    };
    let sol = factorization::smf(x.view(), &ds.labels, &smf_cfg)?;
    finish_model(ds, &sol.factors.w, &sol.factors.h, cfg)
}

/// Two-stage learning: NMF on all CATs (labels unused), then `β`.
pub fn train_lldm_nmf(ds: &Dataset, rank: usize, cfg: &TrainConfig) -> Result<LldmModel> {
    check_trainable(ds)?;
    let x = ds.compact_matrix()?;
    let res = factorization::nmf(x.view(), rank, cfg.iters, cfg.seed)?;
    finish_model(ds, &res.factors.w, &res.factors.h, cfg)
}

/// Like [`train_lldm_nmf`], but the filters are learned from the distilled
/// examples only; `β` is still fit on the whole training set.
pub fn train_lldm_t(ds: &Dataset, rank: usize, cfg: &TrainConfig) -> Result<LldmModel> {
    check_trainable(ds)?;
    let distilled = encoding::distill(ds, cfg.dense_frac, cfg.sparse_frac)?;
    log::info!("distillation kept {} of {} examples", distilled.len(), ds.len());
    let x = distilled.compact_matrix()?;
    let res = factorization::nmf(x.view(), rank, cfg.iters, cfg.seed)?;
    finish_model(ds, &res.factors.w, &res.factors.h, cfg)
}

/// Concentration-principle baseline: 1 if some observed configuration is
/// concentrated, otherwise a fair coin.
pub fn baseline_predict(traj: &Trajectory, spec: &DynamicsSpec, rng: &mut Rng) -> u8 {
    let concentrated = traj.configs.iter().any(|x| dynamics::is_concentrated(x, spec));
    baseline_from_flag(concentrated, rng)
}

/// [`baseline_predict`] given whether the observed dynamics were ever concentrated.
pub fn baseline_from_flag(observed_concentrated: bool, rng: &mut Rng) -> u8 {
    if observed_concentrated {
        1
    } else {
        u8::from(rng.random_bool(0.5))
    }
}

/// Running average of subgraph predictions along one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPrediction {
    #[serde(rename = "final")]
    pub final_prob: f64,
    /// `trace[s − 1]` is the mean of the first `s` subgraph probabilities.
    pub trace: Vec<f64>,
    pub samples_used: usize,
    pub probabilities: Vec<f64>,
}

/// Predictive probability that `g` synchronizes, by averaging the model over
/// `n_samples` k-paths from one chain; `thin` extra chain steps separate
/// consecutive samples.
pub fn predict_global(
    model: &LldmModel,
    g: &Graph,
    traj: &Trajectory,
    n_samples: usize,
    thin: usize,
    rng: &mut Rng,
) -> Result<GlobalPrediction> {
    if traj.len() < model.t {
        return Err(Error::SizeMismatch {
            expected: model.t,
            actual: traj.len(),
        });
    }
    if n_samples == 0 {
        return Err(Error::InvalidParams("at least one sample is required".into()));
    }
    let observed = traj.prefix(model.t);
    let mut chain = WalkChain::new(g, model.k, rng.random())?;
    let budget = sampling::default_max_steps(model.k);
    let mut trace = Vec::with_capacity(n_samples);
    let mut probabilities = Vec::with_capacity(n_samples);
    let mut running = 0.0;
    for s in 1..=n_samples {
        let path = chain.next_kpath_thinned(thin, budget)?;
        let f = g.induced_subgraph(&path)?;
        let p = model.predict_prob(&encoding::build_cat(&f, &observed.restrict(&path), model.t)?)?;
        let w = 1.0 / s as f64;
        running = (1.0 - w) * running + w * p;
        trace.push(running);
        probabilities.push(p);
    }
    Ok(GlobalPrediction {
        final_prob: running,
        trace,
        samples_used: n_samples,
        probabilities,
    })
}

/// Default thinning for [`predict_global`].
pub fn default_global_thin(k: usize) -> usize {
    sampling::default_thin(k)
}

/// Seeded generator for callers without one at hand.
pub fn prediction_rng(seed: u64) -> Rng {
    rng::seeded(rng::derive_stream(seed, "predict"))
}
