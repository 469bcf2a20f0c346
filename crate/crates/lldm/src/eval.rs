//! Splits, accuracy metrics, deviance residuals, the logistic-regression
//! comparator and multi-seed experiments.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array1;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsSpec, Trajectory};
use crate::encoding::{self, Dataset, SubgraphDataParams};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{self, logistic, LldmModel, TrainConfig};
use crate::rng::{self, Rng};

/// Probability clamp used before taking logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n: usize,
}

impl Metrics {
    pub fn from_predictions(predicted: &[u8], labels: &[u8]) -> Result<Metrics> {
        if predicted.len() != labels.len() {
            return Err(Error::SizeMismatch {
                expected: labels.len(),
                actual: predicted.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::Empty("no examples to score".into()));
        }
        let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
        for (&p, &y) in predicted.iter().zip(labels) {
            match (p, y) {
                (1, 1) => tp += 1,
                (0, 0) => tn += 1,
                (1, _) => fp += 1,
                _ => fn_ += 1,
            }
        }
        let n = labels.len();
        Ok(Metrics {
            accuracy: (tp + tn) as f64 / n as f64,
            tp,
            tn,
            fp,
            fn_,
            n,
        })
    }
}

/// Indices of a uniformly random split: the first `⌊train_frac·n⌋` entries
/// of a seeded permutation go to the training side.
pub fn split_indices(n: usize, train_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidParams(format!("train fraction {train_frac} outside (0, 1)")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(rng::derive_stream(seed, "split")));
    let cut = (train_frac * n as f64).floor() as usize;
    if cut == 0 || cut == n {
        return Err(Error::Empty(format!("split of {n} examples at {train_frac} leaves a side empty")));
    }
    let test = perm.split_off(cut);
    Ok((perm, test))
}

pub fn split(ds: &Dataset, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), train_frac, seed)?;
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

/// Threshold-1/2 predictions of `model` against the labels of `ds`.
pub fn accuracy(model: &LldmModel, ds: &Dataset) -> Result<Metrics> {
    let predicted = ds
        .cats
        .iter()
        .map(|c| model.predict_label(c))
        .collect::<Result<Vec<_>>>()?;
    Metrics::from_predictions(&predicted, &ds.labels)
}

/// Baseline predictor on observed trajectories.
pub fn baseline_accuracy(trajectories: &[Trajectory], labels: &[u8], spec: &DynamicsSpec, rng: &mut Rng) -> Result<Metrics> {
    let predicted: Vec<u8> = trajectories
        .iter()
        .map(|t| model::baseline_predict(t, spec, rng))
        .collect();
    Metrics::from_predictions(&predicted, labels)
}

/// Baseline predictor using the per-example concentration flags recorded at
/// generation time.
pub fn baseline_accuracy_from_meta(ds: &Dataset, rng: &mut Rng) -> Result<Metrics> {
    if ds.meta.len() != ds.len() {
        return Err(Error::InvalidParams("baseline needs per-example metadata".into()));
    }
    let predicted: Vec<u8> = ds
        .meta
        .iter()
        .map(|m| model::baseline_from_flag(m.observed_concentrated, rng))
        .collect();
    Metrics::from_predictions(&predicted, &ds.labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub index: usize,
    pub label: u8,
    /// Fitted probability, clamped to `[1e-12, 1 − 1e-12]`.
    pub fitted: f64,
    pub deviance: f64,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Negative log-likelihood of one example.
pub fn example_nll(y: u8, p: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// `sign(y − p̂) · √(−2 (y ln p̂ + (1 − y) ln(1 − p̂)))` with clamped `p̂`.
pub fn deviance(y: u8, p: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    sign(f64::from(y) - p) * (2.0 * example_nll(y, p)).sqrt()
}

pub fn deviance_residuals(model: &LldmModel, ds: &Dataset) -> Result<Vec<Residual>> {
    ds.cats
        .iter()
        .zip(&ds.labels)
        .enumerate()
        .map(|(index, (c, &label))| {
            let fitted = model.predict_prob(c)?.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            Ok(Residual {
                index,
                label,
                fitted,
                deviance: deviance(label, fitted),
            })
        })
        .collect()
}

/// Total negative log-likelihood of `model` on `ds`, with clamped probabilities.
pub fn total_nll(model: &LldmModel, ds: &Dataset) -> Result<f64> {
    ds.cats
        .iter()
        .zip(&ds.labels)
        .map(|(c, &y)| Ok(example_nll(y, model.predict_prob(c)?)))
        .sum()
}

/// CSV with header `index,label,fitted,deviance`; reals carry 17 significant digits.
pub fn write_residuals_csv(residuals: &[Residual], mut w: impl Write) -> Result<()> {
    writeln!(w, "index,label,fitted,deviance")?;
    for r in residuals {
        writeln!(w, "{},{},{:.16e},{:.16e}", r.index, r.label, r.fitted, r.deviance)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub metrics: Metrics,
    pub seed: u64,
}

pub fn write_metrics_json(metrics: &Metrics, seed: u64, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&MetricsReport {
        metrics: *metrics,
        seed,
    })?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Plain logistic regression on the full CAT entries, with an intercept.
///
/// Features are the compact coordinates of the CATs: an isometry of the
/// vectorized tensors, so the penalized fit and its predictions agree with
/// those on `vec(X_i)`.
pub fn logreg_comparator(train: &Dataset, test: &Dataset, ridge: f64) -> Result<Metrics> {
    let x_train = train.compact_matrix()?;
    let fit = logistic::fit_beta(x_train.t(), &train.labels, ridge, true)?;
    let x_test = test.compact_matrix()?;
    let scores: Array1<f64> = fit.scores(x_test.t());
    let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s > 0.0)).collect();
    Metrics::from_predictions(&predicted, &test.labels)
}

/// Validation accuracy of each candidate ξ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiSelection {
    pub xi: f64,
    pub scores: Vec<(f64, f64)>,
}

/// Trains SMF for every ξ on 80% of `train` and keeps the model with the
/// best accuracy on the held-out 20% (earliest ξ on ties).
pub fn select_xi(train: &Dataset, rank: usize, grid: &[f64], cfg: &TrainConfig, seed: u64) -> Result<(LldmModel, XiSelection)> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty xi grid".into()));
    }
    let (fit, val) = split(train, 0.8, rng::derive_stream(seed, "validation"))?;
    let mut best: Option<(LldmModel, f64, f64)> = None;
    let mut scores = Vec::with_capacity(grid.len());
    for &xi in grid {
        let m = model::train_lldm_smf(&fit, rank, xi, cfg)?;
        let acc = accuracy(&m, &val)?.accuracy;
        log::info!("xi {xi}: validation accuracy {acc:.4}");
        scores.push((xi, acc));
        if best.as_ref().is_none_or(|b| acc > b.2) {
            best = Some((m, xi, acc));
        }
    }
    let (m, xi, _) = best.expect("grid is nonempty");
    Ok((m, XiSelection { xi, scores }))
}

/// One seed of the subgraph-level accuracy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub examples: usize,
    pub positive_fraction: f64,
    pub xi: f64,
    pub lldm: Metrics,
    pub lldm_t: Metrics,
    pub baseline: Metrics,
}

/// Subgraph-level experiment settings; each seed draws its own parent
/// graph, dataset, split and initializations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphExperiment {
    pub spec: DynamicsSpec,
    pub k: usize,
    pub count: usize,
    pub rank: usize,
    pub xi_grid: Vec<f64>,
    pub train: TrainConfig,
    pub train_frac: f64,
}

impl SubgraphExperiment {
    /// Runs one seed on `parent`.
    pub fn run_seed(&self, parent: &Graph, parent_desc: &str, seed: u64) -> Result<SeedResult> {
        let params = SubgraphDataParams::new(self.spec, self.k, self.count, seed);
        let ds = encoding::gen_subgraph_dataset(parent, parent_desc, &params)?;
        let (train, test) = split(&ds, self.train_frac, seed)?;
        let cfg = TrainConfig { seed, ..self.train };
        let (lldm, selection) = select_xi(&train, self.rank, &self.xi_grid, &cfg, seed)?;
        let lldm_t = model::train_lldm_t(&train, self.rank, &cfg)?;
        let mut coin = rng::seeded(rng::derive_stream(seed, "baseline"));
        Ok(SeedResult {
            seed,
            examples: ds.len(),
            positive_fraction: ds.manifest.labels_positive as f64 / ds.len() as f64,
            xi: selection.xi,
            lldm: accuracy(&lldm, &test)?,
            lldm_t: accuracy(&lldm_t, &test)?,
            baseline: baseline_accuracy_from_meta(&test, &mut coin)?,
        })
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DynamicsKind, PhaseConfig};
    use crate::encoding::{Cat, DatasetMode, ExampleMeta, Manifest};
    use proptest::prelude::*;
    use rand::Rng as _;

    fn toy_dataset(labels: &[u8], seed: u64) -> Dataset {
        let mut r = rng::seeded(seed);
        let cats = labels
            .iter()
            .map(|&y| {
                let mut c = Cat::zeros(3, 2);
                for t in 0..2 {
                    c.set_pair(0, 1, t, r.random::<f64>() + if y == 1 { 0.0 } else { 1.0 });
                    c.set_pair(1, 2, t, r.random::<f64>());
                }
                c
            })
            .collect();
        let meta = labels
            .iter()
            .map(|&y| ExampleMeta {
                parent: 0,
                nodes: vec![0, 1, 2],
                density: 2.0 / 3.0,
                initial_concentrated: y == 1,
                observed_concentrated: y == 1,
            })
            .collect();
        let manifest = Manifest {
            format_version: encoding::FORMAT_VERSION,
            dynamics: DynamicsKind::Kuramoto,
            kappa: 0,
            k: 3,
            t_observed: 2,
            t_horizon: 3,
            count: 0,
            labels_positive: 0,
            seed,
            mode: DatasetMode::RunOnSubgraph,
            parent: String::new(),
        };
        Dataset::from_parts(manifest, cats, labels.to_vec(), meta).unwrap()
    }

    fn constant_model(logit_sign: f64) -> LldmModel {
        let mut f = Cat::zeros(3, 2);
        f.set_pair(0, 1, 0, 0.5f64.sqrt());
        LldmModel {
            filters: vec![f],
            beta: Array1::from(vec![0.0]),
            intercept: Some(logit_sign * 5.0),
            spec: DynamicsSpec::kuramoto(),
            k: 3,
            t: 2,
        }
    }

    #[test]
    fn split_examples() {
        let ds = toy_dataset(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 1);
        let (a, b) = split_indices(10, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, 0.8, 3).unwrap(), (a, b));
        let (train, test) = split(&ds, 0.8, 3).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert!(split(&ds, 1.0, 3).is_err());
        assert!(split(&ds, 0.05, 3).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let ds = toy_dataset(&[1; 6], 2);
        let m = accuracy(&constant_model(1.0), &ds).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!((m.tp, m.n), (6, 6));
        let mixed = toy_dataset(&[1, 0, 0, 1, 1], 3);
        let a = accuracy(&constant_model(1.0), &mixed).unwrap().accuracy;
        let mut flipped = mixed.clone();
        flipped.labels.iter_mut().for_each(|y| *y = 1 - *y);
        flipped.manifest.labels_positive = 2;
        assert!((accuracy(&constant_model(1.0), &flipped).unwrap().accuracy - (1.0 - a)).abs() < 1e-15);
    }

    #[test]
    fn baseline_on_concentrated_set() {
        let spec = DynamicsSpec::fca(5);
        let trajs = vec![
            Trajectory {
                spec,
                configs: vec![PhaseConfig::Discrete(vec![1, 1, 2])],
            };
            5
        ];
        let m = baseline_accuracy(&trajs, &[1; 5], &spec, &mut rng::seeded(1)).unwrap();
        assert_eq!(m.accuracy, 1.0);
        let ds = toy_dataset(&[1; 4], 5);
        assert_eq!(baseline_accuracy_from_meta(&ds, &mut rng::seeded(2)).unwrap().accuracy, 1.0);
    }

    #[test]
    fn deviance_examples() {
        assert!(deviance(1, 1.0).abs() < 2e-6);
        assert!((deviance(1, 0.5) - 1.177_410_022_515_474_6).abs() < 1e-12);
        assert!((deviance(0, 0.5) + 1.177_410_022_515_474_6).abs() < 1e-12);
        assert_eq!(sign(0.0), 0.0);
    }

    proptest! {
        #[test]
        fn residual_identities(seed in any::<u64>(), b in -3.0f64..3.0, beta in -2.0f64..2.0) {
            let mut r = rng::seeded(seed);
            let labels: Vec<u8> = (0..30).map(|_| u8::from(r.random_bool(0.5))).collect();
            let ds = toy_dataset(&labels, seed);
            let mut m = constant_model(1.0);
            m.beta[0] = beta;
            m.intercept = Some(b);
            let res = deviance_residuals(&m, &ds).unwrap();
            let sq: f64 = res.iter().map(|r| r.deviance * r.deviance).sum();
            let nll = total_nll(&m, &ds).unwrap();
            prop_assert!((sq - 2.0 * nll).abs() <= 1e-9 * (2.0 * nll));
            for r in &res {
                let ok = if r.label == 1 { r.deviance >= 0.0 } else { r.deviance <= 0.0 };
                prop_assert!(ok);
            }
        }

        #[test]
        fn accuracy_ignores_order(seed in any::<u64>()) {
            let mut r = rng::seeded(seed);
            let labels: Vec<u8> = (0..12).map(|_| u8::from(r.random_bool(0.5))).collect();
            let ds = toy_dataset(&labels, seed);
            let mut m = constant_model(1.0);
            m.beta[0] = -1.0;
            m.intercept = Some(0.8);
            let rev: Vec<usize> = (0..12).rev().collect();
            prop_assert_eq!(accuracy(&m, &ds).unwrap(), accuracy(&m, &ds.subset(&rev).unwrap()).unwrap());
        }
    }

    #[test]
    fn residual_csv_format() {
        let res = vec![Residual {
            index: 0,
            label: 1,
            fitted: 0.5,
            deviance: deviance(1, 0.5),
        }];
        let mut out = Vec::new();
        write_residuals_csv(&res, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,label,fitted,deviance"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[3].parse::<f64>().unwrap(), deviance(1, 0.5));
        let digits = row[3].split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
        assert!(digits >= 9);
    }

    #[test]
    fn metrics_json_keys() {
        let m = Metrics::from_predictions(&[1, 0, 1], &[1, 1, 0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.json");
        write_metrics_json(&m, 7, &path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        for key in ["accuracy", "tp", "tn", "fp", "fn", "n", "seed"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["fn"], 1);
        assert_eq!(v["fp"], 1);
    }

    #[test]
    fn logreg_comparator_examples() {
        let labels: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let train = toy_dataset(&labels, 8);
        let test = toy_dataset(&labels, 9);
        assert_eq!(logreg_comparator(&train, &test, 1e-6).unwrap().accuracy, 1.0);
        let uneven: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
        let mut noisy = toy_dataset(&uneven, 10);
        noisy.labels.swap(0, 1);
        let acc = logreg_comparator(&noisy, &noisy, 1e-6).unwrap().accuracy;
        assert!(acc >= 20.0 / 30.0);
        let rev: Vec<usize> = (0..30).rev().collect();
        let permuted = noisy.subset(&rev).unwrap();
        assert_eq!(
            logreg_comparator(&permuted, &noisy, 1e-6).unwrap(),
            logreg_comparator(&noisy, &noisy, 1e-6).unwrap()
        );
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}
