//! Colored adjacency tensors (CATs) and labeled datasets of them.
//!
//! A CAT of a k-node subgraph observed for T iterations is the k×k×T tensor
//! whose slice t is the adjacency matrix with each edge weighted by the phase
//! distance between its endpoints at time t.

use std::f64::consts::{SQRT_2, TAU};
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, DynamicsKind, DynamicsSpec, Trajectory};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;
use crate::sampling::{self, WalkChain};

pub const FORMAT_VERSION: u32 = 1;

/// Nonnegative k×k×T tensor, symmetric in its first two indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Cat {
    data: Array3<f64>,
}

impl Cat {
    pub fn zeros(k: usize, t: usize) -> Self {
        Cat {
            data: Array3::zeros((k, k, t)),
        }
    }

    /// Wraps an array of shape `(k, k, T)`.
    pub fn from_array(data: Array3<f64>) -> Result<Self> {
        let (a, b, _) = data.dim();
        if a != b {
            return Err(Error::ShapeMismatch(format!("CAT slices must be square, got {a}x{b}")));
        }
        Ok(Cat {
            data: data.as_standard_layout().into_owned(),
        })
    }

    pub fn k(&self) -> usize {
        self.data.dim().0
    }

    pub fn t(&self) -> usize {
        self.data.dim().2
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.k(), self.t())
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize, t: usize) -> f64 {
        self.data[[i, j, t]]
    }

    /// Sets entry `(i, j, t)` and its mirror `(j, i, t)`.
    pub fn set_pair(&mut self, i: usize, j: usize, t: usize, value: f64) {
        self.data[[i, j, t]] = value;
        self.data[[j, i, t]] = value;
    }

    /// Entrywise inner product `Σ A[i,j,t] B[i,j,t]`.
    pub fn inner(&self, other: &Cat) -> Result<f64> {
        check_same_shape(self, other)?;
        Ok(self.flat().dot(&other.flat()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.flat().dot(&self.flat()).sqrt()
    }

    /// Entries as a flat view in `(i, j, t)` order.
    pub fn flat(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(self.data.as_slice().expect("standard layout"))
    }

    pub fn scaled(&self, c: f64) -> Cat {
        Cat { data: &self.data * c }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// The tensor with every entry rounded to single precision, as stored on disk.
    pub fn to_f32_precision(&self) -> Cat {
        Cat {
            data: self.data.mapv(|v| f64::from(v as f32)),
        }
    }

    /// Checks symmetry, a zero diagonal, nonnegativity and the upper bound
    /// `max_value` on every entry.
    pub fn check_invariants(&self, max_value: f64) -> Result<()> {
        let (k, t) = self.shape();
        for i in 0..k {
            for s in 0..t {
                if self.get(i, i, s) != 0.0 {
                    return Err(Error::ShapeMismatch(format!("nonzero diagonal at ({i}, {i}, {s})")));
                }
            }
            for j in 0..k {
                for s in 0..t {
                    let v = self.get(i, j, s);
                    if !(0.0..=max_value).contains(&v) {
                        return Err(Error::ShapeMismatch(format!(
                            "entry {v} at ({i}, {j}, {s}) outside [0, {max_value}]"
                        )));
                    }
                    if v != self.get(j, i, s) {
                        return Err(Error::ShapeMismatch(format!("asymmetric entry at ({i}, {j}, {s})")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether every nonzero entry sits on an edge of `f`.
    pub fn respects_support(&self, f: &Graph) -> bool {
        self.data
            .indexed_iter()
            .all(|((i, j, _), &v)| v == 0.0 || (i != j && f.has_edge(i, j)))
    }
}

fn check_same_shape(a: &Cat, b: &Cat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "CAT shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Distance between two phases on the circle of circumference κ (discrete
/// models) or 2π (Kuramoto).
pub fn phase_distance(a: f64, b: f64, spec: &DynamicsSpec) -> f64 {
    let period = match spec.kind {
        DynamicsKind::Kuramoto => TAU,
        _ => f64::from(spec.kappa),
    };
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// CAT of `traj` on subgraph `f` over its first `t` configurations.
pub fn build_cat(f: &Graph, traj: &Trajectory, t: usize) -> Result<Cat> {
    if traj.len() < t {
        return Err(Error::SizeMismatch {
            expected: t,
            actual: traj.len(),
        });
    }
    let k = f.node_count();
    if let Some(bad) = traj.configs[..t].iter().find(|x| x.len() != k) {
        return Err(Error::SizeMismatch {
            expected: k,
            actual: bad.len(),
        });
    }
    let mut cat = Cat::zeros(k, t);
    for (u, v) in f.edges() {
        for (s, x) in traj.configs[..t].iter().enumerate() {
            cat.set_pair(u, v, s, phase_distance(x.value(u), x.value(v), &traj.spec));
        }
    }
    Ok(cat)
}

/// Entries in `(i, j, t)` lexicographic order.
pub fn vectorize(c: &Cat) -> Array1<f64> {
    c.flat().to_owned()
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: ArrayView1<f64>, k: usize, t: usize) -> Result<Cat> {
    if v.len() != k * k * t {
        return Err(Error::SizeMismatch {
            expected: k * k * t,
            actual: v.len(),
        });
    }
    let data = Array3::from_shape_vec((k, k, t), v.to_vec()).expect("length checked");
    Ok(Cat { data })
}

/// Vectorized tensors as the columns of a `k²T × R` matrix.
pub fn matricize(filters: &[Cat]) -> Result<Array2<f64>> {
    let Some(first) = filters.first() else {
        return Err(Error::Empty("no tensors to matricize".into()));
    };
    let mut m = Array2::zeros((first.data.len(), filters.len()));
    for (mut col, f) in m.axis_iter_mut(Axis(1)).zip(filters) {
        check_same_shape(first, f)?;
        col.iter_mut().zip(f.data.iter()).for_each(|(dst, &v)| *dst = v);
    }
    Ok(m)
}

/// Length of the compact coordinates of a k×k×T symmetric tensor.
pub fn compact_dim(k: usize, t: usize) -> usize {
    k * (k - 1) / 2 * t
}

/// Coordinates of a symmetric, zero-diagonal tensor in which each unordered
/// pair `i < j` appears once, scaled by √2, ordered by `(i, j, t)`.
///
/// The map is an isometry on such tensors: inner products and norms agree
/// with those of the full tensors.
pub fn compact(c: &Cat) -> Array1<f64> {
    let (k, t) = c.shape();
    let mut out = Vec::with_capacity(compact_dim(k, t));
    for i in 0..k {
        for j in i + 1..k {
            out.extend(c.data.slice(ndarray::s![i, j, ..]).iter().map(|v| v * SQRT_2));
        }
    }
    Array1::from(out)
}

/// Inverse of [`compact`].
pub fn expand_compact(v: ArrayView1<f64>, k: usize, t: usize) -> Result<Cat> {
    if v.len() != compact_dim(k, t) {
        return Err(Error::SizeMismatch {
            expected: compact_dim(k, t),
            actual: v.len(),
        });
    }
    let mut cat = Cat::zeros(k, t);
    let mut idx = 0;
    for i in 0..k {
        for j in i + 1..k {
            for s in 0..t {
                cat.set_pair(i, j, s, v[idx] / SQRT_2);
                idx += 1;
            }
        }
    }
    Ok(cat)
}

/// Compact coordinates of each tensor as the columns of a matrix.
pub fn compact_matrix(cats: &[Cat]) -> Result<Array2<f64>> {
    let Some(first) = cats.first() else {
        return Err(Error::Empty("no tensors".into()));
    };
    let (k, t) = first.shape();
    let mut m = Array2::zeros((compact_dim(k, t), cats.len()));
    for (mut col, c) in m.axis_iter_mut(Axis(1)).zip(cats) {
        check_same_shape(first, c)?;
        col.assign(&compact(c));
    }
    Ok(m)
}

/// How labels relate to the observed subgraph dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetMode {
    /// Dynamics run on each sampled subgraph; label is the subgraph's own
    /// synchronization.
    #[serde(rename = "run-on-subgraph")]
    RunOnSubgraph,
    /// Dynamics run on the parent graph and restricted to the subgraph; label
    /// is the parent's global synchronization.
    #[serde(rename = "restrict-parent")]
    RestrictParent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub dynamics: DynamicsKind,
    pub kappa: u32,
    pub k: usize,
    pub t_observed: usize,
    pub t_horizon: usize,
    pub count: usize,
    pub labels_positive: usize,
    pub seed: u64,
    pub mode: DatasetMode,
    pub parent: String,
}

/// Per-example bookkeeping kept alongside the tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleMeta {
    /// Index of the parent graph (always 0 for single-parent datasets).
    pub parent: usize,
    /// Parent node ids of the subgraph, in sampled path order.
    pub nodes: Vec<usize>,
    pub density: f64,
    pub initial_concentrated: bool,
    /// Whether some observed configuration is concentrated.
    pub observed_concentrated: bool,
}

#[derive(Serialize, Deserialize)]
struct MetaRow {
    index: usize,
    parent: usize,
    density: f64,
    initial_concentrated: u8,
    observed_concentrated: u8,
    nodes: String,
}

/// Labeled CATs of uniform shape plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub cats: Vec<Cat>,
    pub labels: Vec<u8>,
    /// One entry per example, or empty when unavailable.
    pub meta: Vec<ExampleMeta>,
}

impl Dataset {
    /// Assembles a dataset, filling `count` and `labels_positive` in the manifest.
    pub fn from_parts(mut manifest: Manifest, cats: Vec<Cat>, labels: Vec<u8>, meta: Vec<ExampleMeta>) -> Result<Self> {
        manifest.count = cats.len();
        manifest.labels_positive = labels.iter().filter(|&&y| y == 1).count();
        let ds = Dataset {
            manifest,
            cats,
            labels,
            meta,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        if self.cats.len() != m.count || self.labels.len() != m.count {
            return Err(Error::Format(format!(
                "manifest count {} but {} tensors and {} labels",
                m.count,
                self.cats.len(),
                self.labels.len()
            )));
        }
        if !self.meta.is_empty() && self.meta.len() != m.count {
            return Err(Error::Format(format!(
                "{} metadata rows for {} examples",
                self.meta.len(),
                m.count
            )));
        }
        if let Some(c) = self.cats.iter().find(|c| c.shape() != (m.k, m.t_observed)) {
            return Err(Error::ShapeMismatch(format!(
                "tensor of shape {:?} in dataset of shape ({}, {})",
                c.shape(),
                m.k,
                m.t_observed
            )));
        }
        if let Some(&y) = self.labels.iter().find(|&&y| y > 1) {
            return Err(Error::Format(format!("label {y} is not 0 or 1")));
        }
        if self.labels.iter().filter(|&&y| y == 1).count() != m.labels_positive {
            return Err(Error::Format("positive label count disagrees with manifest".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cats.is_empty()
    }

    /// Dynamics the data were generated with (default Kuramoto parameters).
    pub fn spec(&self) -> DynamicsSpec {
        DynamicsSpec {
            kappa: self.manifest.kappa,
            ..DynamicsSpec::default_for(self.manifest.dynamics)
        }
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.manifest.labels_positive;
        pos > 0 && pos < self.len()
    }

    /// Examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::NodeOutOfRange {
                node: bad,
                node_count: self.len(),
            });
        }
        Dataset::from_parts(
            self.manifest.clone(),
            indices.iter().map(|&i| self.cats[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            if self.meta.is_empty() {
                Vec::new()
            } else {
                indices.iter().map(|&i| self.meta[i].clone()).collect()
            },
        )
    }

    /// Compact coordinates of all tensors as columns (see [`compact`]).
    pub fn compact_matrix(&self) -> Result<Array2<f64>> {
        compact_matrix(&self.cats)
    }

    /// Writes `manifest.json`, `cats.f32`, `labels.u8` and, when metadata is
    /// present, `examples.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.validate()?;
        fs::create_dir_all(dir)?;
        let mut manifest = serde_json::to_string_pretty(&self.manifest)?;
        manifest.push('\n');
        fs::write(dir.join("manifest.json"), manifest)?;
        let mut w = BufWriter::new(File::create(dir.join("cats.f32"))?);
        for c in &self.cats {
            write_f32(&mut w, c.data.iter().copied())?;
        }
        w.flush()?;
        fs::write(dir.join("labels.u8"), &self.labels)?;
        let meta_path = dir.join("examples.csv");
        if self.meta.is_empty() {
            if meta_path.exists() {
                fs::remove_file(meta_path)?;
            }
        } else {
            let mut w = csv::Writer::from_path(meta_path)?;
            for (index, m) in self.meta.iter().enumerate() {
                w.serialize(MetaRow {
                    index,
                    parent: m.parent,
                    density: m.density,
                    initial_concentrated: m.initial_concentrated.into(),
                    observed_concentrated: m.observed_concentrated.into(),
                    nodes: m.nodes.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
                })?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset format version {}",
                manifest.format_version
            )));
        }
        let (k, t) = (manifest.k, manifest.t_observed);
        let per = k * k * t;
        let values = read_f32(&dir.join("cats.f32"), manifest.count * per)?;
        let cats = values
            .chunks_exact(per.max(1))
            .take(manifest.count)
            .map(|chunk| Cat {
                data: Array3::from_shape_vec((k, k, t), chunk.to_vec()).expect("chunk length"),
            })
            .collect();
        let labels = fs::read(dir.join("labels.u8"))?;
        let meta_path = dir.join("examples.csv");
        let meta = if meta_path.exists() {
            let mut r = csv::Reader::from_path(meta_path)?;
            r.deserialize::<MetaRow>()
                .map(|row| {
                    let row = row?;
                    let nodes = row
                        .nodes
                        .split_whitespace()
                        .map(|s| s.parse().map_err(|e| Error::Format(format!("bad node id {s:?}: {e}"))))
                        .collect::<Result<Vec<usize>>>()?;
                    Ok(ExampleMeta {
                        parent: row.parent,
                        nodes,
                        density: row.density,
                        initial_concentrated: row.initial_concentrated != 0,
                        observed_concentrated: row.observed_concentrated != 0,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let ds = Dataset {
            manifest,
            cats,
            labels,
            meta,
        };
        ds.validate()?;
        Ok(ds)
    }
}

pub(crate) fn write_f32(w: &mut impl Write, values: impl Iterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f32(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != expected * 4 {
        return Err(Error::Format(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            expected * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect())
}

/// Default `(T', T)`: horizon at which the label is read and number of
/// observed iterations, for subgraph-level data.
pub fn default_horizons(kind: DynamicsKind) -> (usize, usize) {
    match kind {
        DynamicsKind::Kuramoto => (200, 100),
        DynamicsKind::Fca => (100, 50),
        DynamicsKind::Ghm => (100, 8),
    }
}

/// Default `(T', T)` for global-level data.
pub fn default_global_horizons(kind: DynamicsKind) -> (usize, usize) {
    match kind {
        DynamicsKind::Kuramoto => (100, 50),
        DynamicsKind::Fca => (50, 25),
        DynamicsKind::Ghm => (50, 8),
    }
}

/// Parameters for [`gen_subgraph_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphDataParams {
    pub spec: DynamicsSpec,
    pub k: usize,
    pub count: usize,
    pub t_horizon: usize,
    pub t_observed: usize,
    pub seed: u64,
    /// Reject examples of the over-represented label until both reach half.
    pub balance: bool,
    /// Extra chain steps between consecutive sampled paths.
    pub thin: usize,
}

impl SubgraphDataParams {
    pub fn new(spec: DynamicsSpec, k: usize, count: usize, seed: u64) -> Self {
        let (t_horizon, t_observed) = default_horizons(spec.kind);
        SubgraphDataParams {
            spec,
            k,
            count,
            t_horizon,
            t_observed,
            seed,
            balance: false,
            thin: sampling::default_thin(k),
        }
    }
}

fn check_horizons(spec: &DynamicsSpec, k: usize, count: usize, t_horizon: usize, t_observed: usize) -> Result<()> {
    spec.validate()?;
    if k < 2 {
        return Err(Error::InvalidParams(format!("subgraph size {k} must be at least 2")));
    }
    if count == 0 {
        return Err(Error::InvalidParams("example count must be positive".into()));
    }
    if t_observed == 0 || t_observed >= t_horizon {
        return Err(Error::InvalidParams(format!(
            "need 0 < T < T', got T = {t_observed}, T' = {t_horizon}"
        )));
    }
    Ok(())
}

struct Example {
    cat: Cat,
    label: u8,
    meta: ExampleMeta,
}

fn observe(f: &Graph, traj: &Trajectory, t_observed: usize, parent: usize, nodes: &[usize]) -> Result<(Cat, ExampleMeta)> {
    let spec = &traj.spec;
    let cat = build_cat(f, traj, t_observed)?.to_f32_precision();
    let meta = ExampleMeta {
        parent,
        nodes: nodes.to_vec(),
        density: f.edge_density()?,
        initial_concentrated: dynamics::is_concentrated(&traj.configs[0], spec),
        observed_concentrated: traj.configs[..t_observed]
            .iter()
            .any(|x| dynamics::is_concentrated(x, spec)),
    };
    Ok((cat, meta))
}

fn subgraph_example(parent: &Graph, path: &[usize], p: &SubgraphDataParams, seed: u64) -> Result<Example> {
    let f = parent.induced_subgraph(path)?;
    let mut r = rng::seeded(seed);
    let x0 = dynamics::random_config(&p.spec, f.node_count(), &mut r);
    let traj = dynamics::simulate(&f, &x0, &p.spec, p.t_horizon)?;
    let label = dynamics::is_synchronized(traj.last().expect("nonempty"), &p.spec).into();
    let (cat, meta) = observe(&f, &traj, p.t_observed, 0, path)?;
    Ok(Example { cat, label, meta })
}

fn assemble(manifest: Manifest, examples: Vec<Example>) -> Result<Dataset> {
    let mut cats = Vec::with_capacity(examples.len());
    let mut labels = Vec::with_capacity(examples.len());
    let mut meta = Vec::with_capacity(examples.len());
    for e in examples {
        cats.push(e.cat);
        labels.push(e.label);
        meta.push(e.meta);
    }
    Dataset::from_parts(manifest, cats, labels, meta)
}

/// Subgraph-level data: k-paths sampled along one chain on `parent`, each
/// induced subgraph run from a uniform random configuration for `T'` steps,
/// labeled by synchronization at `T'` and encoded over the first `T`
/// configurations.
pub fn gen_subgraph_dataset(parent: &Graph, parent_desc: &str, p: &SubgraphDataParams) -> Result<Dataset> {
    check_horizons(&p.spec, p.k, p.count, p.t_horizon, p.t_observed)?;
    let init_master = rng::derive_stream(p.seed, "init");
    let mut chain = WalkChain::new(parent, p.k, rng::derive_stream(p.seed, "paths"))?;
    let budget = sampling::default_max_steps(p.k);
    let max_candidates = if p.balance { 50 * p.count } else { p.count };
    let positive_quota = p.count / 2;
    let negative_quota = p.count - positive_quota;
    let (mut positive, mut negative) = (0, 0);
    let mut examples = Vec::with_capacity(p.count);
    let mut next_index = 0;
    while examples.len() < p.count {
        if next_index >= max_candidates {
            return Err(Error::BalanceUnattainable {
                positive,
                negative,
                target: positive_quota,
                attempts: next_index,
            });
        }
        let batch = (p.count - examples.len()).min(max_candidates - next_index);
        let paths = (0..batch)
            .map(|_| chain.next_kpath_thinned(p.thin, budget))
            .collect::<Result<Vec<_>>>()?;
        let batch_examples = paths
            .par_iter()
            .enumerate()
            .map(|(i, path)| subgraph_example(parent, path, p, rng::derive_seed(init_master, (next_index + i) as u64)))
            .collect::<Result<Vec<_>>>()?;
        next_index += batch;
        for e in batch_examples {
            if p.balance {
                let (count, quota) = if e.label == 1 {
                    (&mut positive, positive_quota)
                } else {
                    (&mut negative, negative_quota)
                };
                if *count >= quota {
                    continue;
                }
                *count += 1;
            }
            examples.push(e);
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dynamics: p.spec.kind,
        kappa: p.spec.kappa,
        k: p.k,
        t_observed: p.t_observed,
        t_horizon: p.t_horizon,
        count: 0,
        labels_positive: 0,
        seed: p.seed,
        mode: DatasetMode::RunOnSubgraph,
        parent: parent_desc.to_string(),
    };
    assemble(manifest, examples)
}

/// Parameters for [`gen_global_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalDataParams {
    pub spec: DynamicsSpec,
    pub k: usize,
    pub paths_per_graph: usize,
    pub t_horizon: usize,
    pub t_observed: usize,
    pub seed: u64,
    /// Steer initial configurations so that half the parents synchronize.
    pub balance: bool,
    pub thin: usize,
    /// Initial configurations tried per parent when balancing.
    pub max_attempts: usize,
}

impl GlobalDataParams {
    pub fn new(spec: DynamicsSpec, k: usize, paths_per_graph: usize, seed: u64) -> Self {
        let (t_horizon, t_observed) = default_global_horizons(spec.kind);
        GlobalDataParams {
            spec,
            k,
            paths_per_graph,
            t_horizon,
            t_observed,
            seed,
            balance: false,
            thin: sampling::default_thin(k),
            max_attempts: 200,
        }
    }
}

/// Outcome of simulating one parent graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentRecord {
    pub parent: usize,
    pub label: u8,
    /// Initial configurations drawn before the accepted one (1 = first draw).
    pub attempts: usize,
    /// Fraction of the circle the accepted initial configuration was drawn from.
    pub arc_fraction: f64,
}

/// Shrink factor of the initial arc per attempt when steering toward synchronization.
const ARC_SHRINK: f64 = 0.85;

/// Whole-graph trajectory of `t_horizon` steps and its global label.
///
/// Without a target the initial configuration is uniform. With target 1,
/// attempt `a` draws phases from a random arc covering `0.85^a` of the
/// circle, which eventually forces synchronization; with target 0 every
/// attempt is uniform. Fails after `max_attempts` misses.
pub fn parent_trajectory(
    g: &Graph,
    spec: &DynamicsSpec,
    t_horizon: usize,
    target: Option<u8>,
    max_attempts: usize,
    seed: u64,
) -> Result<(Trajectory, ParentRecord)> {
    let mut r = rng::seeded(seed);
    let attempts = if target.is_some() { max_attempts.max(1) } else { 1 };
    let mut seen = [0usize; 2];
    for a in 0..attempts {
        let fraction = if target == Some(1) { ARC_SHRINK.powi(a as i32) } else { 1.0 };
        let x0 = dynamics::random_config_in_arc(spec, g.node_count(), fraction, &mut r);
        let traj = dynamics::simulate(g, &x0, spec, t_horizon)?;
        let label: u8 = dynamics::is_synchronized(traj.last().expect("nonempty"), spec).into();
        seen[usize::from(label)] += 1;
        if target.is_none_or(|y| y == label) {
            let record = ParentRecord {
                parent: 0,
                label,
                attempts: a + 1,
                arc_fraction: fraction,
            };
            return Ok((traj, record));
        }
    }
    Err(Error::BalanceUnattainable {
        positive: seen[1],
        negative: seen[0],
        target: 1,
        attempts,
    })
}

fn parent_examples(g: &Graph, index: usize, p: &GlobalDataParams, target: Option<u8>) -> Result<(Vec<Example>, ParentRecord)> {
    let seed = rng::derive_seed(p.seed, index as u64);
    let (traj, mut record) = parent_trajectory(
        g,
        &p.spec,
        p.t_horizon,
        target,
        p.max_attempts,
        rng::derive_stream(seed, "init"),
    )?;
    record.parent = index;
    let observed = traj.prefix(p.t_observed);
    let paths = sampling::sample_kpaths(g, p.k, p.paths_per_graph, p.thin, rng::derive_stream(seed, "paths"))?;
    let examples = paths
        .iter()
        .map(|path| {
            let f = g.induced_subgraph(path)?;
            let (cat, meta) = observe(&f, &observed.restrict(path), p.t_observed, index, path)?;
            Ok(Example {
                cat,
                label: record.label,
                meta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((examples, record))
}

/// Global-level data: one trajectory per parent, restricted to
/// `paths_per_graph` sampled k-paths; every example carries its parent's
/// global label. With `balance`, even-indexed parents are steered to
/// synchronize and odd-indexed ones not to.
pub fn gen_global_dataset(parents: &[Graph], parent_desc: &str, p: &GlobalDataParams) -> Result<(Dataset, Vec<ParentRecord>)> {
    check_horizons(&p.spec, p.k, parents.len() * p.paths_per_graph, p.t_horizon, p.t_observed)?;
    let per_parent = parents
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let target = p.balance.then_some(u8::from(i % 2 == 0));
            parent_examples(g, i, p, target)
        })
        .collect::<Vec<_>>();
    let mut examples = Vec::with_capacity(parents.len() * p.paths_per_graph);
    let mut records = Vec::with_capacity(parents.len());
    let mut failure = None;
    for (i, r) in per_parent.into_iter().enumerate() {
        match r {
            Ok((e, rec)) => {
                examples.extend(e);
                records.push(rec);
            }
            Err(Error::BalanceUnattainable { .. }) if p.balance => {
                failure.get_or_insert(i);
            }
            Err(e) => return Err(e),
        }
    }
    if failure.is_some() {
        let positive = records.iter().filter(|r| r.label == 1).count();
        return Err(Error::BalanceUnattainable {
            positive,
            negative: records.len() - positive,
            target: parents.len() / 2,
            attempts: p.max_attempts,
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dynamics: p.spec.kind,
        kappa: p.spec.kappa,
        k: p.k,
        t_observed: p.t_observed,
        t_horizon: p.t_horizon,
        count: 0,
        labels_positive: 0,
        seed: p.seed,
        mode: DatasetMode::RestrictParent,
        parent: parent_desc.to_string(),
    };
    Ok((assemble(manifest, examples)?, records))
}

/// Indices kept by [`distill`], in increasing order.
pub fn distill_indices(ds: &Dataset, dense_frac: f64, sparse_frac: f64) -> Result<Vec<usize>> {
    for f in [dense_frac, sparse_frac] {
        if !(f > 0.0 && f <= 0.5) {
            return Err(Error::InvalidParams(format!("distillation fraction {f} outside (0, 0.5]")));
        }
    }
    if ds.meta.len() != ds.len() {
        return Err(Error::InvalidParams("distillation needs per-example metadata".into()));
    }
    let n = ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ds.meta[a].density.total_cmp(&ds.meta[b].density).then(a.cmp(&b)));
    let sparse = ((sparse_frac * n as f64).ceil() as usize).min(n);
    let dense = ((dense_frac * n as f64).ceil() as usize).min(n);
    let mut keep = vec![false; n];
    for &i in order[..sparse].iter().chain(&order[n - dense..]) {
        keep[i] = true;
    }
    for (i, m) in ds.meta.iter().enumerate() {
        keep[i] |= m.initial_concentrated;
    }
    let kept: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    if kept.is_empty() {
        return Err(Error::Empty("distillation kept no examples".into()));
    }
    Ok(kept)
}

/// The sparsest and densest subgraphs plus every example with a concentrated
/// initial configuration. Ties in density are ordered by example index.
pub fn distill(ds: &Dataset, dense_frac: f64, sparse_frac: f64) -> Result<Dataset> {
    ds.subset(&distill_indices(ds, dense_frac, sparse_frac)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PhaseConfig;
    use crate::graph::{generate_nws, NwsParams};
    use proptest::prelude::*;
    use rand::Rng as _;

    fn disc(v: &[u32]) -> PhaseConfig {
        PhaseConfig::Discrete(v.to_vec())
    }

    fn random_cat(k: usize, t: usize, seed: u64) -> Cat {
        let mut r = rng::seeded(seed);
        let mut c = Cat::zeros(k, t);
        for i in 0..k {
            for j in i + 1..k {
                for s in 0..t {
                    c.set_pair(i, j, s, r.random::<f64>());
                }
            }
        }
        c
    }

    #[test]
    fn phase_distance_examples() {
        let fca = DynamicsSpec::fca(5);
        assert_eq!(phase_distance(1.0, 4.0, &fca), 2.0);
        assert_eq!(phase_distance(3.0, 3.0, &fca), 0.0);
        let kur = DynamicsSpec::kuramoto();
        assert!((phase_distance(0.1, TAU - 0.1, &kur) - 0.2).abs() < 1e-12);
        assert_eq!(phase_distance(2.5, 2.5, &kur), 0.0);
    }

    #[test]
    fn build_cat_single_edge() {
        let spec = DynamicsSpec::fca(5);
        let f = Graph::path(2);
        let traj = Trajectory {
            spec,
            configs: vec![disc(&[1, 4]), disc(&[2, 0])],
        };
        let c = build_cat(&f, &traj, 2).unwrap();
        assert_eq!(c.get(0, 1, 0), 2.0);
        assert_eq!(c.get(0, 1, 1), 2.0);
        assert_eq!(c.get(1, 0, 1), 2.0);
        for s in 0..2 {
            assert_eq!(c.get(0, 0, s), 0.0);
            assert_eq!(c.get(1, 1, s), 0.0);
        }
        assert!(build_cat(&f, &traj, 3).is_err());
        assert!(build_cat(&Graph::path(3), &traj, 2).is_err());
    }

    #[test]
    fn synchronized_and_edgeless_cats_vanish() {
        let spec = DynamicsSpec::ghm(6);
        let traj = dynamics::simulate(&Graph::cycle(5), &disc(&[3; 5]), &spec, 10).unwrap();
        assert!(build_cat(&Graph::cycle(5), &traj, 10).unwrap().is_zero());
        let spread = dynamics::simulate(&Graph::empty(5), &disc(&[0, 1, 2, 3, 4]), &spec, 4).unwrap();
        assert!(build_cat(&Graph::empty(5), &spread, 4).unwrap().is_zero());
    }

    #[test]
    fn vectorize_examples() {
        let mut c = Cat::zeros(1, 1);
        c.data[[0, 0, 0]] = 3.5;
        assert_eq!(vectorize(&c).to_vec(), vec![3.5]);
        let c = random_cat(3, 2, 9);
        let v = vectorize(&c);
        assert_eq!(devectorize(v.view(), 3, 2).unwrap(), c);
        assert!(devectorize(v.view(), 3, 3).is_err());
        // (i, j, t) lexicographic order
        assert_eq!(v[1 * 3 * 2 + 2 * 2 + 1], c.get(1, 2, 1));
    }

    #[test]
    fn vectorized_inner_product_matches_double_loop() {
        let (a, b) = (random_cat(3, 2, 1), random_cat(3, 2, 2));
        let mut direct = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for t in 0..2 {
                    direct += a.get(i, j, t) * b.get(i, j, t);
                }
            }
        }
        assert!((vectorize(&a).dot(&vectorize(&b)) - direct).abs() < 1e-14);
        assert!((a.inner(&b).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn matricize_stacks_columns() {
        let cats = vec![random_cat(3, 2, 1), random_cat(3, 2, 2)];
        let m = matricize(&cats).unwrap();
        assert_eq!(m.dim(), (18, 2));
        assert_eq!(m.column(1).to_owned(), vectorize(&cats[1]));
        assert!(matricize(&[random_cat(3, 2, 1), random_cat(2, 2, 1)]).is_err());
        assert!(matricize(&[]).is_err());
    }

    #[test]
    fn restriction_commutes_with_encoding() {
        let spec = DynamicsSpec::kuramoto();
        let parent = Graph::gnp(5, 0.7, 3).unwrap();
        let mut r = rng::seeded(4);
        let x0 = dynamics::random_config(&spec, 5, &mut r);
        let traj = dynamics::simulate(&parent, &x0, &spec, 6).unwrap();
        // pairwise circular distances on the whole parent
        let full: Vec<Vec<Vec<f64>>> = traj
            .configs
            .iter()
            .map(|x| {
                (0..5)
                    .map(|u| {
                        (0..5)
                            .map(|v| {
                                let d = (x.value(u) - x.value(v)).abs();
                                d.min(TAU - d)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        for nodes in [vec![0, 1, 2], vec![4, 2, 0, 3], vec![3, 1]] {
            let f = parent.induced_subgraph(&nodes).unwrap();
            let c = build_cat(&f, &traj.restrict(&nodes), 7).unwrap();
            for (i, &u) in nodes.iter().enumerate() {
                for (j, &v) in nodes.iter().enumerate() {
                    for (t, d) in full.iter().enumerate() {
                        let expected = if parent.has_edge(u, v) { d[u][v] } else { 0.0 };
                        assert!((c.get(i, j, t) - expected).abs() < 1e-12);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn compact_is_an_isometry(seed in any::<u64>(), k in 2usize..6, t in 1usize..4) {
            let (a, b) = (random_cat(k, t, seed), random_cat(k, t, seed ^ 1));
            let (ca, cb) = (compact(&a), compact(&b));
            prop_assert_eq!(ca.len(), compact_dim(k, t));
            prop_assert!((ca.dot(&cb) - a.inner(&b).unwrap()).abs() < 1e-12);
            prop_assert!((ca.dot(&ca).sqrt() - a.frobenius_norm()).abs() < 1e-12);
            let back = expand_compact(ca.view(), k, t).unwrap();
            for (x, y) in back.data().iter().zip(a.data()) {
                prop_assert!((x - y).abs() < 1e-15);
            }
        }

        #[test]
        fn vectorize_preserves_inner_products(seed in any::<u64>()) {
            let (a, b) = (random_cat(4, 3, seed), random_cat(4, 3, seed.wrapping_add(7)));
            prop_assert_eq!(vectorize(&a).dot(&vectorize(&b)), a.inner(&b).unwrap());
        }
    }

    fn nws(n: usize, seed: u64) -> Graph {
        generate_nws(&NwsParams {
            n,
            neighbors: 4,
            shortcut_p: 0.3,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn generated_cats_satisfy_invariants() {
        let parent = nws(40, 1);
        for spec in [DynamicsSpec::kuramoto(), DynamicsSpec::fca(5), DynamicsSpec::ghm(6)] {
            let mut p = SubgraphDataParams::new(spec, 6, 10, 3);
            p.t_horizon = 30;
            p.t_observed = 10;
            let ds = gen_subgraph_dataset(&parent, "nws", &p).unwrap();
            assert_eq!(ds.len(), 10);
            assert_eq!(ds.manifest.count, 10);
            assert_eq!(ds.manifest.mode, DatasetMode::RunOnSubgraph);
            for (c, m) in ds.cats.iter().zip(&ds.meta) {
                c.check_invariants(spec.max_phase_distance() + 1e-6).unwrap();
                let f = parent.induced_subgraph(&m.nodes).unwrap();
                assert!(c.respects_support(&f));
                assert!(f.is_connected());
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_round_trips() {
        let parent = nws(40, 2);
        let p = SubgraphDataParams::new(DynamicsSpec::kuramoto(), 5, 8, 11);
        let a = gen_subgraph_dataset(&parent, "nws", &p).unwrap();
        let b = gen_subgraph_dataset(&parent, "nws", &p).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path().join("a")).unwrap();
        b.save(dir.path().join("b")).unwrap();
        for file in ["manifest.json", "cats.f32", "labels.u8", "examples.csv"] {
            let x = fs::read(dir.path().join("a").join(file)).unwrap();
            let y = fs::read(dir.path().join("b").join(file)).unwrap();
            assert_eq!(x, y, "{file}");
        }
        let loaded = Dataset::load(dir.path().join("a")).unwrap();
        assert_eq!(loaded, a);
        let size = fs::metadata(dir.path().join("a/cats.f32")).unwrap().len();
        assert_eq!(size as usize, 8 * 5 * 5 * 100 * 4);
    }

    #[test]
    fn invalid_generation_parameters() {
        let parent = nws(30, 3);
        let mut p = SubgraphDataParams::new(DynamicsSpec::fca(5), 5, 0, 1);
        assert!(gen_subgraph_dataset(&parent, "", &p).is_err());
        p.count = 3;
        p.t_observed = p.t_horizon;
        assert!(gen_subgraph_dataset(&parent, "", &p).is_err());
        let split = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let p = SubgraphDataParams::new(DynamicsSpec::fca(5), 2, 3, 1);
        assert!(matches!(gen_subgraph_dataset(&split, "", &p), Err(Error::Disconnected)));
    }

    #[test]
    fn balanced_subgraph_data() {
        let parent = nws(60, 4);
        let mut p = SubgraphDataParams::new(DynamicsSpec::fca(5), 6, 20, 5);
        p.balance = true;
        let ds = gen_subgraph_dataset(&parent, "nws", &p).unwrap();
        assert_eq!(ds.manifest.labels_positive, 10);
    }

    #[test]
    fn global_dataset_bookkeeping() {
        let parents: Vec<Graph> = (0..4).map(|i| nws(50, 10 + i)).collect();
        let mut p = GlobalDataParams::new(DynamicsSpec::fca(5), 5, 6, 8);
        p.balance = true;
        let (ds, records) = gen_global_dataset(&parents, "nws x4", &p).unwrap();
        assert_eq!(ds.len(), 24);
        assert_eq!(ds.manifest.mode, DatasetMode::RestrictParent);
        assert_eq!(records.iter().filter(|r| r.label == 1).count(), 2);
        for (i, m) in ds.meta.iter().enumerate() {
            assert_eq!(ds.labels[i], records[m.parent].label);
            let f = parents[m.parent].induced_subgraph(&m.nodes).unwrap();
            assert!(ds.cats[i].respects_support(&f));
        }
        let again = gen_global_dataset(&parents, "nws x4", &p).unwrap();
        assert_eq!(again.0, ds);
    }

    fn meta_dataset(density: &[f64], concentrated: &[bool]) -> Dataset {
        let n = density.len();
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            dynamics: DynamicsKind::Fca,
            kappa: 5,
            k: 2,
            t_observed: 1,
            t_horizon: 2,
            count: n,
            labels_positive: 0,
            seed: 0,
            mode: DatasetMode::RunOnSubgraph,
            parent: String::new(),
        };
        let meta = density
            .iter()
            .zip(concentrated)
            .map(|(&density, &c)| ExampleMeta {
                parent: 0,
                nodes: vec![0, 1],
                density,
                initial_concentrated: c,
                observed_concentrated: c,
            })
            .collect();
        Dataset::from_parts(manifest, vec![Cat::zeros(2, 1); n], vec![0; n], meta).unwrap()
    }

    #[test]
    fn distill_uniform_density_keeps_both_tails() {
        let ds = meta_dataset(&[0.5; 25], &[false; 25]);
        // ⌈2.5⌉ sparsest by index from the front, ⌈2.5⌉ densest from the back
        assert_eq!(distill_indices(&ds, 0.1, 0.1).unwrap(), vec![0, 1, 2, 22, 23, 24]);
    }

    #[test]
    fn distill_examples() {
        let ds = meta_dataset(&[0.3; 7], &[true; 7]);
        assert_eq!(distill(&ds, 0.1, 0.1).unwrap().len(), 7);

        let mut r = rng::seeded(1);
        let density: Vec<f64> = (0..100).map(|_| r.random()).collect();
        let conc: Vec<bool> = (0..100).map(|_| r.random_bool(0.1)).collect();
        let ds = meta_dataset(&density, &conc);
        let kept = distill_indices(&ds, 0.1, 0.1).unwrap();
        assert!(kept.len() >= 20);
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
        let mut sorted = density.clone();
        sorted.sort_by(f64::total_cmp);
        for i in 0..100 {
            let in_tail = density[i] <= sorted[9] || density[i] >= sorted[90];
            assert_eq!(kept.contains(&i), in_tail || conc[i]);
        }
        assert!(distill(&ds, 0.0, 0.1).is_err());
        assert!(distill(&ds, 0.6, 0.1).is_err());
    }
}
