//! Coupled oscillator models: discretized Kuramoto, the firefly cellular
//! automaton (FCA) and the Greenberg–Hastings model (GHM).
//!
//! All three update every node synchronously from the previous configuration.
//! Kuramoto phases live in `[0, 2π)`; FCA and GHM states live in `0..kappa`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsKind {
    Kuramoto,
    Fca,
    Ghm,
}

impl DynamicsKind {
    pub fn name(self) -> &'static str {
        match self {
            DynamicsKind::Kuramoto => "kuramoto",
            DynamicsKind::Fca => "fca",
            DynamicsKind::Ghm => "ghm",
        }
    }

    pub fn is_discrete(self) -> bool {
        !matches!(self, DynamicsKind::Kuramoto)
    }
}

impl fmt::Display for DynamicsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DynamicsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kuramoto" => Ok(DynamicsKind::Kuramoto),
            "fca" => Ok(DynamicsKind::Fca),
            "ghm" => Ok(DynamicsKind::Ghm),
            other => Err(Error::InvalidParams(format!("unknown dynamics {other:?}"))),
        }
    }
}

/// Model choice and its parameters.
///
/// `kappa` is the size of the discrete phase space (FCA, GHM). `coupling`,
/// `step_size` and `sync_tol` only matter for Kuramoto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSpec {
    pub kind: DynamicsKind,
    pub kappa: u32,
    pub coupling: f64,
    pub step_size: f64,
    /// A Kuramoto configuration counts as synchronized when its circular
    /// diameter is below this many radians.
    pub sync_tol: f64,
}

impl DynamicsSpec {
    pub const DEFAULT_COUPLING: f64 = 1.0;
    pub const DEFAULT_STEP: f64 = 0.05;
    pub const DEFAULT_SYNC_TOL: f64 = 1e-2;

    pub fn kuramoto() -> Self {
        DynamicsSpec {
            kind: DynamicsKind::Kuramoto,
            kappa: 0,
            coupling: Self::DEFAULT_COUPLING,
            step_size: Self::DEFAULT_STEP,
            sync_tol: Self::DEFAULT_SYNC_TOL,
        }
    }

    pub fn fca(kappa: u32) -> Self {
        DynamicsSpec {
            kind: DynamicsKind::Fca,
            kappa,
            ..Self::kuramoto()
        }
    }

    pub fn ghm(kappa: u32) -> Self {
        DynamicsSpec {
            kind: DynamicsKind::Ghm,
            kappa,
            ..Self::kuramoto()
        }
    }

    /// Defaults: Kuramoto with K = 1 and h = 0.05, FCA with 5 colors, GHM with 6.
    pub fn default_for(kind: DynamicsKind) -> Self {
        match kind {
            DynamicsKind::Kuramoto => Self::kuramoto(),
            DynamicsKind::Fca => Self::fca(5),
            DynamicsKind::Ghm => Self::ghm(6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DynamicsKind::Kuramoto => {
                if !(self.step_size > 0.0 && self.step_size.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "step size {} must be positive",
                        self.step_size
                    )));
                }
                if !(self.sync_tol > 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "sync tolerance {} must be positive",
                        self.sync_tol
                    )));
                }
                if !self.coupling.is_finite() {
                    return Err(Error::InvalidParams("coupling must be finite".into()));
                }
            }
            DynamicsKind::Fca if self.kappa < 3 => {
                return Err(Error::InvalidParams(format!(
                    "FCA needs kappa >= 3, got {}",
                    self.kappa
                )))
            }
            DynamicsKind::Ghm if self.kappa < 2 => {
                return Err(Error::InvalidParams(format!(
                    "GHM needs kappa >= 2, got {}",
                    self.kappa
                )))
            }
            _ => {}
        }
        Ok(())
    }

    /// FCA blinking color `⌊(κ − 1) / 2⌋`.
    pub fn blinking_color(&self) -> u32 {
        (self.kappa - 1) / 2
    }

    /// Largest possible distance between two phases.
    pub fn max_phase_distance(&self) -> f64 {
        match self.kind {
            DynamicsKind::Kuramoto => PI,
            _ => f64::from(self.kappa / 2),
        }
    }
}

/// Phase of every node of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PhaseConfig {
    /// Kuramoto phases in `[0, 2π)`.
    Continuous(Vec<f64>),
    /// FCA/GHM states in `0..kappa`.
    Discrete(Vec<u32>),
}

impl PhaseConfig {
    pub fn len(&self) -> usize {
        match self {
            PhaseConfig::Continuous(v) => v.len(),
            PhaseConfig::Discrete(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Phase of node `v` as a real number (discrete states map to integers).
    pub fn value(&self, v: usize) -> f64 {
        match self {
            PhaseConfig::Continuous(x) => x[v],
            PhaseConfig::Discrete(x) => f64::from(x[v]),
        }
    }

    /// Configuration on `nodes`, in the given order.
    pub fn restrict(&self, nodes: &[usize]) -> PhaseConfig {
        match self {
            PhaseConfig::Continuous(x) => PhaseConfig::Continuous(nodes.iter().map(|&v| x[v]).collect()),
            PhaseConfig::Discrete(x) => PhaseConfig::Discrete(nodes.iter().map(|&v| x[v]).collect()),
        }
    }

    /// Checks the representation and value range against `spec`.
    pub fn validate(&self, spec: &DynamicsSpec) -> Result<()> {
        match (self, spec.kind) {
            (PhaseConfig::Continuous(x), DynamicsKind::Kuramoto) => {
                if x.iter().any(|p| !p.is_finite()) {
                    return Err(Error::NonFinite("Kuramoto phases"));
                }
                Ok(())
            }
            (PhaseConfig::Discrete(x), DynamicsKind::Fca | DynamicsKind::Ghm) => {
                match x.iter().find(|&&s| s >= spec.kappa) {
                    Some(&state) => Err(Error::StateOutOfRange {
                        state,
                        kappa: spec.kappa,
                    }),
                    None => Ok(()),
                }
            }
            (PhaseConfig::Continuous(_), _) => Err(Error::PhaseKind("discrete phases expected")),
            (PhaseConfig::Discrete(_), _) => Err(Error::PhaseKind("continuous phases expected")),
        }
    }

    fn check_graph(&self, g: &Graph) -> Result<()> {
        if self.len() != g.node_count() {
            return Err(Error::SizeMismatch {
                expected: g.node_count(),
                actual: self.len(),
            });
        }
        Ok(())
    }
}

/// Time series `configs[t] = X_t` produced by repeatedly stepping a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: DynamicsSpec,
    pub configs: Vec<PhaseConfig>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn last(&self) -> Option<&PhaseConfig> {
        self.configs.last()
    }

    /// The same trajectory seen only on `nodes` (in the given order).
    pub fn restrict(&self, nodes: &[usize]) -> Trajectory {
        Trajectory {
            spec: self.spec,
            configs: self.configs.iter().map(|x| x.restrict(nodes)).collect(),
        }
    }

    /// First `len` configurations.
    pub fn prefix(&self, len: usize) -> Trajectory {
        Trajectory {
            spec: self.spec,
            configs: self.configs[..len.min(self.configs.len())].to_vec(),
        }
    }
}

/// Reduces a real phase into `[0, 2π)`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// One explicit Euler step `X'(v) = X(v) + h Σ_{u ~ v} K sin(X(u) − X(v))`.
pub fn step_kuramoto(g: &Graph, x: &PhaseConfig, spec: &DynamicsSpec) -> Result<PhaseConfig> {
    x.check_graph(g)?;
    let PhaseConfig::Continuous(phases) = x else {
        return Err(Error::PhaseKind("continuous phases expected"));
    };
    if spec.kind != DynamicsKind::Kuramoto {
        return Err(Error::PhaseKind("Kuramoto stepper called with discrete dynamics"));
    }
    let next = kuramoto_increments(g, phases, spec)
        .into_iter()
        .zip(phases)
        .map(|(dx, &p)| wrap_phase(p + dx))
        .collect();
    Ok(PhaseConfig::Continuous(next))
}

/// Unreduced Kuramoto increments `h Σ K sin(X(u) − X(v))`.
pub fn kuramoto_increments(g: &Graph, phases: &[f64], spec: &DynamicsSpec) -> Vec<f64> {
    (0..g.node_count())
        .map(|v| {
            let pv = phases[v];
            let force: f64 = g.neighbors(v).iter().map(|&u| (phases[u] - pv).sin()).sum();
            spec.step_size * spec.coupling * force
        })
        .collect()
}

fn discrete_states<'a>(g: &Graph, x: &'a PhaseConfig, spec: &DynamicsSpec) -> Result<&'a [u32]> {
    x.check_graph(g)?;
    x.validate(spec)?;
    match x {
        PhaseConfig::Discrete(s) => Ok(s),
        PhaseConfig::Continuous(_) => Err(Error::PhaseKind("discrete phases expected")),
    }
}

/// One FCA update: a node past the blinking color holds when some neighbor
/// blinks; every other node advances by one color (mod κ).
pub fn step_fca(g: &Graph, x: &PhaseConfig, spec: &DynamicsSpec) -> Result<PhaseConfig> {
    if spec.kind != DynamicsKind::Fca {
        return Err(Error::PhaseKind("FCA stepper called with other dynamics"));
    }
    let states = discrete_states(g, x, spec)?;
    let b = spec.blinking_color();
    let kappa = spec.kappa;
    let next = (0..g.node_count())
        .map(|v| {
            let s = states[v];
            let held = s > b && g.neighbors(v).iter().any(|&u| states[u] == b);
            if held {
                s
            } else {
                (s + 1) % kappa
            }
        })
        .collect();
    Ok(PhaseConfig::Discrete(next))
}

/// One GHM update: resting nodes (0) fire when a neighbor is excited (1),
/// otherwise stay at rest; all other states advance by one (mod κ).
pub fn step_ghm(g: &Graph, x: &PhaseConfig, spec: &DynamicsSpec) -> Result<PhaseConfig> {
    if spec.kind != DynamicsKind::Ghm {
        return Err(Error::PhaseKind("GHM stepper called with other dynamics"));
    }
    let states = discrete_states(g, x, spec)?;
    let kappa = spec.kappa;
    let next = (0..g.node_count())
        .map(|v| match states[v] {
            0 if g.neighbors(v).iter().any(|&u| states[u] == 1) => 1,
            0 => 0,
            s => (s + 1) % kappa,
        })
        .collect();
    Ok(PhaseConfig::Discrete(next))
}

pub fn step(g: &Graph, x: &PhaseConfig, spec: &DynamicsSpec) -> Result<PhaseConfig> {
    match spec.kind {
        DynamicsKind::Kuramoto => step_kuramoto(g, x, spec),
        DynamicsKind::Fca => step_fca(g, x, spec),
        DynamicsKind::Ghm => step_ghm(g, x, spec),
    }
}

/// Trajectory of `steps + 1` configurations starting at `x0`.
pub fn simulate(g: &Graph, x0: &PhaseConfig, spec: &DynamicsSpec, steps: usize) -> Result<Trajectory> {
    spec.validate()?;
    x0.check_graph(g)?;
    x0.validate(spec)?;
    let mut configs = Vec::with_capacity(steps + 1);
    configs.push(x0.clone());
    for _ in 0..steps {
        let next = step(g, configs.last().expect("nonempty"), spec)?;
        configs.push(next);
    }
    Ok(Trajectory { spec: *spec, configs })
}

/// Length of the shortest arc of the circle containing every phase:
/// `2π` minus the largest gap between circularly consecutive phases.
pub fn circular_diameter(phases: &[f64]) -> f64 {
    if phases.len() <= 1 {
        return 0.0;
    }
    let mut sorted: Vec<f64> = phases.iter().map(|&p| wrap_phase(p)).collect();
    sorted.sort_by(f64::total_cmp);
    let wrap_gap = sorted[0] + TAU - sorted[sorted.len() - 1];
    let max_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(wrap_gap, f64::max);
    (TAU - max_gap).max(0.0)
}

/// Size of the smallest window of consecutive states (mod κ) holding every
/// occupied state. A single occupied state gives 1.
pub fn discrete_window(states: &[u32], kappa: u32) -> u32 {
    let mut occupied: Vec<u32> = states.to_vec();
    occupied.sort_unstable();
    occupied.dedup();
    match occupied.len() {
        0 => 0,
        1 => 1,
        m => {
            let wrap_gap = occupied[0] + kappa - occupied[m - 1];
            let max_gap = occupied.windows(2).map(|w| w[1] - w[0]).fold(wrap_gap, u32::max);
            kappa - max_gap + 1
        }
    }
}

/// Whether every node shares one phase. Kuramoto configurations count when
/// their circular diameter is below `spec.sync_tol`.
pub fn is_synchronized(x: &PhaseConfig, spec: &DynamicsSpec) -> bool {
    match x {
        PhaseConfig::Continuous(p) => circular_diameter(p) < spec.sync_tol,
        PhaseConfig::Discrete(s) => s.windows(2).all(|w| w[0] == w[1]),
    }
}

/// Whether all phases fit in an open half-circle.
///
/// Kuramoto: covering arc shorter than π. FCA: occupied states fit in fewer
/// than κ/2 consecutive colors. GHM: concentrated means synchronized.
pub fn is_concentrated(x: &PhaseConfig, spec: &DynamicsSpec) -> bool {
    match (x, spec.kind) {
        (PhaseConfig::Discrete(_), DynamicsKind::Ghm) => is_synchronized(x, spec),
        (PhaseConfig::Discrete(s), _) => 2 * discrete_window(s, spec.kappa) < spec.kappa,
        (PhaseConfig::Continuous(p), _) => circular_diameter(p) < PI,
    }
}

/// Independent uniform phases for `n` nodes.
pub fn random_config<R: rand::Rng + ?Sized>(spec: &DynamicsSpec, n: usize, rng: &mut R) -> PhaseConfig {
    match spec.kind {
        DynamicsKind::Kuramoto => {
            PhaseConfig::Continuous((0..n).map(|_| rng.random::<f64>() * TAU).collect())
        }
        _ => PhaseConfig::Discrete((0..n).map(|_| rng.random_range(0..spec.kappa)).collect()),
    }
}

/// Independent phases drawn uniformly from a random arc covering `fraction`
/// of the circle (for discrete models, `max(1, ⌈fraction·κ⌉)` consecutive
/// states). `fraction = 1` is [`random_config`]'s distribution.
pub fn random_config_in_arc<R: rand::Rng + ?Sized>(
    spec: &DynamicsSpec,
    n: usize,
    fraction: f64,
    rng: &mut R,
) -> PhaseConfig {
    let fraction = fraction.clamp(0.0, 1.0);
    match spec.kind {
        DynamicsKind::Kuramoto => {
            let start = rng.random::<f64>() * TAU;
            let width = fraction * TAU;
            PhaseConfig::Continuous(
                (0..n)
                    .map(|_| wrap_phase(start + rng.random::<f64>() * width))
                    .collect(),
            )
        }
        _ => {
            let kappa = spec.kappa;
            let width = ((fraction * f64::from(kappa)).ceil() as u32).clamp(1, kappa);
            let start = rng.random_range(0..kappa);
            PhaseConfig::Discrete(
                (0..n)
                    .map(|_| (start + rng.random_range(0..width)) % kappa)
                    .collect(),
            )
        }
    }
}
