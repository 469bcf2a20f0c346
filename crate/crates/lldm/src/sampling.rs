//! MCMC sampling of k-paths.
//!
//! A [`WalkChain`] is a Markov chain on k-walks (node sequences whose
//! consecutive entries are adjacent) whose stationary law is uniform over all
//! k-walks of the graph. Keeping only the walks with distinct nodes
//! (rejection) then yields approximately uniform k-paths, and the sampled
//! path fixes a node ordering of the induced k-node subgraph.
//!
//! Two reversible moves are mixed, each applied lazily:
//!
//! * the single-site heat-bath (Glauber) move resamples one position
//!   uniformly from the common neighbors of its flanking positions;
//! * the crawl move shifts the whole walk one hop forward or backward along
//!   the graph, with a Metropolis correction for unequal degrees.
//!
//! Single-site moves alone preserve the bipartition class of every position,
//! so on bipartite graphs (paths, even cycles, stars) they cannot reach every
//! walk. The crawl move restores irreducibility on every connected graph.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{self, Rng};

/// Walks enumerated by [`brute_force_kpaths`] are limited to graphs this small.
pub const BRUTE_FORCE_NODE_LIMIT: usize = 12;

/// Default budget per returned path: `10^4 · k` steps, or inspections when
/// thinned.
pub fn default_max_steps(k: usize) -> usize {
    10_000 * k
}

/// Markov chain state: the current k-walk plus its generator.
#[derive(Debug, Clone)]
pub struct WalkChain<'g> {
    graph: &'g Graph,
    walk: Vec<usize>,
    rng: Rng,
    steps_taken: usize,
    scratch: Vec<usize>,
}

impl<'g> WalkChain<'g> {
    /// Chain seeded from `seed`; see [`init_kwalk`].
    pub fn new(graph: &'g Graph, k: usize, seed: u64) -> Result<Self> {
        init_kwalk(graph, k, rng::seeded(seed))
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn k(&self) -> usize {
        self.walk.len()
    }

    pub fn walk(&self) -> &[usize] {
        &self.walk
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Lazy Glauber update: with probability 1/2 nothing happens, otherwise a
    /// uniformly chosen position is resampled from its valid set.
    pub fn glauber_step(&mut self) {
        self.steps_taken += 1;
        if self.rng.random_bool(0.5) {
            return;
        }
        self.resample_site();
    }

    /// One step of the mixed chain: lazy, then a single-site move or a crawl
    /// move with equal probability.
    pub fn step(&mut self) {
        self.steps_taken += 1;
        if self.rng.random_bool(0.5) {
            return;
        }
        if self.rng.random_bool(0.5) {
            self.resample_site();
        } else {
            self.crawl();
        }
    }

    fn resample_site(&mut self) {
        let k = self.walk.len();
        let j = self.rng.random_range(0..k);
        valid_site_values(self.graph, &self.walk, j, &mut self.scratch);
        // The current value is always valid, so the set is never empty.
        let pick = self.rng.random_range(0..self.scratch.len());
        self.walk[j] = self.scratch[pick];
    }

    fn crawl(&mut self) {
        let g = self.graph;
        let k = self.walk.len();
        let (first, last) = (self.walk[0], self.walk[k - 1]);
        if self.rng.random_bool(0.5) {
            // forward: drop the first node, append a neighbor of the last
            let nbrs = g.neighbors(last);
            let y = nbrs[self.rng.random_range(0..nbrs.len())];
            let ratio = g.degree(last) as f64 / g.degree(self.walk[1]) as f64;
            if ratio >= 1.0 || self.rng.random_bool(ratio) {
                self.walk.remove(0);
                self.walk.push(y);
            }
        } else {
            let nbrs = g.neighbors(first);
            let z = nbrs[self.rng.random_range(0..nbrs.len())];
            let ratio = g.degree(first) as f64 / g.degree(self.walk[k - 2]) as f64;
            if ratio >= 1.0 || self.rng.random_bool(ratio) {
                self.walk.pop();
                self.walk.insert(0, z);
            }
        }
    }

    /// Runs `steps` steps of [`WalkChain::step`].
    pub fn advance(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Advances the chain at least once and until the walk has distinct
    /// nodes, then returns that k-path. The chain keeps its state, so
    /// successive calls give a dependent sequence of paths.
    pub fn next_kpath(&mut self, max_steps: usize) -> Result<Vec<usize>> {
        self.next_kpath_thinned(1, max_steps)
    }

    /// Inspects the walk every `thin` steps (at least one) and returns the
    /// first inspected walk with distinct nodes, giving up after
    /// `max_checks` inspections.
    ///
    /// The inspection times form a fixed grid, so the accepted walks are the
    /// k-paths among grid samples of the chain and their long-run law is
    /// uniform. Skipping ahead and then taking the first path seen is biased.
    pub fn next_kpath_thinned(&mut self, thin: usize, max_checks: usize) -> Result<Vec<usize>> {
        let thin = thin.max(1);
        for _ in 0..max_checks.max(1) {
            self.advance(thin);
            if all_distinct(&self.walk, &mut self.scratch) {
                return Ok(self.walk.clone());
            }
        }
        Err(Error::MaxStepsExhausted {
            steps: max_checks.max(1) * thin,
        })
    }
}

/// Default number of extra chain steps between consecutive returned paths
/// in [`sample_kpaths`].
pub fn default_thin(k: usize) -> usize {
    10 * k
}

/// `count` k-paths along one chain seeded by `seed`, inspected every
/// `thin` steps (see [`WalkChain::next_kpath_thinned`]).
pub fn sample_kpaths(graph: &Graph, k: usize, count: usize, thin: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut chain = WalkChain::new(graph, k, seed)?;
    let budget = default_max_steps(k);
    (0..count).map(|_| chain.next_kpath_thinned(thin, budget)).collect()
}

/// Starts a chain at a simple random walk of `k` nodes from a uniformly
/// chosen start node.
pub fn init_kwalk(graph: &Graph, k: usize, mut rng: Rng) -> Result<WalkChain<'_>> {
    if k < 2 {
        return Err(Error::InvalidParams(format!("walk length {k} must be at least 2")));
    }
    if graph.edge_count() == 0 {
        return Err(Error::Edgeless);
    }
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let mut walk = Vec::with_capacity(k);
    walk.push(rng.random_range(0..graph.node_count()));
    while walk.len() < k {
        let nbrs = graph.neighbors(*walk.last().expect("nonempty"));
        walk.push(nbrs[rng.random_range(0..nbrs.len())]);
    }
    Ok(WalkChain {
        graph,
        walk,
        rng,
        steps_taken: 0,
        scratch: Vec::new(),
    })
}

/// Values position `j` may take with every other position fixed.
fn valid_site_values(g: &Graph, walk: &[usize], j: usize, out: &mut Vec<usize>) {
    out.clear();
    let k = walk.len();
    if j == 0 {
        out.extend_from_slice(g.neighbors(walk[1]));
    } else if j == k - 1 {
        out.extend_from_slice(g.neighbors(walk[k - 2]));
    } else {
        let (a, b) = (g.neighbors(walk[j - 1]), g.neighbors(walk[j + 1]));
        let (mut i, mut m) = (0, 0);
        while i < a.len() && m < b.len() {
            match a[i].cmp(&b[m]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => m += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    m += 1;
                }
            }
        }
    }
}

fn all_distinct(walk: &[usize], scratch: &mut Vec<usize>) -> bool {
    scratch.clear();
    scratch.extend_from_slice(walk);
    scratch.sort_unstable();
    scratch.windows(2).all(|w| w[0] != w[1])
}

/// Whether consecutive nodes of `walk` are adjacent.
pub fn is_walk(g: &Graph, walk: &[usize]) -> bool {
    walk.windows(2).all(|w| g.has_edge(w[0], w[1]))
}

/// Exact one-step transition law of [`WalkChain::step`] from `walk`, as
/// (successor, probability) pairs with distinct successors. Intended for
/// verifying the sampler on small graphs.
pub fn transition_probabilities(g: &Graph, walk: &[usize]) -> Vec<(Vec<usize>, f64)> {
    let k = walk.len();
    let mut out: Vec<(Vec<usize>, f64)> = vec![(walk.to_vec(), 0.5)];
    let mut assigned = 0.0;
    let mut add = |w: Vec<usize>, p: f64| {
        assigned += p;
        match out.iter_mut().find(|(v, _)| *v == w) {
            Some(entry) => entry.1 += p,
            None => out.push((w, p)),
        }
    };
    let mut values = Vec::new();
    for j in 0..k {
        valid_site_values(g, walk, j, &mut values);
        for &x in &values {
            let mut w = walk.to_vec();
            w[j] = x;
            add(w, 0.25 / k as f64 / values.len() as f64);
        }
    }
    let (first, last) = (walk[0], walk[k - 1]);
    let forward_accept = (g.degree(last) as f64 / g.degree(walk[1]) as f64).min(1.0);
    for &y in g.neighbors(last) {
        let mut w = walk[1..].to_vec();
        w.push(y);
        add(w, 0.125 / g.degree(last) as f64 * forward_accept);
    }
    let backward_accept = (g.degree(first) as f64 / g.degree(walk[k - 2]) as f64).min(1.0);
    for &z in g.neighbors(first) {
        let mut w = vec![z];
        w.extend_from_slice(&walk[..k - 1]);
        add(w, 0.125 / g.degree(first) as f64 * backward_accept);
    }
    // rejected crawl proposals leave the walk in place
    out[0].1 += 0.5 - assigned;
    out.retain(|(_, p)| *p > 0.0);
    out
}

fn guard(g: &Graph, k: usize) -> Result<()> {
    if g.node_count() > BRUTE_FORCE_NODE_LIMIT {
        return Err(Error::GuardExceeded {
            limit: BRUTE_FORCE_NODE_LIMIT,
            node_count: g.node_count(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidParams("k must be positive".into()));
    }
    Ok(())
}

/// Every ordered k-path (distinct nodes, consecutive nodes adjacent), by
/// depth-first search, in lexicographic order.
pub fn brute_force_kpaths(g: &Graph, k: usize) -> Result<Vec<Vec<usize>>> {
    guard(g, k)?;
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn extend(g: &Graph, k: usize, current: &mut Vec<usize>, distinct: bool, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        let last = *current.last().expect("nonempty");
        for &u in g.neighbors(last) {
            if distinct && current.contains(&u) {
                continue;
            }
            current.push(u);
            extend(g, k, current, distinct, out);
            current.pop();
        }
    }
    for v in 0..g.node_count() {
        current.push(v);
        extend(g, k, &mut current, true, &mut out);
        current.pop();
    }
    Ok(out)
}

/// Every k-walk, in lexicographic order.
pub fn brute_force_kwalks(g: &Graph, k: usize) -> Result<Vec<Vec<usize>>> {
    guard(g, k)?;
    let mut walks: Vec<Vec<usize>> = (0..g.node_count()).map(|v| vec![v]).collect();
    for _ in 1..k {
        walks = walks
            .into_iter()
            .flat_map(|w| {
                let last = *w.last().expect("nonempty");
                g.neighbors(last).iter().map(move |&u| {
                    let mut next = w.clone();
                    next.push(u);
                    next
                })
            })
            .collect();
    }
    Ok(walks)
}

/// Total variation distance between the empirical law of `samples` and the
/// uniform law on `support`. Samples outside the support count fully.
pub fn tv_to_uniform(samples: &[Vec<usize>], support: &[Vec<usize>]) -> f64 {
    use std::collections::HashMap;
    let mut counts: HashMap<&[usize], usize> = support.iter().map(|s| (s.as_slice(), 0)).collect();
    let mut outside = 0usize;
    for s in samples {
        match counts.get_mut(s.as_slice()) {
            Some(c) => *c += 1,
            None => outside += 1,
        }
    }
    let n = samples.len() as f64;
    let u = 1.0 / support.len() as f64;
    let inside: f64 = counts.values().map(|&c| (c as f64 / n - u).abs()).sum();
    0.5 * (inside + outside as f64 / n)
}
