//! Undirected simple graphs, the Newman–Watts–Strogatz generator, edge-list
//! I/O and induced subgraphs.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Undirected simple graph on nodes `0..node_count`.
///
/// Neighbor lists are sorted and mutually consistent; there are no self-loops
/// and no parallel edges. A graph never changes after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    /// Builds a graph from unordered pairs. Duplicates (in either orientation)
    /// collapse to one edge.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange {
                        node,
                        node_count: n,
                    });
                }
            }
            if u == v {
                return Err(Error::SelfLoop {
                    node: u as u64,
                    line: 0,
                });
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut twice = 0;
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            twice += list.len();
        }
        Ok(Graph {
            adj,
            edge_count: twice / 2,
        })
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|v| (v - 1, v))).expect("valid path")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 nodes");
        Self::from_edges(n, (0..n).map(|v| (v, (v + 1) % n))).expect("valid cycle")
    }

    pub fn complete(n: usize) -> Self {
        Self::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
            .expect("valid complete graph")
    }

    /// Star with center 0 and leaves `1..n`.
    pub fn star(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|v| (0, v))).expect("valid star")
    }

    /// Erdős–Rényi G(n, p).
    pub fn gnp(n: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParams(format!("edge probability {p} not in [0,1]")));
        }
        let mut rng = rng::seeded(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        Self::from_edges(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbors of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = if self.adj[u].len() <= self.adj[v].len() {
            (u, v)
        } else {
            (v, u)
        };
        self.adj[a].binary_search(&b).is_ok()
    }

    /// Each edge once, as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Subgraph induced on `ordered_nodes`; node `i` of the result is
    /// `ordered_nodes[i]` of `self`.
    pub fn induced_subgraph(&self, ordered_nodes: &[usize]) -> Result<Graph> {
        let n = self.node_count();
        let mut position = HashMap::with_capacity(ordered_nodes.len());
        for (i, &v) in ordered_nodes.iter().enumerate() {
            if v >= n {
                return Err(Error::NodeOutOfRange {
                    node: v,
                    node_count: n,
                });
            }
            if position.insert(v, i).is_some() {
                return Err(Error::DuplicateNode(v));
            }
        }
        let k = ordered_nodes.len();
        let mut adj = vec![Vec::new(); k];
        let mut twice = 0;
        for (i, &v) in ordered_nodes.iter().enumerate() {
            for &u in &self.adj[v] {
                if let Some(&j) = position.get(&u) {
                    adj[i].push(j);
                }
            }
            adj[i].sort_unstable();
            twice += adj[i].len();
        }
        Ok(Graph {
            adj,
            edge_count: twice / 2,
        })
    }

    /// `|E| / (n (n - 1) / 2)`.
    pub fn edge_density(&self) -> Result<f64> {
        let n = self.node_count();
        if n < 2 {
            return Err(Error::InvalidParams(format!(
                "edge density needs at least 2 nodes, graph has {n}"
            )));
        }
        Ok(self.edge_count as f64 / (n as f64 * (n as f64 - 1.0) / 2.0))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    reached += 1;
                    queue.push_back(u);
                }
            }
        }
        reached == n
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            nodes: self.node_count(),
            edges: self.edge_count(),
            density: self.edge_density().unwrap_or(0.0),
        }
    }
}

/// Summary statistics written next to generated graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub density: f64,
}

/// Parameters of the Newman–Watts–Strogatz small-world model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NwsParams {
    pub n: usize,
    /// Ring degree: each node is joined to its `neighbors` nearest ring nodes.
    pub neighbors: usize,
    pub shortcut_p: f64,
    pub seed: u64,
}

impl NwsParams {
    pub fn validate(&self) -> Result<()> {
        if self.neighbors % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "ring degree {} must be even",
                self.neighbors
            )));
        }
        if self.neighbors >= self.n {
            return Err(Error::InvalidParams(format!(
                "ring degree {} must be smaller than node count {}",
                self.neighbors, self.n
            )));
        }
        if !(0.0..=1.0).contains(&self.shortcut_p) {
            return Err(Error::InvalidParams(format!(
                "shortcut probability {} not in [0,1]",
                self.shortcut_p
            )));
        }
        Ok(())
    }
}

/// Newman–Watts–Strogatz graph.
///
/// Starts from the circulant ring in which every node is adjacent to its
/// `neighbors / 2` successors and predecessors. Then every ring edge `(u, v)`
/// independently, with probability `shortcut_p`, spawns one shortcut `(u, w)`
/// with `w` uniform over all nodes. Shortcuts that would be self-loops or
/// repeat an existing edge are dropped, not redrawn. The expected edge count
/// is therefore slightly below `n * neighbors / 2 * (1 + shortcut_p)`.
pub fn generate_nws(params: &NwsParams) -> Result<Graph> {
    params.validate()?;
    let NwsParams {
        n,
        neighbors,
        shortcut_p,
        seed,
    } = *params;
    let half = neighbors / 2;
    let mut rng = rng::seeded(seed);
    let on_ring = |u: usize, v: usize| {
        let d = u.abs_diff(v);
        d.min(n - d) <= half
    };
    let ring_edges = n * half;
    let mut shortcuts: HashSet<(usize, usize)> = HashSet::new();
    // One Bernoulli trial per ring edge (u, u + offset), anchored at u.
    for u in 0..n {
        for _offset in 1..=half {
            if shortcut_p > 0.0 && rng.random_bool(shortcut_p) {
                let w = rng.random_range(0..n);
                if w == u || on_ring(u, w) {
                    continue;
                }
                shortcuts.insert((u.min(w), u.max(w)));
            }
        }
    }
    let mut shortcut_list: Vec<(usize, usize)> = shortcuts.into_iter().collect();
    shortcut_list.sort_unstable();
    let ring = (0..n).flat_map(|u| (1..=half).map(move |off| (u, (u + off) % n)));
    let mut edges = Vec::with_capacity(ring_edges + shortcut_list.len());
    edges.extend(ring);
    edges.extend(shortcut_list);
    Graph::from_edges(n, edges)
}

/// Reads an edge list. See [`parse_edge_list`].
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_edge_list(BufReader::new(file), path)
}

/// Parses whitespace-separated integer pairs, one edge per line.
///
/// Blank lines and lines starting with `#` are skipped. Node ids are arbitrary
/// non-negative integers and are compacted to `0..n` in order of first
/// appearance. `origin` is only used in error messages.
pub fn parse_edge_list(reader: impl BufRead, origin: impl AsRef<Path>) -> Result<Graph> {
    let origin = origin.as_ref();
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        let mut tokens = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(parse_err(format!("expected two node ids, got {trimmed:?}")));
        };
        let a: u64 = a
            .parse()
            .map_err(|_| parse_err(format!("invalid node id {a:?}")))?;
        let b: u64 = b
            .parse()
            .map_err(|_| parse_err(format!("invalid node id {b:?}")))?;
        if a == b {
            return Err(Error::SelfLoop {
                node: a,
                line: line_no,
            });
        }
        let mut intern = |raw: u64| {
            let next = ids.len();
            *ids.entry(raw).or_insert(next)
        };
        let (u, v) = (intern(a), intern(b));
        edges.push((u, v));
    }
    Graph::from_edges(ids.len(), edges)
}

/// Writes one `u v` line per edge (`u < v`), preceded by a comment header.
///
/// Lines are ordered by larger endpoint, then smaller, so reading the file
/// back keeps every node id whenever each node other than 0 has a smaller
/// neighbor (rings, paths and NWS graphs among them).
pub fn write_edge_list(graph: &Graph, mut writer: impl Write) -> Result<()> {
    writeln!(
        writer,
        "# nodes {} edges {}",
        graph.node_count(),
        graph.edge_count()
    )?;
    let mut edges: Vec<(usize, usize)> = graph.edges().collect();
    edges.sort_unstable_by_key(|&(u, v)| (v, u));
    for (u, v) in edges {
        writeln!(writer, "{u} {v}")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_edge_list(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_edge_list(graph, BufWriter::new(file))
}
