//! Weighted digraphs, Laplacians, and piecewise-constant switching schedules.
//!
//! Edge orientation convention, fixed once here and used everywhere:
//! `adjacency[(i, j)] > 0` means there is an edge from node `j` to node `i`,
//! i.e. node `i` receives information from node `j`. The Laplacian is
//! `L = D - A` with `D = diag` of the adjacency row sums, so `L * 1 = 0`
//! holds exactly by construction and the consensus coupling `-(L s)_i`
//! expands to the neighbor sum `-sum_j a_ij (s_i - s_j)`.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed graph with nonnegative edge weights and no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    n_nodes: usize,
    adjacency: DMatrix<f64>,
}

impl WeightedDigraph {
    pub fn new(adjacency: DMatrix<f64>) -> Result<Self> {
        if adjacency.nrows() != adjacency.ncols() {
            return Err(Error::DimensionMismatch {
                context: "adjacency matrix",
                expected: adjacency.nrows(),
                actual: adjacency.ncols(),
            });
        }
        for i in 0..adjacency.nrows() {
            for j in 0..adjacency.ncols() {
                let a = adjacency[(i, j)];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidParameter {
                        what: "adjacency weight",
                        detail: format!("entry ({i}, {j}) = {a} must be finite and nonnegative"),
                    });
                }
                if i == j && a != 0.0 {
                    return Err(Error::InvalidParameter {
                        what: "adjacency diagonal",
                        detail: format!("self-loop at node {i} (weight {a}) is not allowed"),
                    });
                }
            }
        }
        Ok(Self {
            n_nodes: adjacency.nrows(),
            adjacency,
        })
    }

    pub fn empty(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            adjacency: DMatrix::zeros(n_nodes, n_nodes),
        }
    }

    /// Directed edges given as `(from, to, weight)`.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adjacency = DMatrix::zeros(n_nodes, n_nodes);
        for &(from, to, w) in edges {
            if from >= n_nodes || to >= n_nodes {
                return Err(Error::InvalidParameter {
                    what: "edge",
                    detail: format!("({from}, {to}) out of range for {n_nodes} nodes"),
                });
            }
            // receiver row, sender column
            adjacency[(to, from)] = w;
        }
        Self::new(adjacency)
    }

    /// Undirected unit-weight edges (each becomes a bidirectional pair).
    pub fn from_undirected_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut directed = Vec::with_capacity(2 * edges.len());
        for &(a, b) in edges {
            directed.push((a, b, 1.0));
            directed.push((b, a, 1.0));
        }
        Self::from_edges(n_nodes, &directed)
    }

    /// Undirected ring 0-1-...-(n-1)-0 with unit weights.
    pub fn ring(n_nodes: usize) -> Result<Self> {
        let edges: Vec<(usize, usize)> = (0..n_nodes).map(|i| (i, (i + 1) % n_nodes)).collect();
        Self::from_undirected_edges(n_nodes, &edges)
    }

    /// Undirected complete graph with unit weights.
    pub fn complete(n_nodes: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n_nodes {
            for j in (i + 1)..n_nodes {
                edges.push((i, j));
            }
        }
        Self::from_undirected_edges(n_nodes, &edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn laplacian(&self) -> Laplacian {
        let n = self.n_nodes;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let out_degree: f64 = (0..n).map(|j| self.adjacency[(i, j)]).sum();
            for j in 0..n {
                let a = self.adjacency[(i, j)];
                if a > 0.0 {
                    m[(i, j)] = -a;
                }
            }
            m[(i, i)] = out_degree;
        }
        Laplacian { matrix: m }
    }

    /// True iff every node's weighted out-degree equals its weighted in-degree
    /// up to `tol`.
    pub fn is_weight_balanced(&self, tol: f64) -> bool {
        (0..self.n_nodes).all(|i| {
            let row: f64 = (0..self.n_nodes).map(|j| self.adjacency[(i, j)]).sum();
            let col: f64 = (0..self.n_nodes).map(|j| self.adjacency[(j, i)]).sum();
            (row - col).abs() <= tol
        })
    }

    /// Edge-set union: elementwise max of the adjacency matrices.
    pub fn union(&self, other: &WeightedDigraph) -> Result<WeightedDigraph> {
        if self.n_nodes != other.n_nodes {
            return Err(Error::DimensionMismatch {
                context: "graph union",
                expected: self.n_nodes,
                actual: other.n_nodes,
            });
        }
        let adjacency = self.adjacency.zip_map(&other.adjacency, f64::max);
        Ok(WeightedDigraph {
            n_nodes: self.n_nodes,
            adjacency,
        })
    }

    /// Directed connectivity: some node can reach every other node.
    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes;
        if n <= 1 {
            return true;
        }
        (0..n).any(|root| self.reach_count(root) == n)
    }

    fn reach_count(&self, root: usize) -> usize {
        let n = self.n_nodes;
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        seen[root] = true;
        let mut count = 1;
        while let Some(j) = stack.pop() {
            // j -> i edges sit in column j
            for i in 0..n {
                if !seen[i] && self.adjacency[(i, j)] > 0.0 {
                    seen[i] = true;
                    count += 1;
                    stack.push(i);
                }
            }
        }
        count
    }
}

/// Laplacian `L = D - A`; row sums are zero by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    matrix: DMatrix<f64>,
}

impl Laplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    /// `L ⊗ I_n`, the per-coordinate lift used by the estimator dynamics.
    pub fn kron_identity(&self, n: usize) -> DMatrix<f64> {
        self.matrix.kronecker(&DMatrix::identity(n, n))
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        for i in 0..self.matrix.nrows() {
            let row: Vec<String> = (0..self.matrix.ncols())
                .map(|j| format!("{}", self.matrix[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// One active span of a schedule: graph `graph_idx` on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSpan {
    pub graph_idx: usize,
    pub start: f64,
    pub end: f64,
}

/// Result of a joint-connectivity check. `partial_coverage` flags that the
/// schedule is finite, so only the covered horizon could be certified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityCheck {
    pub connected: bool,
    pub partial_coverage: bool,
    pub probes_checked: usize,
}

/// Piecewise-constant switching signal over a finite family of graphs.
///
/// `segments` lists `(graph index, duration)` pairs played back to back from
/// t = 0, cyclically when `repeat` is set. The dwell time is the minimum
/// segment duration unless a smaller value is supplied explicitly.
#[derive(Debug, Clone)]
pub struct SwitchingSchedule {
    graphs: Vec<WeightedDigraph>,
    segments: Vec<(usize, f64)>,
    repeat: bool,
    dwell_tau: f64,
    /// prefix[k] = start time of segment k within one period; prefix[len] = period
    prefix: Vec<f64>,
}

impl SwitchingSchedule {
    pub fn new(
        graphs: Vec<WeightedDigraph>,
        segments: Vec<(usize, f64)>,
        repeat: bool,
    ) -> Result<Self> {
        let dwell = segments
            .iter()
            .map(|&(_, d)| d)
            .fold(f64::INFINITY, f64::min);
        Self::with_dwell(graphs, segments, repeat, dwell)
    }

    pub fn with_dwell(
        graphs: Vec<WeightedDigraph>,
        segments: Vec<(usize, f64)>,
        repeat: bool,
        dwell_tau: f64,
    ) -> Result<Self> {
        if graphs.is_empty() || segments.is_empty() {
            return Err(Error::InvalidParameter {
                what: "schedule",
                detail: "needs at least one graph and one segment".into(),
            });
        }
        let n = graphs[0].n_nodes();
        if graphs.iter().any(|g| g.n_nodes() != n) {
            return Err(Error::InvalidParameter {
                what: "schedule",
                detail: "all graphs must share the same node set".into(),
            });
        }
        if !(dwell_tau > 0.0) {
            return Err(Error::InvalidParameter {
                what: "dwell time",
                detail: format!("must be positive, got {dwell_tau}"),
            });
        }
        for &(idx, duration) in &segments {
            if idx >= graphs.len() {
                return Err(Error::InvalidParameter {
                    what: "segment",
                    detail: format!("graph index {idx} out of range ({} graphs)", graphs.len()),
                });
            }
            if !(duration >= dwell_tau) {
                return Err(Error::InvalidParameter {
                    what: "segment",
                    detail: format!("duration {duration} shorter than dwell time {dwell_tau}"),
                });
            }
        }
        let mut prefix = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &(_, duration) in &segments {
            acc += duration;
            prefix.push(acc);
        }
        Ok(Self {
            graphs,
            segments,
            repeat,
            dwell_tau,
            prefix,
        })
    }

    /// Static schedule: one graph active forever.
    pub fn static_graph(graph: WeightedDigraph, duration: f64) -> Result<Self> {
        Self::new(vec![graph], vec![(0, duration)], true)
    }

    pub fn n_nodes(&self) -> usize {
        self.graphs[0].n_nodes()
    }

    pub fn graphs(&self) -> &[WeightedDigraph] {
        &self.graphs
    }

    pub fn segments(&self) -> &[(usize, f64)] {
        &self.segments
    }

    pub fn repeats(&self) -> bool {
        self.repeat
    }

    pub fn dwell_tau(&self) -> f64 {
        self.dwell_tau
    }

    /// Total duration of one pass over the segment list.
    pub fn period(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    /// `None` when the schedule repeats forever.
    pub fn horizon(&self) -> Option<f64> {
        if self.repeat {
            None
        } else {
            Some(self.period())
        }
    }

    /// The span containing time `t` (right-continuous at switching instants).
    pub fn segment_at(&self, t: f64) -> Result<SegmentSpan> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter {
                what: "time",
                detail: format!("must be nonnegative, got {t}"),
            });
        }
        let period = self.period();
        if !self.repeat && t >= period {
            return Err(Error::ScheduleExhausted { t, horizon: period });
        }
        let cycle = if self.repeat { (t / period).floor() } else { 0.0 };
        let mut local = t - cycle * period;
        let mut base = cycle * period;
        // Boundary rounding: treat times within eps of a segment end as the start
        // of the next segment (sigma is right-continuous).
        let eps = 1e-9 * self.dwell_tau;
        if local >= period - eps {
            local -= period;
            base += period;
            if local < 0.0 {
                local = 0.0;
            }
            if !self.repeat {
                return Err(Error::ScheduleExhausted { t, horizon: period });
            }
        }
        for k in 0..self.segments.len() {
            if local < self.prefix[k + 1] - eps {
                return Ok(SegmentSpan {
                    graph_idx: self.segments[k].0,
                    start: base + self.prefix[k],
                    end: base + self.prefix[k + 1],
                });
            }
        }
        // fell through due to rounding on the last boundary
        Ok(SegmentSpan {
            graph_idx: self.segments[0].0,
            start: base + period,
            end: base + period + self.prefix[1],
        })
    }

    pub fn active_index(&self, t: f64) -> Result<usize> {
        Ok(self.segment_at(t)?.graph_idx)
    }

    /// Edge-set union over `[t, t + window)`. For finite schedules the window
    /// is clipped at the horizon; `t` itself past the horizon is an error.
    pub fn union_graph(&self, t: f64, window: f64) -> Result<WeightedDigraph> {
        if !(window > 0.0) {
            return Err(Error::InvalidParameter {
                what: "window",
                detail: format!("must be positive, got {window}"),
            });
        }
        let end = t + window;
        let mut acc = WeightedDigraph::empty(self.n_nodes());
        let mut cursor = t;
        loop {
            let span = self.segment_at(cursor)?;
            acc = acc.union(&self.graphs[span.graph_idx])?;
            cursor = span.end;
            if cursor >= end - 1e-9 * self.dwell_tau {
                break;
            }
            if let Some(h) = self.horizon() {
                if cursor >= h {
                    break;
                }
            }
        }
        Ok(acc)
    }

    /// Joint connectivity over windows of length `window`: every probed window
    /// union must be connected. Probes cover one period (or the finite horizon)
    /// on a grid of `probe_step` refined with all points where the window
    /// content can change, so the check is exact.
    pub fn joint_connectivity(&self, window: f64, probe_step: f64) -> Result<ConnectivityCheck> {
        if !(window > 0.0) {
            return Err(Error::InvalidParameter {
                what: "window",
                detail: format!("must be positive, got {window}"),
            });
        }
        if !(probe_step > 0.0) || probe_step > self.dwell_tau * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter {
                what: "probe step",
                detail: format!(
                    "must lie in (0, dwell] = (0, {}], got {probe_step}",
                    self.dwell_tau
                ),
            });
        }
        let period = self.period();
        let probe_end = if self.repeat {
            period
        } else {
            (period - window).max(0.0)
        };
        let mut probes: Vec<f64> = Vec::new();
        let mut t = 0.0;
        while t < probe_end + 1e-12 {
            probes.push(t.min(probe_end));
            t += probe_step;
        }
        // Window content changes only when t or t+window crosses a boundary.
        for k in 0..self.segments.len() {
            let b = self.prefix[k];
            probes.push(b);
            let shifted = if self.repeat {
                (b - window).rem_euclid(period)
            } else {
                b - window
            };
            if shifted >= 0.0 {
                probes.push(shifted);
            }
        }
        probes.retain(|&p| p >= 0.0 && p <= probe_end + 1e-12);
        probes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        probes.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mut connected = true;
        for &p in &probes {
            if !self.union_graph(p, window)?.is_connected() {
                connected = false;
                break;
            }
        }
        Ok(ConnectivityCheck {
            connected,
            partial_coverage: !self.repeat,
            probes_checked: probes.len(),
        })
    }

    pub fn is_jointly_connected(&self, window: f64, probe_step: f64) -> Result<bool> {
        Ok(self.joint_connectivity(window, probe_step)?.connected)
    }

    pub fn to_json(&self) -> ScheduleJson {
        ScheduleJson {
            nodes: self.n_nodes(),
            graphs: self
                .graphs
                .iter()
                .map(|g| {
                    let n = g.n_nodes();
                    let mut row_major = Vec::with_capacity(n * n);
                    for i in 0..n {
                        for j in 0..n {
                            row_major.push(g.adjacency()[(i, j)]);
                        }
                    }
                    row_major
                })
                .collect(),
            segments: self.segments.clone(),
            repeat: self.repeat,
        }
    }

    pub fn from_json(json: &ScheduleJson) -> Result<Self> {
        let n = json.nodes;
        let mut graphs = Vec::with_capacity(json.graphs.len());
        for (k, flat) in json.graphs.iter().enumerate() {
            if flat.len() != n * n {
                return Err(Error::Schema(format!(
                    "graph {k}: expected {} adjacency entries for {n} nodes, got {}",
                    n * n,
                    flat.len()
                )));
            }
            let adjacency = DMatrix::from_row_slice(n, n, flat);
            graphs.push(WeightedDigraph::new(adjacency)?);
        }
        Self::new(graphs, json.segments.clone(), json.repeat)
    }
}

/// JSON wire format for schedules: adjacency matrices are row-major arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleJson {
    pub nodes: usize,
    pub graphs: Vec<Vec<f64>>,
    pub segments: Vec<(usize, f64)>,
    pub repeat: bool,
}

/// Splits the undirected ring on `n_nodes` into `n_parts` edge-disjoint
/// subgraphs, played cyclically for `segment_len` each. Every segment is
/// weight-balanced (bidirectional unit edges); the union over a full cycle is
/// the whole ring, so the schedule is jointly connected with window
/// `n_parts * segment_len`. With enough parts (each holding at most
/// `n_nodes - 2` edges) every instantaneous graph is disconnected.
pub fn generate_partition_schedule(
    n_nodes: usize,
    n_parts: usize,
    segment_len: f64,
    seed: u64,
) -> Result<SwitchingSchedule> {
    if n_nodes < 3 {
        return Err(Error::InvalidParameter {
            what: "partition schedule",
            detail: format!("needs at least 3 nodes, got {n_nodes}"),
        });
    }
    if n_parts < 1 || n_parts > n_nodes {
        return Err(Error::InvalidParameter {
            what: "partition schedule",
            detail: format!("n_parts must lie in 1..={n_nodes}, got {n_parts}"),
        });
    }
    if !(segment_len > 0.0) {
        return Err(Error::InvalidParameter {
            what: "segment length",
            detail: format!("must be positive, got {segment_len}"),
        });
    }
    let mut edges: Vec<(usize, usize)> = (0..n_nodes).map(|i| (i, (i + 1) % n_nodes)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.shuffle(&mut rng);

    let base = n_nodes / n_parts;
    let extra = n_nodes % n_parts;
    let mut graphs = Vec::with_capacity(n_parts);
    let mut offset = 0;
    for part in 0..n_parts {
        let size = base + usize::from(part < extra);
        let chunk = &edges[offset..offset + size];
        offset += size;
        graphs.push(WeightedDigraph::from_undirected_edges(n_nodes, chunk)?);
    }
    let segments = (0..n_parts).map(|k| (k, segment_len)).collect();
    SwitchingSchedule::new(graphs, segments, true)
}
