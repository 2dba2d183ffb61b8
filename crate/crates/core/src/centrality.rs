//! Node importance scores.
//!
//! All measures run on the alive part of a graph; dead slots are skipped and
//! [`CentralityScores::nodes`] lists which original id each value belongs
//! to. Source-based measures (betweenness, closeness) process sources in
//! fixed-size chunks whose partial sums are reduced in chunk order, so the
//! output is bit-identical with or without the `parallel` feature.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Csr, Graph, NodeId};
use crate::{Cancel, Error, Result};

/// Sources handled by one work unit.
const SOURCE_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Degree,
    Betweenness,
    Closeness,
    PageRank,
    Eigenvector,
}

impl Measure {
    pub const ALL: [Measure; 5] = [
        Measure::Degree,
        Measure::Betweenness,
        Measure::Closeness,
        Measure::PageRank,
        Measure::Eigenvector,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Measure::Degree => "dc",
            Measure::Betweenness => "bc",
            Measure::Closeness => "cc",
            Measure::PageRank => "pr",
            Measure::Eigenvector => "ec",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.short_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown centrality measure `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralityParams {
    /// Betweenness sources; `None` means every node (exact). Larger values
    /// are clamped to the node count.
    pub bc_samples: Option<usize>,
    /// PageRank damping.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Seed for betweenness source sampling.
    pub seed: u64,
}

impl Default for CentralityParams {
    fn default() -> Self {
        Self {
            bc_samples: Some(512),
            damping: 0.85,
            tol: 1e-8,
            max_iter: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityScores {
    pub measure: Measure,
    pub params: CentralityParams,
    /// Original node id of each value, ascending.
    pub nodes: Vec<NodeId>,
    pub values: Vec<f64>,
    /// Iterative measures: whether the tolerance was met.
    pub converged: bool,
    pub iterations: usize,
    /// Eigenvector centrality fell back to the shifted matrix `A + I`.
    pub shifted: bool,
}

impl CentralityScores {
    fn new(measure: Measure, params: CentralityParams, nodes: Vec<NodeId>, values: Vec<f64>) -> Self {
        Self {
            measure,
            params,
            nodes,
            values,
            converged: true,
            iterations: 0,
            shifted: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Scores spread over `num_nodes` slots, zero for nodes not scored.
    pub fn by_node_id(&self, num_nodes: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_nodes];
        for (&v, &s) in self.nodes.iter().zip(&self.values) {
            out[v] = s;
        }
        out
    }

    /// One-line description of the measure and its settings.
    pub fn describe(&self) -> String {
        let p = &self.params;
        match self.measure {
            Measure::Degree | Measure::Closeness => String::from(self.measure.short_name()),
            Measure::Betweenness => match p.bc_samples {
                Some(k) => format!("bc samples={k} seed={}", p.seed),
                None => String::from("bc samples=all"),
            },
            Measure::PageRank => format!(
                "pr damping={} tol={} max_iter={} converged={}",
                p.damping, p.tol, p.max_iter, self.converged
            ),
            Measure::Eigenvector => format!(
                "ec tol={} max_iter={} converged={} shifted={}",
                p.tol, p.max_iter, self.converged, self.shifted
            ),
        }
    }
}

/// Computes `measure` on the alive part of `graph`.
pub fn compute<C: Cancel>(
    graph: &Graph,
    measure: Measure,
    params: &CentralityParams,
    cancel: &C,
) -> Result<CentralityScores> {
    match measure {
        Measure::Degree => Ok(degree_centrality(graph)),
        Measure::Betweenness => betweenness_centrality(graph, params, cancel),
        Measure::Closeness => closeness_centrality(graph, cancel),
        Measure::PageRank => pagerank_centrality(graph, params, cancel),
        Measure::Eigenvector => eigenvector_centrality(graph, params, cancel),
    }
}

fn frozen(graph: &Graph) -> (Csr, Vec<NodeId>) {
    if graph.alive_count() == graph.num_nodes() {
        (graph.to_csr(), (0..graph.num_nodes()).collect())
    } else {
        let (g, remap) = graph.compact();
        (g.to_csr(), remap.originals().to_vec())
    }
}

pub fn degree_centrality(graph: &Graph) -> CentralityScores {
    let nodes: Vec<NodeId> = graph.nodes().collect();
    let values = nodes.iter().map(|&v| graph.degree(v) as f64).collect();
    CentralityScores::new(Measure::Degree, CentralityParams::default(), nodes, values)
}

/// Splits `sources` into fixed chunks, runs `work` on each and adds the
/// partial vectors together in chunk order.
fn reduce_sources<F>(n: usize, sources: &[NodeId], work: F) -> Result<Vec<f64>>
where
    F: Fn(&[NodeId]) -> Result<Vec<f64>> + Sync,
{
    #[cfg(feature = "parallel")]
    let partials: Vec<Result<Vec<f64>>> = {
        use rayon::prelude::*;
        sources.par_chunks(SOURCE_CHUNK).map(&work).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Result<Vec<f64>>> = sources.chunks(SOURCE_CHUNK).map(&work).collect();

    let mut total = vec![0.0; n];
    for partial in partials {
        for (t, p) in total.iter_mut().zip(partial?) {
            *t += p;
        }
    }
    Ok(total)
}

/// Brandes dependency accumulation from one source into `acc`.
struct Brandes {
    order: Vec<NodeId>,
    dist: Vec<usize>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
}

impl Brandes {
    fn new(n: usize) -> Self {
        Self {
            order: Vec::with_capacity(n),
            dist: vec![usize::MAX; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
        }
    }

    fn accumulate(&mut self, csr: &Csr, source: NodeId, acc: &mut [f64]) {
        for &v in &self.order {
            self.dist[v] = usize::MAX;
            self.sigma[v] = 0.0;
            self.delta[v] = 0.0;
        }
        self.order.clear();

        self.dist[source] = 0;
        self.sigma[source] = 1.0;
        self.order.push(source);
        // `order` doubles as the BFS queue
        let mut head = 0;
        while head < self.order.len() {
            let v = self.order[head];
            head += 1;
            let next = self.dist[v] + 1;
            for &w in csr.neighbors(v) {
                if self.dist[w] == usize::MAX {
                    self.dist[w] = next;
                    self.order.push(w);
                }
                if self.dist[w] == next {
                    self.sigma[w] += self.sigma[v];
                }
            }
        }

        for &w in self.order.iter().rev() {
            let dw = self.dist[w];
            let coeff = (1.0 + self.delta[w]) / self.sigma[w];
            for &v in csr.neighbors(w) {
                if dw > 0 && self.dist[v] == dw - 1 {
                    self.delta[v] += self.sigma[v] * coeff;
                }
            }
            if w != source {
                acc[w] += self.delta[w];
            }
        }
    }
}

/// Betweenness centrality, exact or estimated from sampled sources.
///
/// Each unordered pair is counted once. With `k < n` sampled sources the
/// sum is scaled by `n / k`.
pub fn betweenness_centrality<C: Cancel>(
    graph: &Graph,
    params: &CentralityParams,
    cancel: &C,
) -> Result<CentralityScores> {
    let (csr, nodes) = frozen(graph);
    let n = csr.num_nodes();
    let sources: Vec<NodeId> = match params.bc_samples {
        Some(0) => {
            return Err(Error::InvalidParameter(
                "betweenness sample size must be positive".into(),
            ))
        }
        Some(k) if k < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..n).collect(),
    };

    let mut values = reduce_sources(n, &sources, |chunk| {
        let mut acc = vec![0.0; n];
        let mut state = Brandes::new(n);
        for &s in chunk {
            cancel.check()?;
            state.accumulate(&csr, s, &mut acc);
        }
        Ok(acc)
    })?;

    let scale = if sources.len() < n && !sources.is_empty() {
        n as f64 / sources.len() as f64
    } else {
        1.0
    };
    for v in &mut values {
        *v *= scale / 2.0;
    }
    Ok(CentralityScores::new(Measure::Betweenness, *params, nodes, values))
}

/// Closeness centrality with Wasserman-Faust scaling on disconnected graphs:
/// `(r - 1)^2 / ((n - 1) * sum of distances)` where `r` counts the nodes
/// reachable from `v` (itself included). Isolated nodes score 0.
pub fn closeness_centrality<C: Cancel>(graph: &Graph, cancel: &C) -> Result<CentralityScores> {
    let (csr, nodes) = frozen(graph);
    let n = csr.num_nodes();

    let score = |source: NodeId, dist: &mut Vec<usize>, queue: &mut Vec<NodeId>| -> f64 {
        for &v in queue.iter() {
            dist[v] = usize::MAX;
        }
        queue.clear();
        dist[source] = 0;
        queue.push(source);
        let mut head = 0;
        let mut total = 0usize;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            total += dist[v];
            for &w in csr.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push(w);
                }
            }
        }
        let reached = queue.len();
        if reached <= 1 || n <= 1 {
            return 0.0;
        }
        let r = (reached - 1) as f64;
        (r / (n - 1) as f64) * (r / total as f64)
    };

    let chunk_scores = |chunk: &[NodeId]| -> Result<Vec<f64>> {
        let mut dist = vec![usize::MAX; n];
        let mut queue = Vec::with_capacity(n);
        chunk
            .iter()
            .map(|&s| {
                cancel.check()?;
                Ok(score(s, &mut dist, &mut queue))
            })
            .collect()
    };

    let sources: Vec<NodeId> = (0..n).collect();
    #[cfg(feature = "parallel")]
    let chunks: Vec<Result<Vec<f64>>> = {
        use rayon::prelude::*;
        sources.par_chunks(SOURCE_CHUNK).map(chunk_scores).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Result<Vec<f64>>> = sources.chunks(SOURCE_CHUNK).map(chunk_scores).collect();

    let mut values = Vec::with_capacity(n);
    for c in chunks {
        values.extend(c?);
    }
    Ok(CentralityScores::new(
        Measure::Closeness,
        CentralityParams::default(),
        nodes,
        values,
    ))
}

/// PageRank by power iteration on `p <- (1 - a)/n + a * A D^-1 p`, with the
/// mass of degree-0 nodes spread uniformly. The result sums to one.
///
/// Hitting `max_iter` is not an error; `converged` reports it.
pub fn pagerank_centrality<C: Cancel>(
    graph: &Graph,
    params: &CentralityParams,
    cancel: &C,
) -> Result<CentralityScores> {
    let alpha = params.damping;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "damping must lie in (0, 1), got {alpha}"
        )));
    }
    let (csr, nodes) = frozen(graph);
    let n = csr.num_nodes();
    let mut scores = CentralityScores::new(Measure::PageRank, *params, nodes, Vec::new());
    if n == 0 {
        return Ok(scores);
    }
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        cancel.check()?;
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&v| csr.degree(v) == 0).map(|v| rank[v]).sum();
        let base = (1.0 - alpha) / nf + alpha * dangling / nf;
        for (v, slot) in next.iter_mut().enumerate() {
            let inflow: f64 = csr
                .neighbors(v)
                .iter()
                .map(|&u| rank[u] / csr.degree(u) as f64)
                .sum();
            *slot = base + alpha * inflow;
        }
        // renormalize against drift
        let total: f64 = next.iter().sum();
        let mut change = 0.0;
        for (r, x) in rank.iter_mut().zip(&next) {
            let x = x / total;
            change += libm::fabs(x - *r);
            *r = x;
        }
        if change < params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("pagerank did not reach tol {} in {} iterations", params.tol, params.max_iter);
    }
    scores.values = rank;
    scores.converged = converged;
    scores.iterations = iterations;
    Ok(scores)
}

fn l2_norm(x: &[f64]) -> f64 {
    libm::sqrt(x.iter().map(|v| v * v).sum())
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

enum PowerOutcome {
    Converged(Vec<f64>, usize),
    Oscillating,
    Exhausted(Vec<f64>, usize),
}

fn power_iterate<C: Cancel>(csr: &Csr, shift: bool, params: &CentralityParams, cancel: &C) -> Result<PowerOutcome> {
    let n = csr.num_nodes();
    let mut x = vec![1.0 / libm::sqrt(n as f64); n];
    let mut prev = x.clone();
    for iter in 1..=params.max_iter {
        cancel.check()?;
        let mut y: Vec<f64> = (0..n)
            .map(|v| {
                let s: f64 = csr.neighbors(v).iter().map(|&u| x[u]).sum();
                if shift {
                    s + x[v]
                } else {
                    s
                }
            })
            .collect();
        let norm = l2_norm(&y);
        if norm == 0.0 {
            return Err(Error::Degenerate("adjacency annihilates the start vector".into()));
        }
        y.iter_mut().for_each(|v| *v /= norm);
        let change = l2_distance(&y, &x);
        if change < params.tol {
            return Ok(PowerOutcome::Converged(y, iter));
        }
        // period-2 cycle: the spectrum has -lambda_1 as well as lambda_1
        if !shift && iter > 2 && l2_distance(&y, &prev) < params.tol {
            return Ok(PowerOutcome::Oscillating);
        }
        prev = core::mem::replace(&mut x, y);
    }
    Ok(PowerOutcome::Exhausted(x, params.max_iter))
}

/// Dominant eigenvector of the adjacency matrix, L2-normalized and
/// non-negative.
///
/// When plain power iteration oscillates or runs out of iterations (the
/// bipartite case) the computation restarts on `A + I`, which has the same
/// eigenvectors, and sets `shifted`.
pub fn eigenvector_centrality<C: Cancel>(
    graph: &Graph,
    params: &CentralityParams,
    cancel: &C,
) -> Result<CentralityScores> {
    if graph.edge_count() == 0 {
        return Err(Error::Degenerate(
            "eigenvector centrality needs at least one edge".into(),
        ));
    }
    let (csr, nodes) = frozen(graph);
    let mut scores = CentralityScores::new(Measure::Eigenvector, *params, nodes, Vec::new());

    let (x, iterations, converged, shifted) = match power_iterate(&csr, false, params, cancel)? {
        PowerOutcome::Converged(x, it) => (x, it, true, false),
        PowerOutcome::Oscillating | PowerOutcome::Exhausted(..) => {
            log::debug!("eigenvector power iteration did not settle, retrying on A + I");
            match power_iterate(&csr, true, params, cancel)? {
                PowerOutcome::Converged(x, it) => (x, it, true, true),
                PowerOutcome::Exhausted(x, it) => (x, it, false, true),
                PowerOutcome::Oscillating => unreachable!("shifted iteration never reports oscillation"),
            }
        }
    };
    if !converged {
        log::warn!("eigenvector centrality did not reach tol {} in {} iterations", params.tol, params.max_iter);
    }
    scores.values = x.into_iter().map(libm::fabs).collect();
    scores.iterations = iterations;
    scores.converged = converged;
    scores.shifted = shifted;
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Never;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    fn k4() -> Graph {
        Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap()
    }

    fn star3() -> Graph {
        Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap()
    }

    fn exact() -> CentralityParams {
        CentralityParams {
            bc_samples: None,
            tol: 1e-13,
            max_iter: 100_000,
            ..Default::default()
        }
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degree_centrality(&path3()).values, [1.0, 2.0, 1.0]);
        assert_eq!(degree_centrality(&Graph::empty(1)).values, [0.0]);
        assert_eq!(degree_centrality(&k4()).values, [3.0; 4]);
    }

    #[test]
    fn betweenness_examples() {
        let bc = |g: &Graph| betweenness_centrality(g, &exact(), &Never).unwrap().values;
        assert_close(&bc(&path3()), &[0.0, 1.0, 0.0], 1e-12);
        let c4 = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let v = bc(&c4);
        assert!(v.iter().all(|&x| (x - v[0]).abs() < 1e-12));
        assert_close(&bc(&star3()), &[3.0, 0.0, 0.0, 0.0], 1e-12);
    }

    #[test]
    fn betweenness_rejects_zero_samples() {
        let p = CentralityParams {
            bc_samples: Some(0),
            ..Default::default()
        };
        assert!(matches!(
            betweenness_centrality(&path3(), &p, &Never),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn sampled_betweenness_is_seeded() {
        let g = Graph::from_edges(8, (0..7).map(|i| (i, i + 1))).unwrap();
        let p = CentralityParams {
            bc_samples: Some(3),
            seed: 9,
            ..Default::default()
        };
        let a = betweenness_centrality(&g, &p, &Never).unwrap();
        let b = betweenness_centrality(&g, &p, &Never).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn closeness_examples() {
        let cc = |g: &Graph| closeness_centrality(g, &Never).unwrap().values;
        assert_close(&cc(&path3()), &[2.0 / 3.0, 1.0, 2.0 / 3.0], 1e-15);
        assert_close(&cc(&k4()), &[1.0; 4], 1e-15);
        let two_edges = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_close(&cc(&two_edges), &[1.0 / 3.0; 4], 1e-15);
        assert_eq!(cc(&Graph::empty(3)), [0.0; 3]);
    }

    #[test]
    fn pagerank_examples() {
        let pr = pagerank_centrality(&k4(), &exact(), &Never).unwrap();
        assert_close(&pr.values, &[0.25; 4], 1e-12);

        let pr = pagerank_centrality(&path3(), &exact(), &Never).unwrap();
        assert!(pr.converged);
        assert!(pr.values[1] > pr.values[0]);
        assert!((pr.values[0] - pr.values[2]).abs() < 1e-12);
        // 3x3 linear system solved by hand: with a = 0.85, p0 = p2 = x,
        // p1 = y, x = 0.05 + 0.425 y and y = 0.05 + 1.7 x.
        let y = (0.05 + 1.7 * 0.05) / (1.0 - 1.7 * 0.425);
        let x = 0.05 + 0.425 * y;
        assert_close(&pr.values, &[x, y, x], 1e-10);
    }

    #[test]
    fn pagerank_dangling_mass_and_flags() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2)]).unwrap();
        let pr = pagerank_centrality(&g, &exact(), &Never).unwrap();
        assert!((pr.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        let p = CentralityParams { max_iter: 1, ..exact() };
        let pr = pagerank_centrality(&g, &p, &Never).unwrap();
        assert!(!pr.converged);

        let p = CentralityParams { damping: 1.0, ..exact() };
        assert!(pagerank_centrality(&g, &p, &Never).is_err());
    }

    #[test]
    fn eigenvector_examples() {
        let ec = eigenvector_centrality(&k4(), &exact(), &Never).unwrap();
        assert_close(&ec.values, &[0.5; 4], 1e-10);

        // P3 is bipartite: plain iteration oscillates and the shift kicks in
        let ec = eigenvector_centrality(&path3(), &exact(), &Never).unwrap();
        assert!(ec.shifted && ec.converged);
        let s = core::f64::consts::SQRT_2;
        assert_close(&ec.values, &[0.5, s / 2.0, 0.5], 1e-10);

        let ec = eigenvector_centrality(&star3(), &exact(), &Never).unwrap();
        assert!(ec.values[1..].iter().all(|&leaf| ec.values[0] > leaf));
    }

    #[test]
    fn eigenvector_needs_an_edge() {
        assert!(matches!(
            eigenvector_centrality(&Graph::empty(3), &exact(), &Never),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn dead_nodes_are_skipped() {
        let mut g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        g.merge_node(0, 1).unwrap();
        let dc = degree_centrality(&g);
        assert_eq!(dc.nodes, [1, 2, 3]);
        let bc = betweenness_centrality(&g, &exact(), &Never).unwrap();
        assert_eq!(bc.nodes, [1, 2, 3]);
        assert_close(&bc.values, &[0.0, 1.0, 0.0], 1e-12);
        assert_eq!(bc.by_node_id(4), [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn measure_names_round_trip() {
        for m in Measure::ALL {
            assert_eq!(m.short_name().parse::<Measure>().unwrap(), m);
        }
        assert!("xx".parse::<Measure>().is_err());
    }

    struct AlwaysCancelled;
    impl Cancel for AlwaysCancelled {
        fn is_cancelled(&self) -> bool {
            true
        }
    }

    #[test]
    fn cancellation_interrupts() {
        assert_eq!(closeness_centrality(&k4(), &AlwaysCancelled), Err(Error::Interrupted));
        assert_eq!(
            betweenness_centrality(&k4(), &exact(), &AlwaysCancelled),
            Err(Error::Interrupted)
        );
    }
}
