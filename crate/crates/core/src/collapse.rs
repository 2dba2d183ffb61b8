//! Centrality-driven graph collapse under a feature-label constraint.
//!
//! Nodes are grouped by K-Means on the feature-label matrix, the node budget
//! is split across groups in proportion to their size, and each group is
//! shrunk by repeatedly contracting its weakest node into that node's
//! strongest alive neighbor. Centrality is computed once, before any merge.
//! With a single group this is the feature-label-agnostic collapse.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::centrality::{self, CentralityParams, CentralityScores, Measure};
use crate::cluster::{self, ClusterAssignment, KMeansConfig};
use crate::graph::{Graph, NodeId, NodeRemap};
use crate::{AttributeSet, Cancel, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseParams {
    /// Surviving training nodes.
    pub psi: usize,
    /// Feature-label clusters.
    pub eta: usize,
    pub gamma: f64,
    pub measure: Measure,
    pub centrality: CentralityParams,
    pub kmeans: KMeansConfig,
}

impl CollapseParams {
    pub fn new(psi: usize, measure: Measure) -> Self {
        Self {
            psi,
            eta: 100,
            gamma: 0.5,
            measure,
            centrality: CentralityParams::default(),
            kmeans: KMeansConfig::default(),
        }
    }

    /// Seeds both betweenness sampling and K-Means.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.centrality.seed = seed;
        self.kmeans.seed = seed;
        self
    }
}

/// Where every input node ended up. Merged nodes point at the node that
/// absorbed them (after following chains of merges); isolated nodes removed
/// without a merge map to `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeMap {
    survivor_of: Vec<Option<NodeId>>,
}

impl MergeMap {
    pub fn identity(n: usize) -> Self {
        Self {
            survivor_of: (0..n).map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.survivor_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.survivor_of.is_empty()
    }

    pub fn survivor_of(&self, v: NodeId) -> Option<NodeId> {
        self.survivor_of[v]
    }

    pub fn as_slice(&self) -> &[Option<NodeId>] {
        &self.survivor_of
    }

    pub fn is_survivor(&self, v: NodeId) -> bool {
        self.survivor_of[v] == Some(v)
    }

    /// Surviving ids, ascending.
    pub fn survivors(&self) -> Vec<NodeId> {
        (0..self.len()).filter(|&v| self.is_survivor(v)).collect()
    }

    fn compress(&mut self) {
        for v in 0..self.survivor_of.len() {
            let mut cur = self.survivor_of[v];
            while let Some(c) = cur {
                let next = self.survivor_of[c];
                if next == Some(c) {
                    break;
                }
                cur = next;
            }
            self.survivor_of[v] = cur;
        }
    }
}

/// One removal performed by [`collapse_clusters`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeStep {
    pub removed: NodeId,
    /// `None` when the node had no alive neighbor and was dropped.
    pub into: Option<NodeId>,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollapseTrace {
    pub merge_map: MergeMap,
    pub steps: Vec<MergeStep>,
    pub removed_per_cluster: Vec<usize>,
}

/// Picks the highest-scoring candidate; equal scores go to the lowest id.
pub fn tie_break<I>(candidates: I, phi: &[f64]) -> Option<NodeId>
where
    I: IntoIterator<Item = NodeId>,
{
    candidates.into_iter().fold(None, |best, v| match best {
        Some(b) if phi[b] > phi[v] || (phi[b] == phi[v] && b < v) => Some(b),
        _ => Some(v),
    })
}

/// Runs the per-cluster contraction loop on `graph` in place.
///
/// `phi` and `cluster_of` are indexed by node id; `budgets[i]` is how many
/// members of cluster `i` survive. Clusters are processed in index order and
/// inside a cluster nodes go in ascending `(phi, id)` order, fixed up front.
pub fn collapse_clusters(
    graph: &mut Graph,
    phi: &[f64],
    cluster_of: &[usize],
    budgets: &[usize],
) -> Result<CollapseTrace> {
    let n = graph.num_nodes();
    if phi.len() != n || cluster_of.len() != n {
        return Err(Error::Shape(format!(
            "graph has {n} nodes, scores {} and cluster labels {}",
            phi.len(),
            cluster_of.len()
        )));
    }
    if graph.alive_count() != n {
        return Err(Error::ContractViolation(
            "collapse expects a graph without merged-away nodes".into(),
        ));
    }
    if phi.iter().any(|p| !p.is_finite()) {
        return Err(Error::Data("centrality scores must be finite".into()));
    }
    let eta = budgets.len();
    let mut members = vec![Vec::new(); eta];
    for (v, &c) in cluster_of.iter().enumerate() {
        if c >= eta {
            return Err(Error::Shape(format!(
                "node {v} is in cluster {c} but only {eta} budgets were given"
            )));
        }
        members[c].push(v);
    }

    let mut merge_map = MergeMap::identity(n);
    let mut steps = Vec::new();
    let mut removed_per_cluster = vec![0; eta];
    for (c, nodes) in members.iter_mut().enumerate() {
        let quota = nodes.len().saturating_sub(budgets[c]);
        nodes.sort_by(|&a, &b| phi[a].total_cmp(&phi[b]).then(a.cmp(&b)));
        for &v_k in nodes.iter().take(quota) {
            debug_assert!(graph.is_alive(v_k));
            let v_s = tie_break(graph.neighbors(v_k).iter().copied(), phi);
            match v_s {
                Some(v_s) => graph.merge_node(v_k, v_s)?,
                None => graph.remove_node(v_k)?,
            }
            merge_map.survivor_of[v_k] = v_s;
            steps.push(MergeStep {
                removed: v_k,
                into: v_s,
                cluster: c,
            });
            removed_per_cluster[c] += 1;
        }
    }
    merge_map.compress();
    Ok(CollapseTrace {
        merge_map,
        steps,
        removed_per_cluster,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseResult {
    /// Collapsed graph with survivors renumbered `0..survivor_count`.
    pub graph: Graph,
    /// Survivor rows, copied unchanged from the input.
    pub attrs: AttributeSet,
    /// Compact id to input id.
    pub survivors: NodeRemap,
    pub merge_map: MergeMap,
    pub survivor_count: usize,
    pub budgets: Vec<usize>,
    pub per_cluster_removed: Vec<usize>,
    pub clusters: ClusterAssignment,
    pub centrality: CentralityScores,
}

fn check_inputs(graph: &Graph, attrs: &AttributeSet, psi: usize) -> Result<()> {
    if attrs.num_nodes() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "graph has {} nodes but attributes have {} rows",
            graph.num_nodes(),
            attrs.num_nodes()
        )));
    }
    if psi == 0 || psi > graph.alive_count() {
        return Err(Error::InvalidParameter(format!(
            "node budget {psi} must lie in 1..={}",
            graph.alive_count()
        )));
    }
    Ok(())
}

/// Collapse with precomputed centrality and clusters. Lets budget sweeps
/// reuse the expensive stages.
pub fn collapse_with(
    graph: &Graph,
    attrs: &AttributeSet,
    psi: usize,
    centrality: &CentralityScores,
    clusters: &ClusterAssignment,
) -> Result<CollapseResult> {
    check_inputs(graph, attrs, psi)?;
    if centrality.len() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "{} centrality scores for {} nodes",
            centrality.len(),
            graph.num_nodes()
        )));
    }
    let phi = centrality.by_node_id(graph.num_nodes());
    let budgets = cluster::distribute_budget(&clusters.sizes(), psi)?;
    let mut collapsed = graph.clone();
    let trace = collapse_clusters(&mut collapsed, &phi, &clusters.cluster_of, &budgets)?;
    let (graph, survivors) = collapsed.compact();
    let attrs = attrs.select(survivors.originals());
    Ok(CollapseResult {
        survivor_count: graph.alive_count(),
        graph,
        attrs,
        survivors,
        merge_map: trace.merge_map,
        budgets,
        per_cluster_removed: trace.removed_per_cluster,
        clusters: clusters.clone(),
        centrality: centrality.clone(),
    })
}

/// The full collapse: centrality, feature-label clustering, proportional
/// budgets, then per-cluster contraction.
pub fn feature_label_collapse<C: Cancel>(
    graph: &Graph,
    attrs: &AttributeSet,
    params: &CollapseParams,
    cancel: &C,
) -> Result<CollapseResult> {
    check_inputs(graph, attrs, params.psi)?;
    if graph.alive_count() != graph.num_nodes() {
        return Err(Error::ContractViolation(
            "collapse expects a graph without merged-away nodes".into(),
        ));
    }
    let scores = centrality::compute(graph, params.measure, &params.centrality, cancel)?;
    let clusters = if params.eta == 1 {
        ClusterAssignment::single(graph.num_nodes())
    } else {
        let m = cluster::feature_label_matrix(attrs, params.gamma)?;
        cluster::kmeans(&m, params.eta, &params.kmeans, cancel)?
    };
    collapse_with(graph, attrs, params.psi, &scores, &clusters)
}

/// Centrality-only collapse: one global cluster.
pub fn agnostic_collapse<C: Cancel>(
    graph: &Graph,
    attrs: &AttributeSet,
    psi: usize,
    measure: Measure,
    centrality: &CentralityParams,
    cancel: &C,
) -> Result<CollapseResult> {
    let params = CollapseParams {
        psi,
        eta: 1,
        gamma: 0.5,
        measure,
        centrality: *centrality,
        kmeans: KMeansConfig::default(),
    };
    feature_label_collapse(graph, attrs, &params, cancel)
}
