//! Mutable undirected graph with edge contraction.
//!
//! Adjacency is a per-node ordered set. Contraction moves edges around one
//! node at a time, which is awkward in CSR; the frozen CSR form is produced
//! on demand by [`Graph::to_csr`] for the read-heavy stages.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::attributes::AttributeSet;
use crate::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<BTreeSet<NodeId>>,
    alive: Vec<bool>,
    alive_count: usize,
    edge_count: usize,
}

impl Graph {
    /// `num_nodes` isolated, alive nodes.
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            adjacency: vec![BTreeSet::new(); num_nodes],
            alive: vec![true; num_nodes],
            alive_count: num_nodes,
            edge_count: 0,
        }
    }

    /// Builds a simple graph from an edge list. Duplicates (in either
    /// direction) collapse into one edge and self-loops are dropped.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut g = Self::empty(num_nodes);
        let mut self_loops = 0usize;
        for (u, v) in edges {
            for id in [u, v] {
                if id >= num_nodes {
                    return Err(Error::NodeOutOfRange { id, num_nodes });
                }
            }
            if u == v {
                self_loops += 1;
                continue;
            }
            g.insert_edge(u, v);
        }
        if self_loops > 0 {
            log::warn!("dropped {self_loops} self-loop(s) while building the graph");
        }
        Ok(g)
    }

    fn insert_edge(&mut self, u: NodeId, v: NodeId) -> bool {
        if self.adjacency[u].insert(v) {
            self.adjacency[v].insert(u);
            self.edge_count += 1;
            true
        } else {
            false
        }
    }

    /// Total number of node slots, dead ones included.
    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    #[inline]
    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn is_alive(&self, v: NodeId) -> bool {
        self.alive.get(v).copied().unwrap_or(false)
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &BTreeSet<NodeId> {
        &self.adjacency[v]
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency.get(u).is_some_and(|n| n.contains(&v))
    }

    /// Alive node ids in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.alive
            .iter()
            .enumerate()
            .filter_map(|(v, &a)| a.then_some(v))
    }

    /// Every edge once, as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, ns)| {
            ns.range(u + 1..).map(move |&v| (u, v))
        })
    }

    fn check_alive(&self, v: NodeId, role: &str) -> Result<()> {
        if v >= self.num_nodes() {
            return Err(Error::NodeOutOfRange {
                id: v,
                num_nodes: self.num_nodes(),
            });
        }
        if !self.alive[v] {
            return Err(Error::ContractViolation(format!(
                "{role} node {v} has already been merged away"
            )));
        }
        Ok(())
    }

    /// Contracts `v_k` into `v_s`: every neighbor of `v_k` other than `v_s`
    /// becomes a neighbor of `v_s`, and `v_k` dies with no edges.
    ///
    /// `v_s` need not be adjacent to `v_k`.
    pub fn merge_node(&mut self, v_k: NodeId, v_s: NodeId) -> Result<()> {
        self.check_alive(v_k, "merged")?;
        self.check_alive(v_s, "target")?;
        if v_k == v_s {
            return Err(Error::ContractViolation(format!(
                "cannot merge node {v_k} into itself"
            )));
        }
        let moved = core::mem::take(&mut self.adjacency[v_k]);
        self.edge_count -= moved.len();
        for w in moved {
            self.adjacency[w].remove(&v_k);
            if w != v_s {
                self.insert_edge(w, v_s);
            }
        }
        self.alive[v_k] = false;
        self.alive_count -= 1;
        Ok(())
    }

    /// Deletes `v` together with its edges.
    pub fn remove_node(&mut self, v: NodeId) -> Result<()> {
        self.check_alive(v, "removed")?;
        let dropped = core::mem::take(&mut self.adjacency[v]);
        self.edge_count -= dropped.len();
        for w in dropped {
            self.adjacency[w].remove(&v);
        }
        self.alive[v] = false;
        self.alive_count -= 1;
        Ok(())
    }

    /// Number of connected components among alive nodes.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.num_nodes()];
        let mut queue = VecDeque::new();
        let mut count = 0;
        for s in self.nodes() {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adjacency[u] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }

    /// Subgraph induced by `keep`, renumbered `0..keep.len()` in ascending
    /// original-id order.
    pub fn induced_subgraph(&self, keep: &[NodeId]) -> Result<(Graph, NodeRemap)> {
        let mut original: Vec<NodeId> = keep.to_vec();
        original.sort_unstable();
        original.dedup();
        for &v in &original {
            self.check_alive(v, "kept")?;
        }
        let remap = NodeRemap { original };
        let mut sub = Graph::empty(remap.len());
        for (local, &orig) in remap.original.iter().enumerate() {
            for &w in self.adjacency[orig].range(orig + 1..) {
                if let Some(lw) = remap.local_of(w) {
                    sub.insert_edge(local, lw);
                }
            }
        }
        Ok((sub, remap))
    }

    /// Drops dead slots, renumbering alive nodes in ascending order.
    pub fn compact(&self) -> (Graph, NodeRemap) {
        let alive: Vec<NodeId> = self.nodes().collect();
        self.induced_subgraph(&alive)
            .expect("alive nodes are always valid")
    }

    /// Frozen CSR adjacency over all slots; dead slots have no neighbors.
    pub fn to_csr(&self) -> Csr {
        let mut offsets = Vec::with_capacity(self.num_nodes() + 1);
        let mut targets = Vec::with_capacity(2 * self.edge_count);
        offsets.push(0);
        for ns in &self.adjacency {
            targets.extend(ns.iter().copied());
            offsets.push(targets.len());
        }
        Csr { offsets, targets }
    }
}

/// Read-only compressed adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

impl Csr {
    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }
}

/// Bijection between a subset of original node ids (kept in ascending
/// order) and the compact range `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeRemap {
    original: Vec<NodeId>,
}

impl NodeRemap {
    pub fn identity(n: usize) -> Self {
        Self {
            original: (0..n).collect(),
        }
    }

    /// `original` must be strictly increasing.
    pub fn from_sorted(original: Vec<NodeId>) -> Result<Self> {
        if original.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "remap ids must be strictly increasing".into(),
            ));
        }
        Ok(Self { original })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.original.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    #[inline]
    pub fn to_original(&self, local: NodeId) -> NodeId {
        self.original[local]
    }

    pub fn local_of(&self, original: NodeId) -> Option<NodeId> {
        self.original.binary_search(&original).ok()
    }

    pub fn originals(&self) -> &[NodeId] {
        &self.original
    }
}

/// Induced subgraph on the training nodes plus their attributes, with ids
/// compacted to `0..|train|`.
pub fn training_subgraph(
    graph: &Graph,
    attrs: &AttributeSet,
) -> Result<(Graph, AttributeSet, NodeRemap)> {
    if attrs.num_nodes() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "graph has {} nodes but attributes have {} rows",
            graph.num_nodes(),
            attrs.num_nodes()
        )));
    }
    let train = attrs.train_nodes();
    if train.is_empty() {
        return Err(Error::EmptyInput("training mask selects no nodes"));
    }
    let (sub, remap) = graph.induced_subgraph(&train)?;
    let sub_attrs = attrs.select(remap.originals());
    Ok((sub, sub_attrs, remap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::{Split, TaskKind};
    use crate::Matrix;
    use alloc::collections::BTreeMap;
    use proptest::prelude::*;

    fn adjacency_map(g: &Graph) -> BTreeMap<NodeId, Vec<NodeId>> {
        g.nodes()
            .map(|v| (v, g.neighbors(v).iter().copied().collect()))
            .collect()
    }

    fn assert_invariants(g: &Graph) {
        let mut degree_sum = 0;
        for v in 0..g.num_nodes() {
            if !g.is_alive(v) {
                assert!(g.neighbors(v).is_empty(), "dead node {v} keeps edges");
            }
            assert!(!g.neighbors(v).contains(&v), "self-loop on {v}");
            for &w in g.neighbors(v) {
                assert!(g.neighbors(w).contains(&v), "asymmetric edge {v}-{w}");
                assert!(g.is_alive(w));
            }
            degree_sum += g.degree(v);
        }
        assert_eq!(degree_sum % 2, 0);
        assert_eq!(degree_sum / 2, g.edge_count());
    }

    #[test]
    fn build_dedups_symmetric_duplicates() {
        let g = Graph::from_edges(3, [(0, 1), (1, 0), (1, 2)]).unwrap();
        let expected = BTreeMap::from([(0, vec![1]), (1, vec![0, 2]), (2, vec![1])]);
        assert_eq!(adjacency_map(&g), expected);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn build_empty_graph() {
        let g = Graph::from_edges(4, []).unwrap();
        assert_eq!(g.alive_count(), 4);
        assert_eq!(g.edge_count(), 0);
        assert!((0..4).all(|v| g.is_alive(v) && g.degree(v) == 0));
    }

    #[test]
    fn build_drops_self_loops() {
        let g = Graph::from_edges(2, [(0, 0), (0, 1)]).unwrap();
        assert_eq!(adjacency_map(&g), BTreeMap::from([(0, vec![1]), (1, vec![0])]));
    }

    #[test]
    fn build_rejects_out_of_range() {
        let err = Graph::from_edges(2, [(0, 2)]).unwrap_err();
        assert_eq!(err, Error::NodeOutOfRange { id: 2, num_nodes: 2 });
    }

    #[test]
    fn merge_on_path_keeps_connectivity() {
        let mut g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        g.merge_node(1, 2).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 2)]);
        assert!(!g.is_alive(1));
        assert_eq!(g.component_count(), 1);
        assert_invariants(&g);
    }

    #[test]
    fn merge_in_triangle_collapses_duplicate() {
        let mut g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        g.merge_node(0, 1).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(1, 2)]);
        assert_invariants(&g);
    }

    #[test]
    fn merge_leaf_into_star_center() {
        let mut g = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        g.merge_node(1, 0).unwrap();
        assert_eq!(adjacency_map(&g), BTreeMap::from([(0, vec![2, 3]), (2, vec![0]), (3, vec![0])]));
        assert_invariants(&g);
    }

    #[test]
    fn merge_contract_violations() {
        let mut g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert!(matches!(g.merge_node(1, 1), Err(Error::ContractViolation(_))));
        g.merge_node(0, 1).unwrap();
        assert!(matches!(g.merge_node(0, 2), Err(Error::ContractViolation(_))));
        assert!(matches!(g.merge_node(2, 0), Err(Error::ContractViolation(_))));
        assert!(matches!(g.merge_node(7, 2), Err(Error::NodeOutOfRange { .. })));
    }

    fn attrs_with_train(n: usize, train: &[usize]) -> AttributeSet {
        let features = Matrix::from_vec(n, 1, (0..n).map(|v| v as f64).collect()).unwrap();
        let mut labels = Matrix::zeros(n, 1);
        for v in 0..n {
            labels.set(v, 0, 1.0);
        }
        let split = (0..n)
            .map(|v| if train.contains(&v) { Split::Train } else { Split::Test })
            .collect();
        AttributeSet::new(features, labels, split, TaskKind::MultiClass).unwrap()
    }

    #[test]
    fn training_subgraph_of_cycle() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let attrs = attrs_with_train(4, &[0, 1, 2]);
        let (sub, sub_attrs, remap) = training_subgraph(&g, &attrs).unwrap();
        assert_eq!(sub.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(remap.originals(), &[0, 1, 2]);
        assert_eq!(sub_attrs.features().as_slice(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn training_subgraph_identity_and_singleton() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let (sub, _, remap) = training_subgraph(&g, &attrs_with_train(4, &[0, 1, 2, 3])).unwrap();
        assert_eq!(sub, g);
        assert_eq!(remap, NodeRemap::identity(4));

        let (sub, _, remap) = training_subgraph(&g, &attrs_with_train(4, &[0])).unwrap();
        assert_eq!(sub.alive_count(), 1);
        assert_eq!(sub.edge_count(), 0);
        assert_eq!(remap.originals(), &[0]);
    }

    #[test]
    fn training_subgraph_requires_train_nodes() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let err = training_subgraph(&g, &attrs_with_train(2, &[])).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn compact_renumbers_alive_nodes() {
        let mut g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        g.merge_node(1, 2).unwrap();
        let (c, remap) = g.compact();
        assert_eq!(remap.originals(), &[0, 2, 3]);
        assert_eq!(c.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (2usize..20).prop_flat_map(|n| (Just(n), proptest::collection::vec((0..n, 0..n), 0..40)))
    }

    proptest! {
        #[test]
        fn merges_never_split_components(
            (n, edges) in arb_graph(),
            picks in proptest::collection::vec((any::<usize>(), any::<usize>()), 1..20),
        ) {
            let mut g = Graph::from_edges(n, edges).unwrap();
            let mut components = g.component_count();
            for (a, b) in picks {
                let alive: Vec<_> = g.nodes().collect();
                if alive.len() < 2 {
                    break;
                }
                let v_k = alive[a % alive.len()];
                let others: Vec<_> = alive.iter().copied().filter(|&v| v != v_k).collect();
                let v_s = others[b % others.len()];
                let before = g.alive_count();
                g.merge_node(v_k, v_s).unwrap();
                prop_assert_eq!(g.alive_count(), before - 1);
                let now = g.component_count();
                prop_assert!(now <= components);
                components = now;
                assert_invariants(&g);
            }
        }
    }
}
