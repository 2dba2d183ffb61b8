use gck_core::centrality::{self, CentralityParams, Measure};
use gck_core::cluster::{self, ClusterAssignment};
use gck_core::collapse::{self, collapse_clusters, CollapseParams};
use gck_core::quant::{dequantize, quantize};
use gck_core::sign::{normalized_adjacency, sign_features};
use gck_core::{AttributeSet, Graph, Matrix, Never, Split, TaskKind};
use proptest::prelude::*;

fn graph_strategy(max_nodes: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..=max_nodes).prop_flat_map(|n| {
        let edges = prop::collection::vec((0..n, 0..n), 0..n * 3);
        (Just(n), edges)
    })
}

fn attrs_for(n: usize, classes: &[usize], labels: usize) -> AttributeSet {
    let features = Matrix::from_vec(n, 2, (0..2 * n).map(|i| (i % 7) as f64).collect()).unwrap();
    let y = AttributeSet::one_hot(classes, labels).unwrap();
    AttributeSet::new(features, y, vec![Split::Train; n], TaskKind::MultiClass).unwrap()
}

fn exact() -> CentralityParams {
    CentralityParams {
        bc_samples: None,
        tol: 1e-12,
        max_iter: 100_000,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_betweenness_and_closeness_match_brute_force((n, edges) in graph_strategy(14)) {
        let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
        let bc = centrality::betweenness_centrality(&g, &exact(), &Never).unwrap();
        let cc = centrality::closeness_centrality(&g, &Never).unwrap();
        let (bo, co) = (gck_oracle::betweenness(n, &edges), gck_oracle::closeness(n, &edges));
        for v in 0..n {
            prop_assert!((bc.values[v] - bo[v]).abs() < 1e-9);
            prop_assert!((cc.values[v] - co[v]).abs() < 1e-12);
        }
    }

    #[test]
    fn pagerank_is_a_distribution((n, edges) in graph_strategy(20)) {
        let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
        let pr = centrality::pagerank_centrality(&g, &exact(), &Never).unwrap();
        prop_assert!((pr.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let oracle = gck_oracle::pagerank(n, &edges, 0.85);
        for v in 0..n {
            prop_assert!((pr.values[v] - oracle[v]).abs() < 1e-9);
        }
    }

    #[test]
    fn collapse_hits_budget_and_maps_to_survivors(
        (n, edges) in graph_strategy(16),
        psi_frac in 0.05f64..1.0,
        eta in 1usize..4,
        seed in 0u64..1000,
    ) {
        let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
        let classes: Vec<usize> = (0..n).map(|v| (v * 7 + seed as usize) % 2).collect();
        let attrs = attrs_for(n, &classes, 2);
        let psi = ((psi_frac * n as f64).ceil() as usize).clamp(1, n);
        let params = CollapseParams { eta: eta.min(n), ..CollapseParams::new(psi, Measure::Degree).with_seed(seed) };
        let out = collapse::feature_label_collapse(&g, &attrs, &params, &Never).unwrap();
        let nonempty = out.clusters.sizes().iter().filter(|&&s| s > 0).count();
        if psi >= nonempty {
            prop_assert_eq!(out.survivor_count, psi);
        }
        prop_assert_eq!(out.survivors.len(), out.survivor_count);
        prop_assert_eq!(out.attrs.num_nodes(), out.survivor_count);
        for v in 0..n {
            if let Some(s) = out.merge_map.survivor_of(v) {
                prop_assert!(out.survivors.local_of(s).is_some());
            }
        }
        for &s in out.survivors.originals() {
            prop_assert_eq!(out.merge_map.survivor_of(s), Some(s));
        }
        prop_assert!(out.graph.component_count() <= g.component_count());
    }

    #[test]
    fn collapse_matches_literal_simulation(
        (n, edges) in graph_strategy(10),
        budget_seed in prop::collection::vec(0usize..10, 3),
        cluster_seed in prop::collection::vec(0usize..3, 10),
        phi_seed in prop::collection::vec(0u8..4, 10),
    ) {
        let cluster_of: Vec<usize> = cluster_seed[..n].to_vec();
        let phi: Vec<f64> = phi_seed[..n].iter().map(|&p| p as f64).collect();
        let sizes: Vec<usize> = (0..3).map(|c| cluster_of.iter().filter(|&&x| x == c).count()).collect();
        let budgets: Vec<usize> = sizes.iter().zip(&budget_seed).map(|(&s, &b)| b.min(s)).collect();
        let mut g = Graph::from_edges(n, edges.iter().copied()).unwrap();
        let trace = collapse_clusters(&mut g, &phi, &cluster_of, &budgets).unwrap();
        let sim = gck_oracle::simulate_collapse(n, &edges, &phi, &cluster_of, &budgets);
        prop_assert_eq!(g.edges().collect::<Vec<_>>(), sim.edges);
        prop_assert_eq!(trace.merge_map.as_slice(), &sim.survivor_of[..]);
        for v in 0..n {
            prop_assert_eq!(g.is_alive(v), sim.alive[v]);
        }
    }

    #[test]
    fn quantization_error_is_half_a_step(
        values in prop::collection::vec(-1e3f64..1e3, 1..200),
        bits in 1u8..=8,
        group in 1usize..40,
    ) {
        let h = Matrix::from_vec(1, values.len(), values.clone()).unwrap();
        let q = quantize(&h, bits, group).unwrap();
        let d = dequantize(&q).unwrap();
        let top = ((1u32 << bits) - 1) as f64;
        for (i, (&a, &b)) in values.iter().zip(d.as_slice()).enumerate() {
            let r = q.ranges()[i / group];
            prop_assert!((a - b).abs() <= r / (2.0 * top) * (1.0 + 1e-12) + 1e-12);
        }
        let again = quantize(&d, bits, group).unwrap();
        prop_assert_eq!(again.codes(), q.codes());
    }

    #[test]
    fn normalized_adjacency_is_symmetric_and_contractive((n, edges) in graph_strategy(30)) {
        let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
        let a = normalized_adjacency(&g);
        prop_assert!(a.is_symmetric());
        let dense = gck_oracle::normalized_adjacency(n, &edges);
        for i in 0..n {
            for j in 0..n {
                prop_assert!((a.get(i, j) - dense[(i, j)]).abs() < 1e-15);
            }
        }
        prop_assert!(gck_oracle::spectral_radius(&dense) <= 1.0 + 1e-9);
    }

    #[test]
    fn budgets_sum_to_psi(sizes in prop::collection::vec(0usize..50, 1..8), frac in 0.0f64..1.0) {
        let total: usize = sizes.iter().sum();
        prop_assume!(total > 0);
        let psi = ((frac * total as f64) as usize).max(1);
        let b = cluster::distribute_budget(&sizes, psi).unwrap();
        prop_assert_eq!(b.iter().sum::<usize>(), psi);
        for (bi, si) in b.iter().zip(&sizes) {
            prop_assert!(bi <= si);
        }
    }
}

#[test]
fn sign_matches_dense_powers() {
    let edges: Vec<(usize, usize)> = (0..40).map(|i| (i, (i * 7 + 3) % 40)).collect();
    let g = Graph::from_edges(40, edges.iter().copied()).unwrap();
    let x = Matrix::from_vec(40, 3, (0..120).map(|i| ((i * 13) % 17) as f64 - 8.0).collect()).unwrap();
    let z = sign_features(&normalized_adjacency(&g), &x, 3).unwrap();
    let xd = gck_oracle::nalgebra::DMatrix::from_row_slice(40, 3, x.as_slice());
    let oracle = gck_oracle::sign_features(40, &edges, &xd, 3);
    for r in 0..40 {
        for c in 0..12 {
            assert!((z.z.get(r, c) - oracle[(r, c)]).abs() < 1e-9);
        }
    }
}

#[test]
fn single_cluster_collapse_equals_agnostic() {
    let edges: Vec<(usize, usize)> = (0..29).map(|i| (i, i + 1)).chain([(0, 10), (5, 20)]).collect();
    let g = Graph::from_edges(30, edges).unwrap();
    let classes: Vec<usize> = (0..30).map(|v| v % 3).collect();
    let attrs = attrs_for(30, &classes, 3);
    let params = CollapseParams { eta: 1, ..CollapseParams::new(12, Measure::PageRank) };
    let a = collapse::feature_label_collapse(&g, &attrs, &params, &Never).unwrap();
    let b = collapse::agnostic_collapse(&g, &attrs, 12, Measure::PageRank, &params.centrality, &Never).unwrap();
    assert_eq!(a.graph, b.graph);
    assert_eq!(a.merge_map, b.merge_map);
    assert_eq!(a.clusters, ClusterAssignment::single(30));
}
