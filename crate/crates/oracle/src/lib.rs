//! Brute-force references for tests.
//!
//! Everything here works from plain edge lists and dense matrices and shares
//! no code with `gck-core`, so tests can pit the two against each other.

pub use nalgebra;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Edges = [(usize, usize)];

/// Dense symmetric 0/1 adjacency, self-loops and duplicates ignored.
pub fn adjacency(n: usize, edges: &Edges) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in edges {
        if u != v {
            a[u][v] = true;
            a[v][u] = true;
        }
    }
    a
}

pub fn degrees(n: usize, edges: &Edges) -> Vec<f64> {
    adjacency(n, edges)
        .iter()
        .map(|row| row.iter().filter(|&&x| x).count() as f64)
        .collect()
}

/// Floyd-Warshall hop distances; `None` when unreachable.
pub fn distances(n: usize, edges: &Edges) -> Vec<Vec<Option<usize>>> {
    let a = adjacency(n, edges);
    let mut d = vec![vec![None; n]; n];
    for i in 0..n {
        d[i][i] = Some(0);
        for j in 0..n {
            if a[i][j] {
                d[i][j] = Some(1);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|cur| x + y < cur) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

/// Number of shortest paths between every pair.
pub fn shortest_path_counts(n: usize, edges: &Edges) -> Vec<Vec<f64>> {
    let a = adjacency(n, edges);
    let d = distances(n, edges);
    let mut sigma = vec![vec![0.0; n]; n];
    for s in 0..n {
        let mut by_dist: Vec<usize> = (0..n).filter(|&t| d[s][t].is_some()).collect();
        by_dist.sort_by_key(|&t| d[s][t]);
        for &t in &by_dist {
            if t == s {
                sigma[s][t] = 1.0;
                continue;
            }
            let dt = d[s][t].unwrap();
            sigma[s][t] = (0..n)
                .filter(|&w| a[w][t] && d[s][w] == Some(dt - 1))
                .map(|w| sigma[s][w])
                .sum();
        }
    }
    sigma
}

/// Sum over unordered pairs `{s, t}` not containing `v` of the share of
/// shortest `s-t` paths through `v`.
pub fn betweenness(n: usize, edges: &Edges) -> Vec<f64> {
    let d = distances(n, edges);
    let sigma = shortest_path_counts(n, edges);
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let Some(dst) = d[s][t] else { continue };
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                if let (Some(a), Some(b)) = (d[s][v], d[v][t]) {
                    if a + b == dst {
                        bc[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
                    }
                }
            }
        }
    }
    bc
}

/// Closeness with component scaling: `(r-1)^2 / ((n-1) * sum of distances)`.
pub fn closeness(n: usize, edges: &Edges) -> Vec<f64> {
    let d = distances(n, edges);
    (0..n)
        .map(|v| {
            let reach: Vec<usize> = d[v].iter().flatten().copied().collect();
            let r = reach.len() as f64 - 1.0;
            let total: usize = reach.iter().sum();
            if r <= 0.0 || n < 2 {
                0.0
            } else {
                r * r / ((n as f64 - 1.0) * total as f64)
            }
        })
        .collect()
}

/// PageRank from a dense linear solve, dangling columns replaced by `1/n`.
pub fn pagerank(n: usize, edges: &Edges, alpha: f64) -> Vec<f64> {
    let a = adjacency(n, edges);
    let deg = degrees(n, edges);
    let mut m = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            let p = if deg[j] == 0.0 {
                1.0 / n as f64
            } else if a[i][j] {
                1.0 / deg[j]
            } else {
                0.0
            };
            m[(i, j)] -= alpha * p;
        }
    }
    let b = DVector::from_element(n, (1.0 - alpha) / n as f64);
    let p = m.lu().solve(&b).expect("I - aP is invertible for a < 1");
    let total = p.sum();
    p.iter().map(|x| x / total).collect()
}

pub fn dense_adjacency(n: usize, edges: &Edges) -> DMatrix<f64> {
    let a = adjacency(n, edges);
    DMatrix::from_fn(n, n, |i, j| if a[i][j] { 1.0 } else { 0.0 })
}

/// Limit of power iteration from the uniform vector: the uniform vector
/// projected onto the top eigenspace of `A`, normalized.
pub fn eigenvector(n: usize, edges: &Edges) -> Vec<f64> {
    let eig = SymmetricEigen::new(dense_adjacency(n, edges));
    let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut proj = DVector::zeros(n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if (lambda - top).abs() < 1e-9 {
            let u = eig.eigenvectors.column(k);
            proj += u * u.dot(&start);
        }
    }
    let norm = proj.norm();
    proj.iter().map(|x| (x / norm).abs()).collect()
}

/// `D^-1/2 (A + I) D^-1/2`, dense.
pub fn normalized_adjacency(n: usize, edges: &Edges) -> DMatrix<f64> {
    let a = dense_adjacency(n, edges) + DMatrix::identity(n, n);
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d[i] * d[j]).sqrt())
}

/// Dense `[X, ÃX, ..., Ã^hops X]`, each power formed explicitly.
pub fn sign_features(n: usize, edges: &Edges, x: &DMatrix<f64>, hops: usize) -> DMatrix<f64> {
    let a = normalized_adjacency(n, edges);
    let mut power = DMatrix::identity(n, n);
    let mut blocks = Vec::new();
    for _ in 0..=hops {
        blocks.push(&power * x);
        power = &a * &power;
    }
    let cols = x.ncols();
    DMatrix::from_fn(n, cols * (hops + 1), |i, j| blocks[j / cols][(i, j % cols)])
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Outcome of [`simulate_collapse`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulatedCollapse {
    pub alive: Vec<bool>,
    /// Surviving edges `(u, v)`, `u < v`, in original ids, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Final home of each node; `None` if dropped without a merge.
    pub survivor_of: Vec<Option<usize>>,
}

/// Literal, quadratic-time replay of the cluster-by-cluster collapse loop:
/// take the weakest remaining member, move its edges to its strongest
/// neighbor (lowest id on ties), drop it, repeat until the budget holds.
pub fn simulate_collapse(
    n: usize,
    edges: &Edges,
    phi: &[f64],
    cluster_of: &[usize],
    budgets: &[usize],
) -> SimulatedCollapse {
    let mut adj = adjacency(n, edges);
    let mut alive = vec![true; n];
    let mut target: Vec<Option<usize>> = (0..n).map(Some).collect();
    for (c, &budget) in budgets.iter().enumerate() {
        let mut group: Vec<usize> = (0..n).filter(|&v| cluster_of[v] == c).collect();
        loop {
            if group.len() <= budget {
                break;
            }
            // weakest: lowest phi, then lowest id
            let (pos, &v_k) = group
                .iter()
                .enumerate()
                .min_by(|a, b| phi[*a.1].partial_cmp(&phi[*b.1]).unwrap().then(a.1.cmp(b.1)))
                .unwrap();
            group.remove(pos);
            let mut v_s: Option<usize> = None;
            for w in 0..n {
                if adj[v_k][w] && v_s.is_none_or(|s| phi[w] > phi[s]) {
                    v_s = Some(w);
                }
            }
            for w in 0..n {
                if adj[v_k][w] {
                    adj[v_k][w] = false;
                    adj[w][v_k] = false;
                    if let Some(s) = v_s {
                        if w != s {
                            adj[w][s] = true;
                            adj[s][w] = true;
                        }
                    }
                }
            }
            alive[v_k] = false;
            target[v_k] = v_s;
        }
    }
    let survivor_of = (0..n)
        .map(|v| {
            let mut cur = target[v];
            while let Some(c) = cur {
                if alive[c] {
                    break;
                }
                cur = target[c];
            }
            cur
        })
        .collect();
    let mut out_edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if adj[u][v] {
                out_edges.push((u, v));
            }
        }
    }
    SimulatedCollapse {
        alive,
        edges: out_edges,
        survivor_of,
    }
}

/// Full-batch logistic regression by gradient descent; returns training
/// accuracy. `x` rows are samples, `y` is 0/1.
pub fn logistic_regression_accuracy(x: &[Vec<f64>], y: &[bool], epochs: usize, lr: f64) -> f64 {
    let dims = x[0].len();
    let mut w = vec![0.0; dims];
    let mut b = 0.0;
    let n = x.len() as f64;
    for _ in 0..epochs {
        let mut gw = vec![0.0; dims];
        let mut gb = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            let z: f64 = xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
            let err = 1.0 / (1.0 + (-z).exp()) - if yi { 1.0 } else { 0.0 };
            gw.iter_mut().zip(xi).for_each(|(g, xv)| *g += err * xv);
            gb += err;
        }
        w.iter_mut().zip(&gw).for_each(|(wv, g)| *wv -= lr * g / n);
        b -= lr * gb / n;
    }
    let correct = x
        .iter()
        .zip(y)
        .filter(|(xi, &yi)| {
            let z: f64 = xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
            (z > 0.0) == yi
        })
        .count();
    correct as f64 / n
}
