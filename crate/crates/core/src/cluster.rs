//! Feature-label clustering.
//!
//! Features and labels are min-max scaled, weighted so that neither side
//! dominates the squared Euclidean distance just by having more columns,
//! and concatenated into one matrix `M = [sqrt(alpha) X | sqrt(beta) Y]`.
//! Plain K-Means on `M` then sees
//!
//! ```text
//! d(i, j)^2 = alpha * |x_i - x_j|^2 + beta * |y_i - y_j|^2
//! alpha = gamma * max(F, L) / F,   beta = (1 - gamma) * max(F, L) / L
//! ```
//!
//! with `gamma = 1` looking only at features and `gamma = 0` only at labels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attributes::AttributeSet;
use crate::{Cancel, Error, Matrix, Result};

/// Per-column min-max scaling into `[0, 1]`. Constant columns become 0.
pub fn scale_normalize(x: &Matrix) -> Matrix {
    let (rows, cols) = x.shape();
    let mut out = x.clone();
    for c in 0..cols {
        let (lo, hi) = (0..rows).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            let v = x.get(r, c);
            (lo.min(v), hi.max(v))
        });
        let range = hi - lo;
        for r in 0..rows {
            let v = if range > 0.0 { (x.get(r, c) - lo) / range } else { 0.0 };
            out.set(r, c, v);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub feature_dim: usize,
    pub label_dim: usize,
}

impl NormalizationParams {
    pub fn new(gamma: f64, feature_dim: usize, label_dim: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if feature_dim == 0 || label_dim == 0 {
            return Err(Error::Shape(format!(
                "need at least one feature and one label column, got F={feature_dim} L={label_dim}"
            )));
        }
        let widest = feature_dim.max(label_dim) as f64;
        Ok(Self {
            gamma,
            alpha: gamma * widest / feature_dim as f64,
            beta: (1.0 - gamma) * widest / label_dim as f64,
            feature_dim,
            label_dim,
        })
    }

    /// Share of the metric given to the feature term.
    pub fn feature_share(&self) -> f64 {
        let per_f = self.alpha * self.feature_dim as f64;
        let per_l = self.beta * self.label_dim as f64;
        if per_f + per_l == 0.0 {
            0.0
        } else {
            per_f / (per_f + per_l)
        }
    }
}

/// `M = [sqrt(alpha) X | sqrt(beta) Y]` for already scale-normalized inputs.
pub fn build_feature_label_matrix(x: &Matrix, y: &Matrix, gamma: f64) -> Result<Matrix> {
    if x.rows() != y.rows() {
        return Err(Error::Shape(format!(
            "features have {} rows but labels have {}",
            x.rows(),
            y.rows()
        )));
    }
    let p = NormalizationParams::new(gamma, x.cols(), y.cols())?;
    let (sa, sb) = (libm::sqrt(p.alpha), libm::sqrt(p.beta));
    let cols = x.cols() + y.cols();
    let mut data = Vec::with_capacity(x.rows() * cols);
    for r in 0..x.rows() {
        data.extend(x.row(r).iter().map(|v| sa * v));
        data.extend(y.row(r).iter().map(|v| sb * v));
    }
    Matrix::from_vec(x.rows(), cols, data)
}

/// Normalizes the attribute columns and builds `M` from them.
pub fn feature_label_matrix(attrs: &AttributeSet, gamma: f64) -> Result<Matrix> {
    build_feature_label_matrix(
        &scale_normalize(attrs.features()),
        &scale_normalize(attrs.labels()),
        gamma,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub cluster_of: Vec<usize>,
    pub eta: usize,
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
}

impl ClusterAssignment {
    /// Every row in cluster 0.
    pub fn single(rows: usize) -> Self {
        Self {
            cluster_of: vec![0; rows],
            eta: 1,
            centroids: Matrix::zeros(1, 0),
            inertia: 0.0,
            iterations: 0,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.eta];
        for &c in &self.cluster_of {
            sizes[c] += 1;
        }
        sizes
    }

    /// Member rows of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.eta];
        for (v, &c) in self.cluster_of.iter().enumerate() {
            members[c].push(v);
        }
        members
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid (lowest index on ties) and its squared distance.
fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.row_iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(m: &Matrix, centroids: &Matrix) -> Vec<(usize, f64)> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..m.rows())
            .into_par_iter()
            .map(|r| nearest(m.row(r), centroids))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        m.row_iter().map(|row| nearest(row, centroids)).collect()
    }
}

/// k-means++ seeding.
fn seed_centroids(m: &Matrix, eta: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = m.rows();
    let mut centroids = Matrix::zeros(eta, m.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(m.row(first));
    let mut d2: Vec<f64> = m.row_iter().map(|r| sq_dist(r, m.row(first))).collect();
    for c in 1..eta {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // every point coincides with a chosen center
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(m.row(pick));
        for (i, row) in m.row_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(row, m.row(pick)));
        }
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// A cluster that ends an assignment step empty takes the point farthest
/// from its own centroid among clusters with more than one member.
pub fn kmeans<C: Cancel>(m: &Matrix, eta: usize, config: &KMeansConfig, cancel: &C) -> Result<ClusterAssignment> {
    let n = m.rows();
    if eta == 0 {
        return Err(Error::InvalidParameter("cluster count must be positive".into()));
    }
    if eta > n {
        return Err(Error::InvalidParameter(format!(
            "cannot form {eta} clusters from {n} rows"
        )));
    }
    if !m.all_finite() {
        return Err(Error::Data("clustering input contains NaN or infinite values".into()));
    }
    let dims = m.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = seed_centroids(m, eta, &mut rng);
    let mut cluster_of = vec![0usize; n];
    let mut iterations = 0;

    while iterations < config.max_iter {
        cancel.check()?;
        iterations += 1;
        let nearest = assign(m, &centroids);
        let mut dist: Vec<f64> = Vec::with_capacity(n);
        let mut counts = vec![0usize; eta];
        for (i, (c, d)) in nearest.into_iter().enumerate() {
            cluster_of[i] = c;
            dist.push(d);
            counts[c] += 1;
        }

        for empty in 0..eta {
            if counts[empty] != 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| counts[cluster_of[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                })
                .expect("eta <= n leaves some cluster with two members");
            log::debug!("re-seeding empty cluster {empty} with row {donor}");
            counts[cluster_of[donor]] -= 1;
            cluster_of[donor] = empty;
            counts[empty] = 1;
            dist[donor] = 0.0;
        }

        let mut sums = Matrix::zeros(eta, dims);
        for (i, &c) in cluster_of.iter().enumerate() {
            for (s, v) in sums.row_mut(c).iter_mut().zip(m.row(i)) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..eta {
            let inv = 1.0 / counts[c] as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
            shift = shift.max(libm::sqrt(sq_dist(sums.row(c), centroids.row(c))));
        }
        centroids = sums;
        if shift < config.tol {
            break;
        }
    }

    let inertia = cluster_of
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(m.row(i), centroids.row(c)))
        .sum();
    Ok(ClusterAssignment {
        cluster_of,
        eta,
        centroids,
        inertia,
        iterations,
    })
}

/// Splits `psi` over clusters in proportion to their sizes.
///
/// Largest-remainder rounding (ties to the lower cluster index) makes the
/// budgets sum to `psi` exactly. When `psi` covers every non-empty cluster,
/// each of them keeps at least one node. No budget exceeds its cluster's
/// size; any surplus moves to the largest cluster with room.
pub fn distribute_budget(sizes: &[usize], psi: usize) -> Result<Vec<usize>> {
    if psi == 0 {
        return Err(Error::InvalidParameter("node budget must be positive".into()));
    }
    let total: usize = sizes.iter().sum();
    if psi > total {
        return Err(Error::InvalidParameter(format!(
            "node budget {psi} exceeds the {total} nodes available"
        )));
    }
    let (psi_w, total_w) = (psi as u128, total as u128);
    let mut budgets: Vec<usize> = sizes
        .iter()
        .map(|&s| (psi_w * s as u128 / total_w) as usize)
        .collect();
    let mut leftover = psi - budgets.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..sizes.len()).collect();
    by_remainder.sort_by_key(|&i| core::cmp::Reverse(psi_w * sizes[i] as u128 % total_w));
    for &i in &by_remainder {
        if leftover == 0 {
            break;
        }
        budgets[i] += 1;
        leftover -= 1;
    }

    let non_empty = sizes.iter().filter(|&&s| s > 0).count();
    if psi >= non_empty {
        for i in 0..sizes.len() {
            if sizes[i] > 0 && budgets[i] == 0 {
                let richest = (0..sizes.len())
                    .max_by(|&a, &b| budgets[a].cmp(&budgets[b]).then(b.cmp(&a)))
                    .expect("non-empty size list");
                debug_assert!(budgets[richest] > 1);
                budgets[richest] -= 1;
                budgets[i] = 1;
            }
        }
    }

    let mut surplus = 0;
    for (b, &s) in budgets.iter_mut().zip(sizes) {
        if *b > s {
            surplus += *b - s;
            *b = s;
        }
    }
    while surplus > 0 {
        let target = (0..sizes.len())
            .filter(|&i| budgets[i] < sizes[i])
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .expect("psi <= total leaves room somewhere");
        let moved = surplus.min(sizes[target] - budgets[target]);
        budgets[target] += moved;
        surplus -= moved;
    }
    Ok(budgets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Never;
    use proptest::prelude::*;

    #[test]
    fn scale_normalize_examples() {
        let x = Matrix::from_rows(&[[2.0, 5.0, 0.0], [4.0, 5.0, 0.5], [6.0, 5.0, 1.0]]).unwrap();
        let s = scale_normalize(&x);
        let col = |c| (0..3).map(|r| s.get(r, c)).collect::<Vec<_>>();
        assert_eq!(col(0), [0.0, 0.5, 1.0]);
        assert_eq!(col(1), [0.0, 0.0, 0.0]);
        assert_eq!(col(2), [0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalization_weights() {
        let p = NormalizationParams::new(0.5, 4, 2).unwrap();
        assert_eq!((p.alpha, p.beta), (0.5, 1.0));
        assert_eq!(NormalizationParams::new(1.0, 3, 7).unwrap().beta, 0.0);
        assert_eq!(NormalizationParams::new(0.0, 3, 7).unwrap().alpha, 0.0);
        assert!(NormalizationParams::new(1.5, 3, 7).is_err());
        assert!(NormalizationParams::new(0.5, 0, 7).is_err());
    }

    #[test]
    fn m_examples() {
        let x = Matrix::from_rows(&[[0.0, 0.2, 0.4, 1.0], [1.0, 0.5, 0.0, 0.3]]).unwrap();
        let y = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let m = build_feature_label_matrix(&x, &y, 0.5).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(m.row(0), &[0.0, 0.2 * h, 0.4 * h, h, 1.0, 0.0]);

        let m1 = build_feature_label_matrix(&x, &y, 1.0).unwrap();
        assert!((0..2).all(|r| m1.row(r)[4..] == [0.0, 0.0]));
        assert_eq!(m1.row(1)[..4], *x.row(1));

        let m0 = build_feature_label_matrix(&x, &y, 0.0).unwrap();
        assert!((0..2).all(|r| m0.row(r)[..4] == [0.0; 4]));
        let s2 = core::f64::consts::SQRT_2;
        assert_eq!(m0.row(0)[4..], [s2, 0.0]);

        assert!(matches!(
            build_feature_label_matrix(&x, &Matrix::zeros(3, 2), 0.5),
            Err(Error::Shape(_))
        ));
    }

    fn blobs() -> Matrix {
        // two blobs 10 apart with spread 1
        let mut rows = Vec::new();
        for i in 0..10 {
            let t = i as f64 / 10.0;
            rows.push([t, 1.0 - t]);
            rows.push([10.0 + t, 10.0 - t]);
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn kmeans_separates_blobs() {
        let m = blobs();
        for seed in 0..10 {
            let cfg = KMeansConfig { seed, ..Default::default() };
            let a = kmeans(&m, 2, &cfg, &Never).unwrap();
            // blob membership alternates with row parity
            let c0 = a.cluster_of[0];
            for (i, &c) in a.cluster_of.iter().enumerate() {
                assert_eq!(c == c0, i % 2 == 0, "seed {seed}");
            }
            assert_eq!(a.sizes(), [10, 10]);
        }
    }

    #[test]
    fn kmeans_one_cluster_per_point() {
        let m = blobs();
        let a = kmeans(&m, m.rows(), &KMeansConfig::default(), &Never).unwrap();
        assert_eq!(a.inertia, 0.0);
        assert!(a.sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn kmeans_identical_points_stay_total() {
        let m = Matrix::from_rows(&[[1.0, 1.0]; 5]).unwrap();
        let a = kmeans(&m, 2, &KMeansConfig::default(), &Never).unwrap();
        assert_eq!(a.cluster_of.len(), 5);
        assert!(a.sizes().iter().all(|&s| s >= 1));
        assert!(a.centroids.all_finite());
        assert_eq!(a.inertia, 0.0);
    }

    #[test]
    fn kmeans_parameter_errors() {
        let m = blobs();
        let cfg = KMeansConfig::default();
        assert!(matches!(kmeans(&m, 0, &cfg, &Never), Err(Error::InvalidParameter(_))));
        assert!(matches!(kmeans(&m, 21, &cfg, &Never), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn budget_examples() {
        assert_eq!(distribute_budget(&[50, 30, 20], 50).unwrap(), [25, 15, 10]);
        assert_eq!(distribute_budget(&[3, 3, 3], 5).unwrap(), [2, 2, 1]);
        assert_eq!(distribute_budget(&[17], 9).unwrap(), [9]);
        assert!(distribute_budget(&[3, 3], 0).is_err());
        assert!(distribute_budget(&[3, 3], 7).is_err());
    }

    #[test]
    fn budget_keeps_small_clusters_alive() {
        // 1/100 of 10 rounds to zero; the big cluster gives one up
        assert_eq!(distribute_budget(&[99, 1], 10).unwrap(), [9, 1]);
        assert_eq!(distribute_budget(&[98, 1, 1], 3).unwrap(), [1, 1, 1]);
        // fewer budget slots than clusters: plain proportional
        assert_eq!(distribute_budget(&[98, 1, 1], 2).unwrap(), [2, 0, 0]);
    }

    proptest! {
        #[test]
        fn budgets_sum_exactly(sizes in proptest::collection::vec(0usize..200, 1..30), frac in 0.0f64..1.0) {
            let total: usize = sizes.iter().sum();
            prop_assume!(total > 0);
            let psi = ((total as f64 * frac) as usize).max(1);
            let b = distribute_budget(&sizes, psi).unwrap();
            prop_assert_eq!(b.iter().sum::<usize>(), psi);
            for (bi, si) in b.iter().zip(&sizes) {
                prop_assert!(bi <= si);
            }
            let non_empty = sizes.iter().filter(|&&s| s > 0).count();
            if psi >= non_empty {
                for (bi, si) in b.iter().zip(&sizes) {
                    prop_assert!(*si == 0 || *bi >= 1);
                }
            }
        }

        #[test]
        fn feature_share_is_monotone_in_gamma(f in 1usize..50, l in 1usize..50, g1 in 0.0f64..=1.0, g2 in 0.0f64..=1.0) {
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let a = NormalizationParams::new(lo, f, l).unwrap();
            let b = NormalizationParams::new(hi, f, l).unwrap();
            prop_assert!(b.feature_share() >= a.feature_share() - 1e-15);
            prop_assert!(b.alpha / (b.alpha + b.beta) >= a.alpha / (a.alpha + a.beta) - 1e-15);
        }
    }
}
