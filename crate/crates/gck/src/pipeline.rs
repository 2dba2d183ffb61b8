//! End-to-end runs: training subgraph, centrality, clustering, collapse,
//! SIGN features, MLP training and evaluation.
//!
//! Training is inductive. The collapse and the training features only see
//! the training subgraph; validation and test nodes are scored on features
//! aggregated over the full graph.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use gck_core::centrality::{self, CentralityParams, Measure};
use gck_core::cluster::{self, ClusterAssignment, KMeansConfig};
use gck_core::collapse::{self, CollapseResult};
use gck_core::graph::training_subgraph;
use gck_core::metrics::label_distribution_error;
use gck_core::mlp::{self, MlpConfig, RowSet, TrainOutcome};
use gck_core::sign::{normalized_adjacency, sign_features};
use gck_core::{AttributeSet, Cancel, CentralityScores, Graph, Matrix, MetricsReport, NodeRemap, Split};
use serde::Serialize;

use crate::dataset::Dataset;
use crate::deadline::Deadline;
use crate::error::{stage, Error, Result};
use crate::io;

/// Node budget, either absolute or relative to the training node count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Count(usize),
    Fraction(f64),
}

impl Budget {
    pub fn resolve(self, train_nodes: usize) -> Result<usize> {
        match self {
            Budget::Count(0) => Err(Error::config("node budget must be positive")),
            Budget::Count(n) if n > train_nodes => Err(Error::config(format!(
                "node budget {n} exceeds the {train_nodes} training nodes"
            ))),
            Budget::Count(n) => Ok(n),
            Budget::Fraction(f) if f > 0.0 && f <= 1.0 => {
                Ok(((f * train_nodes as f64).round() as usize).clamp(1, train_nodes))
            }
            Budget::Fraction(f) => Err(Error::config(format!("budget fraction {f} outside (0, 1]"))),
        }
    }
}

impl std::str::FromStr for Budget {
    type Err = Error;

    /// Integers are counts; anything with a `.` or a `%` is a fraction.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("bad budget `{s}`"));
        if let Some(p) = s.strip_suffix('%') {
            return p.parse::<f64>().map(|p| Budget::Fraction(p / 100.0)).map_err(|_| bad());
        }
        if s.contains('.') {
            return s.parse().map(Budget::Fraction).map_err(|_| bad());
        }
        s.parse().map(Budget::Count).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub psi: Budget,
    pub eta: usize,
    pub gamma: f64,
    pub measure: Measure,
    pub centrality: CentralityParams,
    pub kmeans: KMeansConfig,
    pub hops: usize,
    pub mlp: MlpConfig,
    pub seed: u64,
    pub timeout_secs: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            psi: Budget::Fraction(1.0),
            eta: 100,
            gamma: 0.5,
            measure: Measure::Eigenvector,
            centrality: CentralityParams::default(),
            kmeans: KMeansConfig::default(),
            hops: 2,
            mlp: MlpConfig::default(),
            seed: 0,
            timeout_secs: None,
        }
    }
}

/// Wall-clock milliseconds per stage, in execution order.
#[derive(Debug, Clone, Default)]
pub struct Timings(pub Vec<(String, f64)>);

impl Serialize for Timings {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (name, ms) in &self.0 {
            map.serialize_entry(name, ms)?;
        }
        map.end()
    }
}

impl Timings {
    fn time<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = stage(name, f);
        self.0.push((name.to_string(), start.elapsed().as_secs_f64() * 1e3));
        out
    }
}

/// Everything that does not depend on the budget.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train_graph: Graph,
    pub train_attrs: AttributeSet,
    /// Training-local id to dataset id.
    pub remap: NodeRemap,
    pub scores: CentralityScores,
    pub clusters: ClusterAssignment,
    /// SIGN features of every node over the full graph.
    pub z_full: Matrix,
    pub labels_full: Matrix,
    pub val_nodes: Vec<usize>,
    pub test_nodes: Vec<usize>,
}

fn check_deadline(deadline: &Deadline) -> Result<()> {
    deadline.check().map_err(Error::from)
}

pub fn prepare(data: &Dataset, cfg: &PipelineConfig, deadline: &Deadline, timings: &mut Timings) -> Result<Prepared> {
    let (train_graph, train_attrs, remap) =
        timings.time("training_subgraph", || Ok(training_subgraph(&data.graph, &data.attrs)?))?;
    let params = CentralityParams {
        seed: cfg.seed,
        ..cfg.centrality
    };
    let scores = timings.time("centrality", || {
        check_deadline(deadline)?;
        Ok(centrality::compute(&train_graph, cfg.measure, &params, deadline)?)
    })?;
    let clusters = timings.time("cluster", || {
        check_deadline(deadline)?;
        let eta = effective_eta(cfg.eta, train_graph.num_nodes());
        if eta == 1 {
            return Ok(ClusterAssignment::single(train_graph.num_nodes()));
        }
        let m = cluster::feature_label_matrix(&train_attrs, cfg.gamma)?;
        let kcfg = KMeansConfig {
            seed: cfg.seed,
            ..cfg.kmeans
        };
        Ok(cluster::kmeans(&m, eta, &kcfg, deadline)?)
    })?;
    let z_full = timings.time("sign_full", || {
        check_deadline(deadline)?;
        let a = normalized_adjacency(&data.graph);
        Ok(sign_features(&a, data.attrs.features(), cfg.hops)?.z)
    })?;
    Ok(Prepared {
        train_graph,
        train_attrs,
        remap,
        scores,
        clusters,
        z_full,
        labels_full: data.attrs.labels().clone(),
        val_nodes: data.attrs.nodes_in(Split::Val),
        test_nodes: data.attrs.nodes_in(Split::Test),
    })
}

/// Cluster count actually used: at most one cluster per training node.
pub fn effective_eta(eta: usize, train_nodes: usize) -> usize {
    let eff = eta.clamp(1, train_nodes.max(1));
    if eff != eta {
        log::warn!("eta {eta} reduced to {eff} for {train_nodes} training nodes");
    }
    eff
}

/// One budget's worth of work on top of [`Prepared`].
#[derive(Debug, Clone)]
pub struct BudgetRun {
    pub psi: usize,
    pub collapse: CollapseResult,
    pub z_train: gck_core::SignTensor,
    pub training: TrainOutcome,
    pub val: Option<MetricsReport>,
    pub test: Option<MetricsReport>,
    pub l_err: f64,
}

pub fn run_budget(
    prep: &Prepared,
    psi: usize,
    cfg: &PipelineConfig,
    deadline: &Deadline,
    timings: &mut Timings,
) -> Result<BudgetRun> {
    let collapsed = timings.time("collapse", || {
        check_deadline(deadline)?;
        Ok(collapse::collapse_with(
            &prep.train_graph,
            &prep.train_attrs,
            psi,
            &prep.scores,
            &prep.clusters,
        )?)
    })?;
    let l_err = stage("lerr", || {
        label_distribution_error(prep.train_attrs.labels(), collapsed.attrs.labels())
    })?;
    let z_train = timings.time("sign", || {
        check_deadline(deadline)?;
        let a = normalized_adjacency(&collapsed.graph);
        Ok(sign_features(&a, collapsed.attrs.features(), cfg.hops)?)
    })?;
    let mlp_cfg = MlpConfig {
        seed: cfg.seed,
        task: prep.train_attrs.task(),
        ..cfg.mlp.clone()
    };
    let train_rows: Vec<usize> = (0..collapsed.survivor_count).collect();
    let training = timings.time("train", || {
        check_deadline(deadline)?;
        let train = RowSet::new(&z_train.z, collapsed.attrs.labels(), &train_rows)?;
        let val = RowSet::new(&prep.z_full, &prep.labels_full, &prep.val_nodes)?;
        Ok(mlp::train_mlp(train, Some(val), &mlp_cfg)?)
    })?;
    let (val, test) = timings.time("evaluate", || {
        let score = |rows: &[usize]| -> Result<Option<MetricsReport>> {
            if rows.is_empty() {
                return Ok(None);
            }
            Ok(Some(mlp::evaluate(&training.model, &prep.z_full, &prep.labels_full, rows)?))
        };
        Ok((score(&prep.val_nodes)?, score(&prep.test_nodes)?))
    })?;
    Ok(BudgetRun {
        psi,
        collapse: collapsed,
        z_train,
        training,
        val,
        test,
        l_err,
    })
}

// ------------------------------------------------------------------ manifest

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsJson {
    pub accuracy: f64,
    pub micro_f1: f64,
    pub micro_sensitivity: f64,
    pub micro_specificity: f64,
    pub samples: usize,
}

impl From<&MetricsReport> for MetricsJson {
    fn from(m: &MetricsReport) -> Self {
        Self {
            accuracy: m.accuracy,
            micro_f1: m.micro_f1,
            micro_sensitivity: m.micro_sensitivity,
            micro_specificity: m.micro_specificity,
            samples: m.samples,
        }
    }
}

/// The collapse summary, also written on its own as `collapse.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseJson {
    pub psi: usize,
    pub eta: usize,
    pub gamma: f64,
    pub zeta: String,
    pub seed: u64,
    pub survivor_count: usize,
    pub budgets: Vec<usize>,
    pub per_cluster_removed: Vec<usize>,
    pub collapsed_edges: usize,
    pub centrality: String,
}

impl CollapseJson {
    pub fn new(result: &CollapseResult, gamma: f64, seed: u64) -> Self {
        Self {
            psi: result.budgets.iter().sum(),
            eta: result.clusters.eta,
            gamma,
            zeta: result.centrality.measure.short_name().to_string(),
            seed,
            survivor_count: result.survivor_count,
            budgets: result.budgets.clone(),
            per_cluster_removed: result.per_cluster_removed.clone(),
            collapsed_edges: result.graph.edge_count(),
            centrality: result.centrality.describe(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigJson {
    pub psi: usize,
    pub eta: usize,
    pub gamma: f64,
    pub zeta: String,
    pub hops: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub batches_per_epoch: usize,
    pub optimizer: String,
    pub quantize_activations: bool,
    pub bits: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphJson {
    pub nodes: usize,
    pub edges: usize,
    pub train_nodes: usize,
    pub train_edges: usize,
    pub val_nodes: usize,
    pub test_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultsJson {
    pub val: Option<MetricsJson>,
    pub test: Option<MetricsJson>,
    pub best_epoch: Option<usize>,
    pub final_train_loss: Option<f64>,
    pub l_err: f64,
}

/// Wall-clock and memory figures; the only part that varies between
/// identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct RuntimeJson {
    pub timings_ms: Timings,
    pub total_ms: f64,
    pub peak_rss_kb: Option<u64>,
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: ConfigJson,
    pub graph: GraphJson,
    pub collapse: CollapseJson,
    pub results: ResultsJson,
    /// Artifact name to path relative to the output directory.
    pub artifacts: BTreeMap<String, String>,
    pub runtime: RuntimeJson,
}

/// `VmHWM` from `/proc/self/status`, where available.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn optimizer_name(o: gck_core::mlp::Optimizer) -> String {
    use gck_core::mlp::Optimizer as O;
    match o {
        O::Sgd => "sgd".into(),
        O::Momentum { beta } => format!("momentum(beta={beta})"),
        O::Adam { beta1, beta2, eps } => format!("adam(beta1={beta1},beta2={beta2},eps={eps})"),
    }
}

/// Runs the whole pipeline; with `out`, writes every artifact plus
/// `manifest.json` there.
pub fn run_pipeline(data: &Dataset, cfg: &PipelineConfig, out: Option<&Path>) -> Result<Manifest> {
    let started = Instant::now();
    let deadline = Deadline::from_secs(cfg.timeout_secs);
    let mut timings = Timings::default();
    let prep = prepare(data, cfg, &deadline, &mut timings)?;
    let psi = cfg.psi.resolve(prep.train_graph.num_nodes())?;
    let run = run_budget(&prep, psi, cfg, &deadline, &mut timings)?;

    let mut artifacts = BTreeMap::new();
    if let Some(dir) = out {
        artifacts = timings.time("write", || write_artifacts(dir, &prep, &run, cfg))?;
    }
    let manifest = Manifest {
        config: ConfigJson {
            psi,
            eta: prep.clusters.eta,
            gamma: cfg.gamma,
            zeta: cfg.measure.short_name().into(),
            hops: cfg.hops,
            seed: cfg.seed,
            hidden: cfg.mlp.hidden.clone(),
            epochs: cfg.mlp.epochs,
            learning_rate: cfg.mlp.learning_rate,
            dropout: cfg.mlp.dropout,
            batches_per_epoch: cfg.mlp.batches_per_epoch,
            optimizer: optimizer_name(cfg.mlp.optimizer),
            quantize_activations: cfg.mlp.quantize_activations,
            bits: cfg.mlp.quant_bits,
        },
        graph: GraphJson {
            nodes: data.graph.num_nodes(),
            edges: data.graph.edge_count(),
            train_nodes: prep.train_graph.num_nodes(),
            train_edges: prep.train_graph.edge_count(),
            val_nodes: prep.val_nodes.len(),
            test_nodes: prep.test_nodes.len(),
        },
        collapse: CollapseJson::new(&run.collapse, cfg.gamma, cfg.seed),
        results: ResultsJson {
            val: run.val.as_ref().map(MetricsJson::from),
            test: run.test.as_ref().map(MetricsJson::from),
            best_epoch: run.training.best_epoch,
            final_train_loss: run.training.history.last().map(|r| r.train_loss),
            l_err: run.l_err,
        },
        artifacts,
        runtime: RuntimeJson {
            timings_ms: timings,
            total_ms: started.elapsed().as_secs_f64() * 1e3,
            peak_rss_kb: peak_rss_kb(),
            workers: rayon::current_num_threads(),
        },
    };
    if let Some(dir) = out {
        stage("write", || io::write_json(&dir.join("manifest.json"), &manifest))?;
    }
    Ok(manifest)
}

fn write_artifacts(dir: &Path, prep: &Prepared, run: &BudgetRun, cfg: &PipelineConfig) -> Result<BTreeMap<String, String>> {
    let c = &run.collapse;
    let survivors_original: Vec<usize> = c
        .survivors
        .originals()
        .iter()
        .map(|&v| prep.remap.to_original(v))
        .collect();
    let mut files = BTreeMap::new();
    let mut put = |name: &str, rel: &str| {
        files.insert(name.to_string(), rel.to_string());
        dir.join(rel)
    };
    io::write_edges(&put("collapsed_edges", "collapsed/edges.txt"), &c.graph)?;
    io::write_features(&put("collapsed_features", "collapsed/features.csv"), c.attrs.features())?;
    io::write_labels(&put("collapsed_labels", "collapsed/labels.csv"), c.attrs.labels(), c.attrs.task())?;
    io::write_survivors(&put("survivors", "collapsed/survivors.csv"), &survivors_original)?;
    io::write_merge_map(&put("merge_map", "merge_map.csv"), &c.merge_map, &prep.remap)?;
    io::write_scores(&put("centrality", "centrality.csv"), &prep.scores, &prep.remap)?;
    io::write_clusters(&put("clusters", "clusters.csv"), &prep.clusters.cluster_of, &prep.remap)?;
    io::write_json(&put("collapse", "collapse.json"), &CollapseJson::new(c, cfg.gamma, cfg.seed))?;
    io::write_sign(&put("sign_train", "sign_train.bin"), &run.z_train)?;
    io::write_model(&put("model", "model.bin"), &run.training.model)?;
    io::write_history(&put("history", "history.csv"), &run.training.history)?;
    Ok(files)
}

// --------------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub psi: usize,
    pub survivor_count: usize,
    pub l_err: f64,
    /// L_err of a single-cluster collapse at the same budget.
    pub l_err_agnostic: f64,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub test_micro_f1: Option<f64>,
    pub train_ms: f64,
}

/// Budget sweep. Centrality, clusters and full-graph features are computed
/// once and shared by every budget.
pub fn run_sweep(data: &Dataset, cfg: &PipelineConfig, fractions: &[f64]) -> Result<Vec<SweepRow>> {
    let deadline = Deadline::from_secs(cfg.timeout_secs);
    let mut timings = Timings::default();
    let prep = prepare(data, cfg, &deadline, &mut timings)?;
    let single = ClusterAssignment::single(prep.train_graph.num_nodes());
    let mut rows = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let psi = Budget::Fraction(fraction).resolve(prep.train_graph.num_nodes())?;
        let started = Instant::now();
        let mut t = Timings::default();
        let run = run_budget(&prep, psi, cfg, &deadline, &mut t)?;
        let agnostic = stage("collapse", || {
            collapse::collapse_with(&prep.train_graph, &prep.train_attrs, psi, &prep.scores, &single)
        })?;
        let l_err_agnostic = stage("lerr", || {
            label_distribution_error(prep.train_attrs.labels(), agnostic.attrs.labels())
        })?;
        log::info!("sweep fraction {fraction}: psi={psi} l_err={:.4}", run.l_err);
        rows.push(SweepRow {
            fraction,
            psi,
            survivor_count: run.collapse.survivor_count,
            l_err: run.l_err,
            l_err_agnostic,
            val_accuracy: run.val.map(|m| m.accuracy),
            test_accuracy: run.test.map(|m| m.accuracy),
            test_micro_f1: run.test.map(|m| m.micro_f1),
            train_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut text = String::from(
        "fraction,psi,survivor_count,l_err,l_err_agnostic,val_accuracy,test_accuracy,test_micro_f1,train_ms\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.1}\n",
            r.fraction,
            r.psi,
            r.survivor_count,
            r.l_err,
            r.l_err_agnostic,
            opt(r.val_accuracy),
            opt(r.test_accuracy),
            opt(r.test_micro_f1),
            r.train_ms
        ));
    }
    io::write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budgets_parse_and_resolve() {
        assert_eq!("40".parse::<Budget>().unwrap(), Budget::Count(40));
        assert_eq!("0.5".parse::<Budget>().unwrap(), Budget::Fraction(0.5));
        assert_eq!("25%".parse::<Budget>().unwrap(), Budget::Fraction(0.25));
        assert!("x".parse::<Budget>().is_err());
        assert_eq!(Budget::Fraction(0.5).resolve(9).unwrap(), 5);
        assert_eq!(Budget::Fraction(0.01).resolve(9).unwrap(), 1);
        assert_eq!(Budget::Count(10).resolve(9).unwrap_err().exit_code(), 2);
        assert!(Budget::Fraction(1.5).resolve(9).is_err());
    }

    #[test]
    fn eta_clamps_to_node_count() {
        assert_eq!(effective_eta(100, 7), 7);
        assert_eq!(effective_eta(0, 7), 1);
        assert_eq!(effective_eta(3, 7), 3);
    }
}
