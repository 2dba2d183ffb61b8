use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gck_core::centrality::{self, CentralityParams, Measure};
use gck_core::cluster::{self, KMeansConfig};
use gck_core::graph::training_subgraph;
use gck_core::metrics::label_distribution_error;
use gck_core::mlp::{MlpConfig, Optimizer};
use gck_core::sign::{normalized_adjacency, sign_features};
use gck_core::synth::{stochastic_block_model, SbmConfig};
use gck_core::{Graph, NodeRemap, Split};

use gck::error::{stage, Error, Result};
use gck::pipeline::{self, Budget, PipelineConfig};
use gck::{io, load_dataset, save_dataset, Dataset, DatasetPaths, Deadline};

#[derive(Parser)]
#[command(name = "gck", version, about = "Feature-label constrained graph collapse toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-node centrality scores as CSV.
    Centrality {
        #[arg(long)]
        edges: PathBuf,
        #[command(flatten)]
        centrality: CentralityArgs,
        #[arg(long)]
        timeout_secs: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// K-Means over the normalized feature-label matrix.
    Cluster {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 100)]
        eta: usize,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collapse the training subgraph to a node budget.
    Collapse {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        collapse: CollapseArgs,
        #[arg(long)]
        timeout_secs: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// SIGN features `[X, ÃX, ..., Ã^hops X]`.
    Sign {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 2)]
        hops: usize,
        /// Binary output; a `.csv` extension selects CSV instead.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate on the uncollapsed training subgraph.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collapse, aggregate, train, evaluate and write a manifest.
    Pipeline {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        collapse: CollapseArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        timeout_secs: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label distribution error between two label files.
    Lerr {
        /// Labels before the collapse.
        #[arg(long)]
        labels: PathBuf,
        /// Restrict the original labels to training nodes.
        #[arg(long)]
        masks: Option<PathBuf>,
        /// Labels after the collapse.
        #[arg(long)]
        collapsed: PathBuf,
    },
    /// Accuracy and L_err across budget fractions, as CSV.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        collapse: CollapseArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated budget fractions.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
        fractions: Vec<f64>,
        #[arg(long)]
        timeout_secs: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded stochastic-block-model dataset.
    Generate {
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 4)]
        blocks: usize,
        #[arg(long, default_value_t = 0.02)]
        p_in: f64,
        #[arg(long, default_value_t = 0.002)]
        p_out: f64,
        /// Edge-probability weight of the last block; below 1 makes it a
        /// low-centrality minority.
        #[arg(long, default_value_t = 1.0)]
        minority_weight: f64,
        #[arg(long, default_value_t = 16)]
        feature_dim: usize,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Without masks every node is a training node.
    #[arg(long)]
    masks: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        stage("load", || {
            load_dataset(&DatasetPaths {
                edges: self.edges.clone(),
                features: self.features.clone(),
                labels: self.labels.clone(),
                masks: self.masks.clone(),
            })
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Zeta {
    Dc,
    Bc,
    Cc,
    Pr,
    Ec,
}

impl From<Zeta> for Measure {
    fn from(z: Zeta) -> Self {
        match z {
            Zeta::Dc => Measure::Degree,
            Zeta::Bc => Measure::Betweenness,
            Zeta::Cc => Measure::Closeness,
            Zeta::Pr => Measure::PageRank,
            Zeta::Ec => Measure::Eigenvector,
        }
    }
}

#[derive(Args)]
struct CentralityArgs {
    #[arg(long, value_enum, default_value = "ec")]
    zeta: Zeta,
    /// Betweenness source samples; 0 means exact.
    #[arg(long, default_value_t = 512)]
    bc_samples: usize,
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
}

impl CentralityArgs {
    fn params(&self, seed: u64) -> CentralityParams {
        CentralityParams {
            bc_samples: (self.bc_samples > 0).then_some(self.bc_samples),
            damping: self.damping,
            tol: self.tol,
            max_iter: self.max_iter,
            seed,
        }
    }
}

#[derive(Args)]
struct CollapseArgs {
    /// Node budget: a count (`500`), a fraction (`0.5`) or a percentage.
    #[arg(long, default_value = "1.0")]
    psi: String,
    #[arg(long, default_value_t = 100)]
    eta: usize,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[command(flatten)]
    centrality: CentralityArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Momentum,
    Adam,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 2)]
    hops: usize,
    /// Hidden layer widths, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 1)]
    batches: usize,
    #[arg(long, value_enum, default_value = "sgd")]
    optimizer: OptimizerArg,
    /// Quantize cached activations during training.
    #[arg(long)]
    quantize: bool,
    #[arg(long, default_value_t = 2)]
    bits: u8,
}

impl ModelArgs {
    fn mlp(&self) -> MlpConfig {
        MlpConfig {
            hidden: self.hidden.clone(),
            dropout: self.dropout,
            learning_rate: self.lr,
            batches_per_epoch: self.batches,
            epochs: self.epochs,
            quantize_activations: self.quantize,
            quant_bits: self.bits,
            optimizer: match self.optimizer {
                OptimizerArg::Sgd => Optimizer::Sgd,
                OptimizerArg::Momentum => Optimizer::Momentum { beta: 0.9 },
                OptimizerArg::Adam => Optimizer::adam(),
            },
            ..MlpConfig::default()
        }
    }
}

fn pipeline_config(c: &CollapseArgs, m: &ModelArgs, timeout_secs: Option<f64>) -> Result<PipelineConfig> {
    Ok(PipelineConfig {
        psi: c.psi.parse::<Budget>()?,
        eta: c.eta,
        gamma: c.gamma,
        measure: c.centrality.zeta.into(),
        centrality: c.centrality.params(c.seed),
        kmeans: KMeansConfig::default(),
        hops: m.hops,
        mlp: m.mlp(),
        seed: c.seed,
        timeout_secs,
    })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn graph_from_file(path: &Path, num_nodes: Option<usize>) -> Result<Graph> {
    let list = io::read_edges(path)?;
    let n = num_nodes.unwrap_or_else(|| list.inferred_nodes());
    Graph::from_edges(n, list.edges).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Centrality {
            edges,
            centrality,
            timeout_secs,
            out,
        } => {
            let g = stage("load", || graph_from_file(&edges, None))?;
            let deadline = Deadline::from_secs(timeout_secs);
            let scores = stage("centrality", || {
                centrality::compute(&g, centrality.zeta.into(), &centrality.params(0), &deadline)
            })?;
            io::write_scores(&out, &scores, &NodeRemap::identity(g.num_nodes()))
        }
        Command::Cluster {
            data,
            eta,
            gamma,
            seed,
            out,
        } => {
            let d = data.load()?;
            let (_, attrs, remap) = stage("training_subgraph", || training_subgraph(&d.graph, &d.attrs))?;
            let eta = pipeline::effective_eta(eta, attrs.num_nodes());
            let assignment = stage("cluster", || {
                let m = cluster::feature_label_matrix(&attrs, gamma)?;
                cluster::kmeans(&m, eta, &KMeansConfig { seed, ..Default::default() }, &gck_core::Never)
            })?;
            io::write_clusters(&out, &assignment.cluster_of, &remap)
        }
        Command::Collapse {
            data,
            collapse,
            timeout_secs,
            out,
        } => {
            let d = data.load()?;
            let cfg = pipeline_config(&collapse, &ModelArgs::parse_defaults(), timeout_secs)?;
            let deadline = Deadline::from_secs(timeout_secs);
            let (train_graph, train_attrs, remap) =
                stage("training_subgraph", || training_subgraph(&d.graph, &d.attrs))?;
            let psi = cfg.psi.resolve(train_graph.num_nodes())?;
            let scores = stage("centrality", || {
                centrality::compute(&train_graph, cfg.measure, &cfg.centrality, &deadline)
            })?;
            let eta = pipeline::effective_eta(cfg.eta, train_graph.num_nodes());
            let clusters = stage("cluster", || {
                if eta == 1 {
                    return Ok(gck_core::ClusterAssignment::single(train_graph.num_nodes()));
                }
                let m = cluster::feature_label_matrix(&train_attrs, cfg.gamma)?;
                cluster::kmeans(&m, eta, &KMeansConfig { seed: cfg.seed, ..Default::default() }, &deadline)
            })?;
            let result = stage("collapse", || {
                gck_core::collapse::collapse_with(&train_graph, &train_attrs, psi, &scores, &clusters)
            })?;
            stage("write", || {
                let originals: Vec<usize> = result.survivors.originals().iter().map(|&v| remap.to_original(v)).collect();
                save_dataset(
                    &DatasetPaths {
                        masks: None,
                        ..DatasetPaths::in_dir(&out)
                    },
                    &Dataset {
                        graph: result.graph.clone(),
                        attrs: result.attrs.clone(),
                    },
                )?;
                io::write_survivors(&out.join("survivors.csv"), &originals)?;
                io::write_merge_map(&out.join("merge_map.csv"), &result.merge_map, &remap)?;
                let summary = pipeline::CollapseJson::new(&result, cfg.gamma, cfg.seed);
                io::write_json(&out.join("collapse.json"), &summary)?;
                print_json(&summary)
            })
        }
        Command::Sign {
            edges,
            features,
            hops,
            out,
        } => {
            let x = stage("load", || io::read_features(&features))?;
            let g = stage("load", || graph_from_file(&edges, Some(x.rows())))?;
            let z = stage("sign", || sign_features(&normalized_adjacency(&g), &x, hops))?;
            if out.extension().is_some_and(|e| e == "csv") {
                io::write_sign_csv(&out, &z)
            } else {
                io::write_sign(&out, &z)
            }
        }
        Command::Train { data, model, seed, out } => {
            let d = data.load()?;
            let collapse = CollapseArgs {
                psi: "1.0".into(),
                eta: 1,
                gamma: 0.5,
                centrality: CentralityArgs {
                    zeta: Zeta::Dc,
                    bc_samples: 0,
                    damping: 0.85,
                    tol: 1e-8,
                    max_iter: 1000,
                },
                seed,
            };
            let cfg = pipeline_config(&collapse, &model, None)?;
            let manifest = pipeline::run_pipeline(&d, &cfg, Some(&out))?;
            print_json(&manifest.results)
        }
        Command::Pipeline {
            data,
            collapse,
            model,
            timeout_secs,
            out,
        } => {
            let d = data.load()?;
            let cfg = pipeline_config(&collapse, &model, timeout_secs)?;
            let manifest = pipeline::run_pipeline(&d, &cfg, Some(&out))?;
            print_json(&manifest.results)
        }
        Command::Lerr {
            labels,
            masks,
            collapsed,
        } => {
            let (y, _) = stage("load", || io::read_labels(&labels))?;
            let y = match masks {
                Some(m) => {
                    let split = stage("load", || io::read_masks(&m, y.rows()))?;
                    let train: Vec<usize> = (0..y.rows()).filter(|&v| split[v] == Split::Train).collect();
                    y.select_rows(&train)
                }
                None => y,
            };
            let (c, _) = stage("load", || io::read_labels(&collapsed))?;
            let value = stage("lerr", || label_distribution_error(&y, &c))?;
            println!("{value}");
            Ok(())
        }
        Command::Sweep {
            data,
            collapse,
            model,
            fractions,
            timeout_secs,
            out,
        } => {
            let d = data.load()?;
            let cfg = pipeline_config(&collapse, &model, timeout_secs)?;
            let rows = pipeline::run_sweep(&d, &cfg, &fractions)?;
            pipeline::write_sweep_csv(&out, &rows)
        }
        Command::Generate {
            nodes,
            blocks,
            p_in,
            p_out,
            minority_weight,
            feature_dim,
            noise,
            seed,
            out,
        } => {
            if blocks == 0 || nodes < blocks {
                return Err(Error::config("need at least one block and one node per block"));
            }
            let mut sbm = SbmConfig::balanced(nodes, blocks, seed);
            sbm.p_in = p_in;
            sbm.p_out = p_out;
            sbm.feature_dim = feature_dim;
            sbm.noise = noise;
            if let Some(w) = sbm.block_weights.last_mut() {
                *w = minority_weight;
            }
            let (graph, attrs) = stage("generate", || stochastic_block_model(&sbm))?;
            save_dataset(&DatasetPaths::in_dir(&out), &Dataset { graph, attrs })
        }
    }
}

impl ModelArgs {
    /// Defaults for commands that take no model flags.
    fn parse_defaults() -> Self {
        #[derive(Parser)]
        struct Only {
            #[command(flatten)]
            model: ModelArgs,
        }
        Only::parse_from(["gck"]).model
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GCK_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
