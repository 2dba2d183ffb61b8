//! Topology-aware graph collapse under a feature-label constraint.
//!
//! The crate is `no_std` (with `alloc`). It covers the whole reduction and
//! training path:
//!
//! - [`graph`]: mutable undirected graph with edge contraction.
//! - [`centrality`]: degree, betweenness, closeness, PageRank and eigenvector
//!   centrality.
//! - [`cluster`]: dimension-normalized feature-label matrix, K-Means and
//!   proportional budget distribution.
//! - [`collapse`]: the cluster-constrained collapse and its
//!   feature-label-agnostic baseline.
//! - [`sign`]: normalized adjacency and k-hop feature pre-aggregation.
//! - [`quant`]: b-bit per-group activation quantization.
//! - [`mlp`] and [`metrics`]: a small MLP trainer and evaluation metrics.
//! - [`synth`]: seeded stochastic-block-model fixtures.
//!
//! Enable the `parallel` feature to spread centrality sources and K-Means
//! assignment over a rayon pool. Results do not depend on the worker count.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod attributes;
pub mod cancel;
pub mod centrality;
pub mod cluster;
pub mod collapse;
mod error;
pub mod graph;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod quant;
pub mod sign;
pub mod synth;

pub use attributes::{AttributeSet, Split, TaskKind};
pub use cancel::{Cancel, Never};
pub use centrality::{CentralityParams, CentralityScores, Measure};
pub use cluster::{ClusterAssignment, KMeansConfig, NormalizationParams};
pub use collapse::{CollapseParams, CollapseResult, MergeMap};
pub use error::{Error, Result};
pub use graph::{Graph, NodeId, NodeRemap};
pub use matrix::Matrix;
pub use metrics::MetricsReport;
pub use quant::{QuantizedBlock, Rounding};
pub use sign::{SignTensor, SparseMatrix};
