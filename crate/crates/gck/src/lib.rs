//! File formats, dataset loading and the end-to-end pipeline on top of
//! `gck-core`. The `gck` binary is a thin command-line layer over this.

pub mod dataset;
pub mod deadline;
pub mod error;
pub mod io;
pub mod pipeline;

pub use dataset::{load_dataset, save_dataset, Dataset, DatasetPaths};
pub use deadline::Deadline;
pub use error::{Error, ErrorKind, Result};
pub use pipeline::{run_pipeline, run_sweep, Budget, Manifest, PipelineConfig};
