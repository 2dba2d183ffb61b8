use std::path::{Path, PathBuf};

use gck_core::{AttributeSet, Graph, Split};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    /// Without masks every node counts as training.
    pub masks: Option<PathBuf>,
}

impl DatasetPaths {
    /// Conventional file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            edges: dir.join("edges.txt"),
            features: dir.join("features.csv"),
            labels: dir.join("labels.csv"),
            masks: Some(dir.join("masks.csv")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub attrs: AttributeSet,
}

/// Loads and cross-checks the four files. The feature file fixes the node
/// count; the other files must agree with it.
pub fn load_dataset(paths: &DatasetPaths) -> Result<Dataset> {
    let features = io::read_features(&paths.features)?;
    let n = features.rows();
    let (labels, task) = io::read_labels(&paths.labels)?;
    if labels.rows() != n {
        return Err(Error::data(format!(
            "node count mismatch: {} has {n} rows but {} has {}",
            paths.features.display(),
            paths.labels.display(),
            labels.rows()
        )));
    }
    let edges = io::read_edges(&paths.edges)?;
    if let Some(declared) = edges.declared_nodes.filter(|&d| d != n) {
        return Err(Error::data(format!(
            "node count mismatch: {} declares {declared} nodes but {} has {n} rows",
            paths.edges.display(),
            paths.features.display()
        )));
    }
    let graph = Graph::from_edges(n, edges.edges)
        .map_err(|e| Error::data(format!("{}: {e}", paths.edges.display())))?;
    let split = match &paths.masks {
        Some(p) => io::read_masks(p, n)?,
        None => vec![Split::Train; n],
    };
    let attrs = AttributeSet::new(features, labels, split, task)?;
    Ok(Dataset { graph, attrs })
}

pub fn save_dataset(paths: &DatasetPaths, data: &Dataset) -> Result<()> {
    if data.graph.alive_count() != data.graph.num_nodes() {
        return Err(Error::data("cannot save a graph with merged-away nodes"));
    }
    io::write_edges(&paths.edges, &data.graph)?;
    io::write_features(&paths.features, data.attrs.features())?;
    io::write_labels(&paths.labels, data.attrs.labels(), data.attrs.task())?;
    if let Some(p) = &paths.masks {
        io::write_masks(p, data.attrs.split())?;
    }
    Ok(())
}
