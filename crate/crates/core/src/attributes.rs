//! Node features, labels and the train/val/test split.

use alloc::format;
use alloc::vec::Vec;

use crate::graph::NodeId;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    /// One-hot label rows.
    MultiClass,
    /// Multi-hot label rows.
    MultiLabel,
}

/// Which mask a node belongs to. Masks are disjoint by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Split {
    Train,
    Val,
    Test,
    #[default]
    Unassigned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSet {
    features: Matrix,
    labels: Matrix,
    split: Vec<Split>,
    task: TaskKind,
}

impl AttributeSet {
    /// Validates shapes, finiteness and label well-formedness.
    pub fn new(features: Matrix, labels: Matrix, split: Vec<Split>, task: TaskKind) -> Result<Self> {
        let n = features.rows();
        if labels.rows() != n || split.len() != n {
            return Err(Error::Shape(format!(
                "features have {n} rows, labels {} rows, split {} entries",
                labels.rows(),
                split.len()
            )));
        }
        if labels.cols() == 0 {
            return Err(Error::Shape("labels need at least one column".into()));
        }
        if !features.all_finite() {
            return Err(Error::Data("features contain NaN or infinite values".into()));
        }
        for (r, row) in labels.row_iter().enumerate() {
            if row.iter().any(|&y| y != 0.0 && y != 1.0) {
                return Err(Error::Data(format!("label row {r} has a value outside {{0, 1}}")));
            }
            if task == TaskKind::MultiClass && row.iter().filter(|&&y| y == 1.0).count() != 1 {
                return Err(Error::Data(format!(
                    "multi-class label row {r} is not one-hot"
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            split,
            task,
        })
    }

    /// One-hot encodes class indices into `num_classes` columns.
    pub fn one_hot(classes: &[usize], num_classes: usize) -> Result<Matrix> {
        let mut labels = Matrix::zeros(classes.len(), num_classes);
        for (r, &c) in classes.iter().enumerate() {
            if c >= num_classes {
                return Err(Error::Data(format!(
                    "class {c} of node {r} exceeds the class count {num_classes}"
                )));
            }
            labels.set(r, c, 1.0);
        }
        Ok(labels)
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    #[inline]
    pub fn num_labels(&self) -> usize {
        self.labels.cols()
    }

    #[inline]
    pub fn task(&self) -> TaskKind {
        self.task
    }

    #[inline]
    pub fn features(&self) -> &Matrix {
        &self.features
    }

    #[inline]
    pub fn labels(&self) -> &Matrix {
        &self.labels
    }

    #[inline]
    pub fn split(&self) -> &[Split] {
        &self.split
    }

    pub fn mask(&self, which: Split) -> Vec<bool> {
        self.split.iter().map(|&s| s == which).collect()
    }

    pub fn nodes_in(&self, which: Split) -> Vec<NodeId> {
        self.split
            .iter()
            .enumerate()
            .filter_map(|(v, &s)| (s == which).then_some(v))
            .collect()
    }

    pub fn train_nodes(&self) -> Vec<NodeId> {
        self.nodes_in(Split::Train)
    }

    /// Class index of a multi-class row.
    pub fn class_of(&self, node: NodeId) -> Option<usize> {
        match self.task {
            TaskKind::MultiClass => self.labels.row(node).iter().position(|&y| y == 1.0),
            TaskKind::MultiLabel => None,
        }
    }

    /// Rows for `nodes`, in the given order.
    pub fn select(&self, nodes: &[NodeId]) -> Self {
        Self {
            features: self.features.select_rows(nodes),
            labels: self.labels.select_rows(nodes),
            split: nodes.iter().map(|&v| self.split[v]).collect(),
            task: self.task,
        }
    }
}
