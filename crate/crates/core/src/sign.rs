//! Decoupled k-hop feature aggregation.
//!
//! `Z = [X, ÃX, Ã²X, ..., ÃⁿX]` with `Ã = D^-1/2 (A + I) D^-1/2` and
//! `D_ii = 1 + deg(i)`. Powers of `Ã` are never formed; each block is one
//! sparse-dense product away from the previous one.

use alloc::format;
use alloc::vec::Vec;

use crate::graph::Graph;
use crate::{Error, Matrix, Result};

/// Square CSR matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.offsets[r]..self.offsets[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |i| vals[i])
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                m.set(r, c, v);
            }
        }
        m
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).all(|(&c, &v)| self.get(c, r) == v)
        })
    }

    /// `self * x`.
    pub fn mul_dense(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.n {
            return Err(Error::Shape(format!(
                "{}x{} operator cannot act on {} rows",
                self.n,
                self.n,
                x.rows()
            )));
        }
        let cols = x.cols();
        let row_product = |r: usize, out: &mut [f64]| {
            let (idx, vals) = self.row(r);
            for (&c, &a) in idx.iter().zip(vals) {
                for (o, &xv) in out.iter_mut().zip(x.row(c)) {
                    *o += a * xv;
                }
            }
        };
        let mut out = Matrix::zeros(self.n, cols);
        if cols == 0 {
            return Ok(out);
        }
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            out.as_mut_slice()
                .par_chunks_mut(cols)
                .enumerate()
                .for_each(|(r, o)| row_product(r, o));
        }
        #[cfg(not(feature = "parallel"))]
        for r in 0..self.n {
            row_product(r, out.row_mut(r));
        }
        Ok(out)
    }
}

/// `Ã = D^-1/2 (A + I) D^-1/2` over every slot of `graph`. Dead slots act as
/// isolated nodes.
pub fn normalized_adjacency(graph: &Graph) -> SparseMatrix {
    let n = graph.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / libm::sqrt((graph.degree(v) + 1) as f64))
        .collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(n + 2 * graph.edge_count());
    let mut values = Vec::with_capacity(n + 2 * graph.edge_count());
    offsets.push(0);
    for v in 0..n {
        let mut self_done = false;
        for &w in graph.neighbors(v) {
            if !self_done && w > v {
                indices.push(v);
                values.push(inv_sqrt[v] * inv_sqrt[v]);
                self_done = true;
            }
            indices.push(w);
            values.push(inv_sqrt[v] * inv_sqrt[w]);
        }
        if !self_done {
            indices.push(v);
            values.push(inv_sqrt[v] * inv_sqrt[v]);
        }
        offsets.push(indices.len());
    }
    SparseMatrix {
        n,
        offsets,
        indices,
        values,
    }
}

/// Concatenated hop blocks `[X, ÃX, ..., Ã^hops X]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignTensor {
    pub z: Matrix,
    pub hops: usize,
    pub feature_dim: usize,
}

impl SignTensor {
    /// Block `k` (`0..=hops`) as a standalone matrix.
    pub fn block(&self, k: usize) -> Matrix {
        assert!(k <= self.hops, "block {k} out of 0..={}", self.hops);
        let f = self.feature_dim;
        let mut data = Vec::with_capacity(self.z.rows() * f);
        for row in self.z.row_iter() {
            data.extend_from_slice(&row[k * f..(k + 1) * f]);
        }
        Matrix::from_vec(self.z.rows(), f, data).expect("block shape is consistent")
    }
}

pub fn sign_features(a_tilde: &SparseMatrix, x: &Matrix, hops: usize) -> Result<SignTensor> {
    if x.rows() != a_tilde.dim() {
        return Err(Error::Shape(format!(
            "features have {} rows but the graph has {} nodes",
            x.rows(),
            a_tilde.dim()
        )));
    }
    let mut z = x.clone();
    let mut current = x.clone();
    for _ in 0..hops {
        current = a_tilde.mul_dense(&current)?;
        z = z.hconcat(&current)?;
    }
    Ok(SignTensor {
        z,
        hops,
        feature_dim: x.cols(),
    })
}
