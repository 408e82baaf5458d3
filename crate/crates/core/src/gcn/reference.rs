//! Literal neighbor-sum graph convolution. Used as an oracle for the
//! matrix form in [`super::GcnLayer::spatial_forward`].

use super::tensor::{Matrix, Tensor3};
use crate::error::{Error, Result};

/// Neighborhood of every root node: `(neighbor, subset label)` pairs,
/// including the root itself.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborLabels {
    pub neighbors: Vec<Vec<(usize, usize)>>,
}

impl NeighborLabels {
    /// Reads the labels off un-normalized 0/1 subset matrices.
    pub fn from_subsets(subsets: &[Matrix]) -> Self {
        let n = subsets.first().map_or(0, |m| m.rows());
        let neighbors = (0..n)
            .map(|i| {
                let mut list = Vec::new();
                for (label, m) in subsets.iter().enumerate() {
                    for j in 0..n {
                        if m.get(i, j) != 0.0 {
                            list.push((j, label));
                        }
                    }
                }
                list
            })
            .collect();
        Self { neighbors }
    }
}

/// `f_out(i) = sum_{j in B(i)} f_in(j) . w(l_i(j)) / Z_i(j)`, where `Z_i(j)` is
/// the size of the subset of `i`'s neighborhood that `j` belongs to.
/// `weights[l]` is a `c_in x c_out` matrix.
pub fn nodewise_gconv_reference(f_in: &Tensor3, labels: &NeighborLabels, weights: &[Matrix]) -> Result<Tensor3> {
    let (c_in, t, n) = f_in.dims();
    if labels.neighbors.len() != n {
        return Err(Error::ShapeMismatch(format!("{} neighborhoods for {n} nodes", labels.neighbors.len())));
    }
    let c_out = weights.first().map_or(0, |w| w.cols());
    if weights.iter().any(|w| w.rows() != c_in || w.cols() != c_out) {
        return Err(Error::ShapeMismatch("weight matrices must all be c_in x c_out".into()));
    }
    let mut out = Tensor3::zeros(c_out, t, n);
    for ti in 0..t {
        for (i, nbrs) in labels.neighbors.iter().enumerate() {
            for &(j, l) in nbrs {
                let w = weights.get(l).ok_or(Error::IndexOutOfRange { index: l, len: weights.len() })?;
                let z = nbrs.iter().filter(|(_, l2)| *l2 == l).count() as f64;
                for co in 0..c_out {
                    let dot: f64 = (0..c_in).map(|ci| f_in.get(ci, ti, j) * w.get(ci, co)).sum();
                    let v = out.get(co, ti, i) + dot / z;
                    out.set(co, ti, i, v);
                }
            }
        }
    }
    Ok(out)
}
