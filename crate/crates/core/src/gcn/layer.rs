//! One spatial-temporal unit: partitioned graph convolution, tanh, temporal
//! convolution along the frame axis, tanh.
//!
//! Without batch normalization, ReLU units feed the global pool a large
//! positive common mode that swamps the class signal and stalls SGD; the
//! zero-centered tanh trains with the same init and optimizer.

use rand::Rng;

use super::tensor::{gemm, Tensor3, View};
use crate::error::{Error, Result};
use crate::graph::PartitionedAdjacency;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub c_in: usize,
    pub c_out: usize,
    pub num_subsets: usize,
    pub kernel_t: usize,
    pub stride: usize,
    /// Stacked subset weights, `(num_subsets * c_in) x c_out`; block `j` is `W_j`.
    pub spatial: Vec<f64>,
    /// Temporal kernel, `c_out x (c_out * kernel_t)` indexed `[out][in][k]`.
    pub temporal: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Adjacency-propagated input, `(num_subsets * c_in) x (T * N)`.
    propagated: Vec<f64>,
    /// Activated spatial output.
    hidden: Tensor3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub spatial: Vec<f64>,
    pub temporal: Vec<f64>,
    pub bias: Vec<f64>,
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-limit..=limit)).collect()
}

impl GcnLayer {
    pub fn zeros(c_in: usize, c_out: usize, num_subsets: usize, kernel_t: usize, stride: usize) -> Self {
        Self {
            c_in,
            c_out,
            num_subsets,
            kernel_t,
            stride,
            spatial: vec![0.0; num_subsets * c_in * c_out],
            temporal: vec![0.0; c_out * c_out * kernel_t],
            bias: vec![0.0; c_out],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(rng: &mut impl Rng, c_in: usize, c_out: usize, num_subsets: usize, kernel_t: usize, stride: usize) -> Self {
        let mut layer = Self::zeros(c_in, c_out, num_subsets, kernel_t, stride);
        layer.spatial = glorot(rng, c_in, c_out, layer.spatial.len());
        layer.temporal = glorot(rng, c_out * kernel_t, c_out, layer.temporal.len());
        layer
    }

    pub fn output_frames(&self, frames: usize) -> usize {
        frames.div_ceil(self.stride)
    }

    fn check_input(&self, x: &Tensor3, adj: &PartitionedAdjacency) -> Result<()> {
        let (c, _, n) = x.dims();
        if c != self.c_in {
            return Err(Error::ShapeMismatch(format!("layer expects {} channels, got {c}", self.c_in)));
        }
        if adj.num_nodes() != n || adj.num_subsets() != self.num_subsets {
            return Err(Error::ShapeMismatch(format!(
                "adjacency {}x{} nodes with {} subsets does not fit input with {n} nodes and layer with {} subsets",
                adj.num_nodes(),
                adj.num_nodes(),
                adj.num_subsets(),
                self.num_subsets
            )));
        }
        Ok(())
    }

    fn propagate(&self, x: &Tensor3, adj: &PartitionedAdjacency) -> Vec<f64> {
        let (c, t, n) = x.dims();
        let block = c * t * n;
        let mut y = vec![0.0; self.num_subsets * block];
        for (j, a) in adj.subsets.iter().enumerate() {
            // Y_j[(c,t), n] = sum_m X[(c,t), m] * A_j[n, m]
            gemm(1.0, View::new(x.as_slice(), c * t, n), View::new(a.as_slice(), n, n).t(), 0.0, &mut y[j * block..(j + 1) * block]);
        }
        y
    }

    fn spatial_from_propagated(&self, y: &[f64], t: usize, n: usize) -> Tensor3 {
        let p = t * n;
        let mut out = Tensor3::zeros(self.c_out, t, n);
        gemm(
            1.0,
            View::new(&self.spatial, self.num_subsets * self.c_in, self.c_out).t(),
            View::new(y, self.num_subsets * self.c_in, p),
            0.0,
            out.as_mut_slice(),
        );
        out
    }

    /// `sum_j A_j X W_j` per frame, without activation.
    pub fn spatial_forward(&self, x: &Tensor3, adj: &PartitionedAdjacency) -> Result<Tensor3> {
        self.check_input(x, adj)?;
        let (_, t, n) = x.dims();
        Ok(self.spatial_from_propagated(&self.propagate(x, adj), t, n))
    }

    fn im2col(&self, h: &Tensor3) -> (Vec<f64>, usize) {
        let (c, t, n) = h.dims();
        let k = self.kernel_t;
        let pad = (k - 1) / 2;
        let t_out = self.output_frames(t);
        let cols = t_out * n;
        let mut col = vec![0.0; c * k * cols];
        let src = h.as_slice();
        for ci in 0..c {
            for kk in 0..k {
                let row = &mut col[(ci * k + kk) * cols..(ci * k + kk + 1) * cols];
                for to in 0..t_out {
                    let ti = (to * self.stride + kk) as isize - pad as isize;
                    if ti < 0 || ti >= t as isize {
                        continue;
                    }
                    let s = (ci * t + ti as usize) * n;
                    row[to * n..(to + 1) * n].copy_from_slice(&src[s..s + n]);
                }
            }
        }
        (col, t_out)
    }

    fn col2im(&self, dcol: &[f64], c: usize, t: usize, n: usize) -> Tensor3 {
        let k = self.kernel_t;
        let pad = (k - 1) / 2;
        let t_out = self.output_frames(t);
        let cols = t_out * n;
        let mut out = Tensor3::zeros(c, t, n);
        let dst = out.as_mut_slice();
        for ci in 0..c {
            for kk in 0..k {
                let row = &dcol[(ci * k + kk) * cols..(ci * k + kk + 1) * cols];
                for to in 0..t_out {
                    let ti = (to * self.stride + kk) as isize - pad as isize;
                    if ti < 0 || ti >= t as isize {
                        continue;
                    }
                    let s = (ci * t + ti as usize) * n;
                    for (d, v) in dst[s..s + n].iter_mut().zip(&row[to * n..(to + 1) * n]) {
                        *d += v;
                    }
                }
            }
        }
        out
    }

    /// Zero-padded strided convolution along T with bias, without activation.
    pub fn temporal_forward(&self, h: &Tensor3) -> Result<Tensor3> {
        let (c, t, n) = h.dims();
        if c != self.c_out || t == 0 {
            return Err(Error::ShapeMismatch(format!("temporal conv expects {} channels and T >= 1, got {:?}", self.c_out, h.dims())));
        }
        let (col, t_out) = self.im2col(h);
        let p = t_out * n;
        let mut out = Tensor3::zeros(self.c_out, t_out, n);
        for (co, chunk) in out.as_mut_slice().chunks_mut(p).enumerate() {
            chunk.fill(self.bias[co]);
        }
        gemm(
            1.0,
            View::new(&self.temporal, self.c_out, self.c_out * self.kernel_t),
            View::new(&col, self.c_out * self.kernel_t, p),
            1.0,
            out.as_mut_slice(),
        );
        Ok(out)
    }

    /// Full unit forward; returns the activation and the backward cache.
    pub fn forward(&self, x: &Tensor3, adj: &PartitionedAdjacency) -> Result<(Tensor3, LayerCache)> {
        self.check_input(x, adj)?;
        let (_, t, n) = x.dims();
        let propagated = self.propagate(x, adj);
        let mut hidden = self.spatial_from_propagated(&propagated, t, n);
        activate(&mut hidden);
        let mut out = self.temporal_forward(&hidden)?;
        activate(&mut out);
        Ok((out, LayerCache { propagated, hidden }))
    }

    /// Gradients of the weights given `d_out` (w.r.t. this layer's activation)
    /// and, when `need_input_grad`, the gradient w.r.t. the layer input.
    pub fn backward(
        &self,
        adj: &PartitionedAdjacency,
        cache: &LayerCache,
        out: &Tensor3,
        d_out: &Tensor3,
        need_input_grad: bool,
    ) -> (LayerGrads, Option<Tensor3>) {
        let (_, t, n) = cache.hidden.dims();
        let (_, t_out, _) = out.dims();
        let p_out = t_out * n;
        let p = t * n;
        let kc = self.c_out * self.kernel_t;

        let mut dz2 = d_out.clone();
        for (g, o) in dz2.as_mut_slice().iter_mut().zip(out.as_slice()) {
            *g *= 1.0 - o * o;
        }
        let bias: Vec<f64> = dz2.as_slice().chunks(p_out).map(|r| r.iter().sum()).collect();

        let (col, _) = self.im2col(&cache.hidden);
        let mut temporal = vec![0.0; self.temporal.len()];
        gemm(1.0, View::new(dz2.as_slice(), self.c_out, p_out), View::new(&col, kc, p_out).t(), 0.0, &mut temporal);

        let mut dcol = vec![0.0; kc * p_out];
        gemm(1.0, View::new(&self.temporal, self.c_out, kc).t(), View::new(dz2.as_slice(), self.c_out, p_out), 0.0, &mut dcol);
        let mut dz1 = self.col2im(&dcol, self.c_out, t, n);
        for (g, h) in dz1.as_mut_slice().iter_mut().zip(cache.hidden.as_slice()) {
            *g *= 1.0 - h * h;
        }

        let rows = self.num_subsets * self.c_in;
        let mut spatial = vec![0.0; self.spatial.len()];
        gemm(1.0, View::new(&cache.propagated, rows, p), View::new(dz1.as_slice(), self.c_out, p).t(), 0.0, &mut spatial);

        let d_in = need_input_grad.then(|| {
            let mut dy = vec![0.0; rows * p];
            gemm(1.0, View::new(&self.spatial, rows, self.c_out), View::new(dz1.as_slice(), self.c_out, p), 0.0, &mut dy);
            let mut dx = Tensor3::zeros(self.c_in, t, n);
            let block = self.c_in * p;
            for (j, a) in adj.subsets.iter().enumerate() {
                gemm(
                    1.0,
                    View::new(&dy[j * block..(j + 1) * block], self.c_in * t, n),
                    View::new(a.as_slice(), n, n),
                    1.0,
                    dx.as_mut_slice(),
                );
            }
            dx
        });
        (LayerGrads { spatial, temporal, bias }, d_in)
    }
}

fn activate(x: &mut Tensor3) {
    for v in x.as_mut_slice() {
        *v = v.tanh();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::Matrix;

    fn seq(values: &[f64]) -> Tensor3 {
        Tensor3::from_vec(1, values.len(), 1, values.to_vec()).unwrap()
    }

    fn temporal_only(kernel: &[f64], stride: usize) -> GcnLayer {
        let mut l = GcnLayer::zeros(1, 1, 1, kernel.len(), stride);
        l.temporal = kernel.to_vec();
        l
    }

    #[test]
    fn temporal_identity_kernels() {
        let x = seq(&[1.0, -2.0, 3.0, 4.5]);
        assert_eq!(temporal_only(&[1.0], 1).temporal_forward(&x).unwrap(), x);
        assert_eq!(temporal_only(&[0.0, 1.0, 0.0], 1).temporal_forward(&x).unwrap(), x);
    }

    #[test]
    fn temporal_box_filter() {
        let third = 1.0 / 3.0;
        let y = temporal_only(&[third; 3], 1).temporal_forward(&seq(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        let expected = [1.0, 2.0, 3.0, 7.0 / 3.0];
        for (a, b) in y.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn temporal_stride_halves_frames() {
        let l = temporal_only(&[0.0, 1.0, 0.0], 2);
        let y = l.temporal_forward(&seq(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn spatial_two_node_uni_label() {
        let adj = PartitionedAdjacency { subsets: vec![Matrix::from_vec(2, 2, vec![0.5; 4]).unwrap()], alpha: Some(0.0) };
        let mut l = GcnLayer::zeros(1, 1, 1, 1, 1);
        l.spatial = vec![1.0];
        let x = Tensor3::from_vec(1, 1, 2, vec![1.0, 3.0]).unwrap();
        assert_eq!(l.spatial_forward(&x, &adj).unwrap().as_slice(), &[2.0, 2.0]);
        l.spatial = vec![0.0];
        assert_eq!(l.spatial_forward(&x, &adj).unwrap().as_slice(), &[0.0, 0.0]);
        let wrong = Tensor3::zeros(2, 1, 2);
        assert!(l.spatial_forward(&wrong, &adj).is_err());
    }
}
