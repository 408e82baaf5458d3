use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layer::{GcnLayer, LayerCache, LayerGrads};
use super::ops::{argmax, cross_entropy_logits, global_avg_pool, linear_head, softmax};
use super::tensor::{Matrix, Tensor3};
use crate::error::{Error, Result};
use crate::graph::{ConnectionStrategy, PartitionStrategy, PartitionedAdjacency};

/// Output channels of the nine stacked units.
pub const STANDARD_CHANNELS: [usize; 9] = [64, 64, 64, 128, 128, 128, 256, 256, 256];
/// Temporal strides; frames halve where the channel count doubles.
pub const STANDARD_STRIDES: [usize; 9] = [1, 1, 1, 2, 1, 1, 2, 1, 1];
pub const STANDARD_KERNEL_T: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub channels: Vec<usize>,
    pub strides: Vec<usize>,
    pub kernel_t: usize,
    pub num_classes: usize,
    pub connection: ConnectionStrategy,
    pub partition: PartitionStrategy,
}

impl ModelConfig {
    /// The nine-unit network over `(3, T, N)` pose input.
    pub fn standard(num_classes: usize, connection: ConnectionStrategy, partition: PartitionStrategy) -> Self {
        Self {
            in_channels: 3,
            channels: STANDARD_CHANNELS.to_vec(),
            strides: STANDARD_STRIDES.to_vec(),
            kernel_t: STANDARD_KERNEL_T,
            num_classes,
            connection,
            partition,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.channels.is_empty() || self.channels.len() != self.strides.len() {
            return bad("channels and strides must be non-empty and of equal length");
        }
        if self.kernel_t.is_multiple_of(2) {
            return bad("temporal kernel size must be odd");
        }
        if self.strides.iter().any(|s| !(1..=2).contains(s)) {
            return bad("temporal strides must be 1 or 2");
        }
        if self.in_channels == 0 || self.channels.contains(&0) || self.num_classes < 2 {
            return bad("channel counts must be positive and there must be at least two classes");
        }
        Ok(())
    }

    pub fn is_standard(&self) -> bool {
        self.channels == STANDARD_CHANNELS && self.strides == STANDARD_STRIDES
    }
}

/// Stacked graph-convolution units with a pooled linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub config: ModelConfig,
    pub layers: Vec<GcnLayer>,
    /// `features x classes`.
    pub head_weights: Matrix,
    pub head_bias: Vec<f64>,
    /// Normalized adjacency used when no per-sample adjacency is given.
    pub adjacency: PartitionedAdjacency,
}

/// Gradients laid out like [`GcnModel::blobs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like(model: &GcnModel) -> Self {
        Self(model.blobs().iter().map(|b| vec![0.0; b.len()]).collect())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.0.iter_mut().flatten().for_each(|v| *v *= s);
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    inputs: Vec<Tensor3>,
    caches: Vec<LayerCache>,
    output: Tensor3,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl GcnModel {
    pub fn new(config: ModelConfig, adjacency: PartitionedAdjacency, seed: u64) -> Result<Self> {
        config.validate()?;
        if adjacency.num_subsets() != config.partition.num_subsets() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} partitioning needs {} subsets, adjacency has {}",
                config.partition,
                config.partition.num_subsets(),
                adjacency.num_subsets()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = adjacency.num_subsets();
        let mut layers = Vec::with_capacity(config.channels.len());
        let mut c_in = config.in_channels;
        for (&c_out, &stride) in config.channels.iter().zip(&config.strides) {
            layers.push(GcnLayer::init(&mut rng, c_in, c_out, k, config.kernel_t, stride));
            c_in = c_out;
        }
        let limit = (6.0 / (c_in + config.num_classes) as f64).sqrt();
        let head = (0..c_in * config.num_classes).map(|_| rand::Rng::gen_range(&mut rng, -limit..=limit)).collect();
        let head_weights = Matrix::from_vec(c_in, config.num_classes, head).expect("head size");
        let head_bias = vec![0.0; config.num_classes];
        Ok(Self { config, layers, head_weights, head_bias, adjacency })
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.num_nodes()
    }

    /// All parameters in a fixed order: per layer spatial, temporal, bias;
    /// then head weights and head bias.
    pub fn blobs(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(self.layers.len() * 3 + 2);
        for l in &self.layers {
            out.push(&l.spatial);
            out.push(&l.temporal);
            out.push(&l.bias);
        }
        out.push(self.head_weights.as_slice());
        out.push(&self.head_bias);
        out
    }

    pub fn blobs_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(self.layers.len() * 3 + 2);
        for l in &mut self.layers {
            out.push(&mut l.spatial);
            out.push(&mut l.temporal);
            out.push(&mut l.bias);
        }
        out.push(self.head_weights.as_mut_slice());
        out.push(&mut self.head_bias);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.blobs().iter().map(|b| b.len()).sum()
    }

    pub fn forward(&self, input: &Tensor3) -> Result<ForwardPass> {
        self.forward_with(input, &self.adjacency)
    }

    pub fn forward_with(&self, input: &Tensor3, adj: &PartitionedAdjacency) -> Result<ForwardPass> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (out, cache) = layer.forward(&x, adj)?;
            inputs.push(x);
            caches.push(cache);
            x = out;
        }
        let pooled = global_avg_pool(&x);
        let logits = linear_head(&pooled, &self.head_weights, &self.head_bias)?;
        let probabilities = softmax(&logits);
        Ok(ForwardPass { inputs, caches, output: x, pooled, logits, probabilities })
    }

    pub fn predict(&self, input: &Tensor3, adj: &PartitionedAdjacency) -> Result<Vec<f64>> {
        Ok(self.forward_with(input, adj)?.probabilities)
    }

    /// Cross-entropy of a cached forward pass and its analytic gradient with
    /// respect to every parameter.
    pub fn backward(&self, pass: &ForwardPass, adj: &PartitionedAdjacency, label: usize) -> Result<(f64, Gradients)> {
        let classes = self.num_classes();
        if label >= classes {
            return Err(Error::IndexOutOfRange { index: label, len: classes });
        }
        let loss = cross_entropy_logits(&pass.logits, label);
        let mut d_logits = pass.probabilities.clone();
        d_logits[label] -= 1.0;

        let features = pass.pooled.len();
        let mut head_w = vec![0.0; features * classes];
        for f in 0..features {
            for k in 0..classes {
                head_w[f * classes + k] = pass.pooled[f] * d_logits[k];
            }
        }
        let (_, t, n) = pass.output.dims();
        let inv_p = 1.0 / (t * n) as f64;
        let mut d_x = Tensor3::zeros(features, t, n);
        for (f, chunk) in d_x.as_mut_slice().chunks_mut(t * n).enumerate() {
            let g: f64 = (0..classes).map(|k| self.head_weights.get(f, k) * d_logits[k]).sum();
            chunk.fill(g * inv_p);
        }

        let mut layer_grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = if i + 1 < self.layers.len() { &pass.inputs[i + 1] } else { &pass.output };
            let (g, d_in) = layer.backward(adj, &pass.caches[i], out, &d_x, i > 0);
            layer_grads.push(g);
            if let Some(d) = d_in {
                d_x = d;
            }
        }
        layer_grads.reverse();
        let mut blobs = Vec::with_capacity(layer_grads.len() * 3 + 2);
        for g in layer_grads {
            blobs.push(g.spatial);
            blobs.push(g.temporal);
            blobs.push(g.bias);
        }
        blobs.push(head_w);
        blobs.push(d_logits);
        Ok((loss, Gradients(blobs)))
    }

    /// Loss and gradients for one labeled sample.
    pub fn loss_and_grads(&self, input: &Tensor3, adj: &PartitionedAdjacency, label: usize) -> Result<(f64, Gradients, usize)> {
        let pass = self.forward_with(input, adj)?;
        let predicted = argmax(&pass.probabilities);
        let (loss, grads) = self.backward(&pass, adj, label)?;
        Ok((loss, grads, predicted))
    }

    pub fn loss(&self, input: &Tensor3, adj: &PartitionedAdjacency, label: usize) -> Result<f64> {
        Ok(cross_entropy_logits(&self.forward_with(input, adj)?.logits, label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize, partition, GraphSpec};
    use rand::Rng;

    fn small(seed: u64) -> (GcnModel, Tensor3) {
        let spec = GraphSpec::custom(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (1, 4)]).unwrap();
        let mean: Vec<_> = (0..5).map(|i| Some((i as f64, (i * i % 3) as f64))).collect();
        let adj = normalize(&partition(&spec, PartitionStrategy::SpatialConfig, &mean).unwrap(), 0.001).unwrap();
        let config = ModelConfig {
            in_channels: 3,
            channels: vec![4, 6],
            strides: vec![1, 2],
            kernel_t: 3,
            num_classes: 3,
            connection: ConnectionStrategy::HumanOnly,
            partition: PartitionStrategy::SpatialConfig,
        };
        let mut model = GcnModel::new(config, adj, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for l in &mut model.layers {
            l.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.1..0.1));
        }
        let x = Tensor3::from_vec(3, 4, 5, (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        (model, x)
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        let eps = 1e-5;
        for seed in 0..3 {
            let (model, x) = small(seed);
            let adj = model.adjacency.clone();
            let (_, grads, _) = model.loss_and_grads(&x, &adj, 1).unwrap();
            let mut probe = model.clone();
            for (b, g) in grads.0.iter().enumerate() {
                for (i, &analytic) in g.iter().enumerate() {
                    let w = probe.blobs()[b][i];
                    probe.blobs_mut()[b][i] = w + eps;
                    let up = probe.loss(&x, &adj, 1).unwrap();
                    probe.blobs_mut()[b][i] = w - eps;
                    let down = probe.loss(&x, &adj, 1).unwrap();
                    probe.blobs_mut()[b][i] = w;
                    let numeric = (up - down) / (2.0 * eps);
                    let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                    assert!(rel < 1e-4, "blob {b} index {i}: {numeric} vs {analytic}");
                }
            }
        }
    }

    #[test]
    fn zero_model_bias_gradient_is_softmax_minus_onehot() {
        let (mut model, x) = small(4);
        model.blobs_mut().into_iter().for_each(|b| b.fill(0.0));
        let adj = model.adjacency.clone();
        let (_, grads, _) = model.loss_and_grads(&x, &adj, 2).unwrap();
        let third = 1.0 / 3.0;
        let expected = [third, third, third - 1.0];
        for (g, e) in grads.0.last().unwrap().iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn confident_correct_prediction_has_vanishing_gradients() {
        let (mut model, x) = small(5);
        model.head_bias = vec![0.0, 60.0, 0.0];
        let adj = model.adjacency.clone();
        let (loss, grads, predicted) = model.loss_and_grads(&x, &adj, 1).unwrap();
        assert_eq!(predicted, 1);
        assert!(loss < 1e-12);
        assert!(grads.max_abs() < 1e-12);
    }
}
