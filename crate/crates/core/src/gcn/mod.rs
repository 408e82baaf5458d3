//! Numerical core: tensors, partitioned graph convolution, temporal
//! convolution, classifier head, analytic gradients, SGD and checkpoints.

mod checkpoint;
mod layer;
mod model;
mod ops;
mod optim;
pub mod reference;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, MAGIC, VERSION};
pub use layer::{GcnLayer, LayerCache, LayerGrads};
pub use model::{ForwardPass, GcnModel, Gradients, ModelConfig, STANDARD_CHANNELS, STANDARD_KERNEL_T, STANDARD_STRIDES};
pub use ops::{argmax, cross_entropy, cross_entropy_logits, global_avg_pool, linear_head, relu, softmax};
pub use optim::{sgd_update, Sgd};
pub use tensor::{Matrix, Tensor3};

use crate::error::Result;
use crate::graph::PartitionedAdjacency;

/// `sum_j A_j X W_j` for every frame of `f_in`.
pub fn spatial_gconv_forward(f_in: &Tensor3, adj: &PartitionedAdjacency, layer: &GcnLayer) -> Result<Tensor3> {
    layer.spatial_forward(f_in, adj)
}

/// Temporal convolution of `f` with the layer's kernel and bias.
pub fn temporal_conv_forward(f: &Tensor3, layer: &GcnLayer) -> Result<Tensor3> {
    layer.temporal_forward(f)
}
