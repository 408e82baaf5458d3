//! Skeleton-based recognition of actions in which a person handles an object.
//!
//! The pipeline samples the most reliable frames of a tracked actor, builds a
//! human-only pose graph and an object-augmented pose graph, runs a
//! partitioned spatio-temporal graph convolution network over each, and fuses
//! the two softmax outputs. Supporting stages detect the handled object by
//! background subtraction and link poses across frames by optimal assignment.

pub mod config;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod objdet;
pub mod pipeline;
pub mod pose_io;
pub mod sampling;
pub mod synth;
pub mod tracking;
pub mod two_stream;

pub use error::{Error, Result};
