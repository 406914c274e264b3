//! Diffusion-refined bird's-eye-view perception at desk scale.
//!
//! The pipeline: a convolutional image backbone predicts per-pixel features
//! and a depth distribution; a lift-splat view transformer pools them into a
//! BEV grid; a conditional denoising diffusion model refines a noisy BEV
//! sample under one of three condition signals; a cross-attention module
//! fuses the refined feature with the original BEV feature; a residual
//! decoder produces per-class segmentation logits. Everything runs on the
//! crate's own reverse-mode autodiff tensor engine, generic over f32
//! (training) and f64 (gradient checking).

pub mod archive;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod schedule;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Grads, Tape, Tensor};
