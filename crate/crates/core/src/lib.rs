//! A glass-aware neural radiance field.
//!
//! A glass network predicts, per sample, a refraction density and a small
//! position offset; offsets accumulate along each ray so later samples are
//! queried where a refracted ray would have gone. A decomposition network
//! splits radiance into a view-independent branch and a view-dependent
//! feature that a decoder turns into colour and a gate blends in. Around the
//! model sit an analytic slab tracer for exact ground truth, a training loop,
//! image and glass-surface evaluation, and the `glassnerf` command-line tool.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod dataset;
pub mod eval;
pub mod fields;
pub mod geometry;
pub mod io;
pub mod oracle;
pub mod render;
pub mod train;
