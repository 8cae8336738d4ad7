//! CPU inference for the spatial-pyramid-upsampling U-Net.
//!
//! Layout is documented in [`arch`]; kernels live in [`ops`]. All kernels are
//! pure, and parallel work is split along boundaries fixed by tensor shapes,
//! so outputs are bit-identical for any thread count.

pub mod arch;
pub mod ops;
pub mod tensor;
pub mod weights;

pub use arch::{forward, forward_tensor, format_manifest, ArchConfig, ParamSpec};
pub use ops::{
    batchnorm3d, conv3d, depth_to_space, patch_expand3d, patch_merge3d, space_to_depth,
    BatchNormParams, ConvWeights,
};
pub use tensor::{concat_channels, Tensor5};
pub use weights::{load_weights, save_weights, Param, WeightStore};
