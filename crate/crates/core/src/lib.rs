//! Reference-based super-resolution engine.
//!
//! The pipeline upsamples an LR image, matches its VGG-style feature patches
//! against (augmented) high-resolution references, rebuilds per-layer feature
//! maps out of the matched reference features, and feeds them to a
//! texture-transfer generator. The loss and metric suite scores the result.
//!
//! Modules, bottom-up:
//! - [`image`]: image buffers, PNG/PPM I/O, bicubic resampling.
//! - [`weights`]: named tensors and the `NTTW` container.
//! - [`features`]: convolution primitives and the feature pyramid.
//! - [`swap`]: patch matching, correspondence projection, swapped-map assembly.
//! - [`transfer`]: the texture-transfer generator forward pass.
//! - [`losses`]: reconstruction/perceptual/texture losses, PSNR and SSIM.
//! - [`dataset`]: similarity-level pairing and warped-reference generation.

pub mod dataset;
pub mod error;
pub mod features;
pub mod image;
pub mod losses;
pub mod swap;
pub mod tensor;
pub mod transfer;
pub mod weights;

pub use error::{Error, ErrorKind, Result};
pub use features::{conv2d_forward, extract_pyramid, NetworkConfig};
pub use image::{bicubic_resample, degrade_ref, load_image, save_image, ImageBuffer};
pub use swap::{swap_pipeline, CorrespondenceMap, PatchGrid, SwapConfig, SwappedPyramid};
pub use tensor::FeatureMap;
pub use transfer::{transfer_forward, TransferConfig};
pub use weights::{load_weights, store_weights, WeightStore};
