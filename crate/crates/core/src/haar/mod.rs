//! Haar-like features: integral images, rectangle filters, PSNR-driven
//! redundancy pruning, mask refinement and feature banks for injection.

mod feature;
mod integral;
mod kernel;

pub use feature::{
    apply_haar_filter, build_feature_bank, cascade_apply, map_psnr, psnr, raw_response_map, refine_with_mask,
    select_features, FeatureBank, FeatureMap, Normalization, DEFAULT_THRESHOLD_DB,
};
pub use integral::{integral_image, GrayImage, IntegralImage};
pub use kernel::{haar_response, HaarFamily, HaarKernel};
