//! Stacked pairwise image quality assessment.
//!
//! Base metrics (native PSNR, SSIM and NIQE, plus externally scored deep
//! metrics) are computed for both candidates of every comparison pair and
//! stacked into an RBF-kernel SVM that predicts which candidate humans
//! prefer. The [`evalkit`] module runs the cross-validation, subset-search
//! and supporter analyses.

pub mod error;
pub mod evalkit;
pub mod metrics;
pub mod pairset;
pub mod scoring;
pub mod stacker;
pub mod svm;

pub use error::{Error, Result};
