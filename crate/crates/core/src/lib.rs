//! Boosted-cascade object detection with Haar features, plus AdaBoost over
//! RBF-SVM component classifiers with an adaptive kernel-width schedule.

pub mod boosting;
pub mod boostsvm;
pub mod cascade;
pub mod dataset;
pub mod evalkit;
pub mod features;
pub mod imaging;
pub mod real;
pub mod svm;

pub use dataset::{Dataset, FeatureAccess};
pub use imaging::{GrayImage, IntegralPair, Rect};

/// Mixes a stream index into a base seed (splitmix64 finaliser), so that
/// independent sub-streams never depend on thread scheduling.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
