//! Functional mean-shift for curves sampled on a shared grid.
//!
//! The crate estimates a kernel surrogate density over a sample of curves,
//! climbs it with mean-shift iterations to find modal curves, clusters the
//! sample by basin of attraction, scans bandwidths for stable cluster
//! counts and tests candidate modes with a split-sample bootstrap.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` case.

pub mod density;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod function_space;
pub mod inference;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod scalar;
pub mod scan;

pub use density::{BandwidthRule, BandwidthSpec, DensityModel, LambdaPair, Normalization};
pub use engine::{ascend, blurring, blurring_pass, cluster, Destination, MeanShiftConfig, ModeSet, Trajectory};
pub use error::{Error, Result};
pub use function_space::{
    distance, estimate_derivative, inner_product, linear_combination, Curve, DerivativeMethod,
    DistanceKind, DistanceSpec, FunctionalSample, Grid,
};
pub use inference::{bootstrap_ci, stage_two, test_modes, ModeTestReport, Statistic, TestConfig};
pub use kernels::{builtin_pair, shadow_of, validate_pair, KernelPair, Profile, ValidationReport};
pub use scalar::Scalar;
pub use scan::{scan, ScanResult, ScanSpec};

pub type Grid64 = Grid<f64>;
pub type Curve64 = Curve<f64>;
pub type Sample64 = FunctionalSample<f64>;
pub type Model64 = DensityModel<f64>;
pub type ModeSet64 = ModeSet<f64>;
pub type DistanceSpec64 = DistanceSpec<f64>;

pub type Grid32 = Grid<f32>;
pub type Curve32 = Curve<f32>;
pub type Sample32 = FunctionalSample<f32>;
pub type Model32 = DensityModel<f32>;
