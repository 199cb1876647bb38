//! Radial multi-coil acquisition: trajectory, NUFFT encoding, measurement
//! simulation, navigator extraction and coil compression.

mod compression;
mod kspace;
mod navigators;
pub mod nufft;
mod operator;
mod trajectory;

pub use compression::{pca_compress_coils, CoilCompression};
pub use kspace::{acquire, KSpaceData};
pub use navigators::{extract_navigators, NavigatorMatrix, NavigatorRow, BACKGROUND_FRACTION};
pub use operator::{
    adjoint, forward, gridding, normal, ramp_density, CartesianSense, EncodingOperator, RadialSense,
};
pub(crate) use operator::normal_flat;
pub use trajectory::{golden_angle_trajectory, RadialTrajectory, GOLDEN_ANGLE, NAVIGATOR_ANGLES};
