//! Skeletal motion representation.
//!
//! A [`MotionClip`] stores one 3x3 rotation matrix per joint per frame,
//! relative to the identity reference pose, flattened row-major into 9
//! values. Everything downstream (the autoencoder, losses, metrics) consumes
//! this flattened `L x J x 9` layout.

mod clip;
mod io;
mod ops;
pub mod rotation;
mod skeleton;

pub use clip::MotionClip;
pub use io::{read_motion_file, write_motion_file, MotionFile, MOTION_FORMAT, MOTION_VERSION};
pub use ops::{
    euler_to_rotation_matrices, finite_difference, frame_speeds, resample_fps, validate_rotations,
    DerivativeSequence, RotationViolation,
};
pub use rotation::EulerOrder;
pub use skeleton::Skeleton;

/// Number of scalars per joint rotation.
pub const ROT_DIM: usize = 9;

/// Canonical frame rate every model in the pipeline is trained at.
pub const TRAINING_FPS: f64 = 30.0;
