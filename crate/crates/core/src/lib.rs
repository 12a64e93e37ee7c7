//! Canonical motion representation: skeleton layout, rotation math, and the
//! five-part body decomposition with an exact-inverse merge.

pub mod error;
pub mod io;
pub mod motion;
pub mod rotation;
pub mod skeleton;

pub use error::CoreError;
pub use motion::{merge_parts, merge_parts_raw, split_parts, MotionSequence, PartSet};
pub use rotation::{sixd_to_matrix, slerp, yaw_of, Mat3, UnitQuaternion};
pub use skeleton::Skeleton;
