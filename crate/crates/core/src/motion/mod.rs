//! Longitudinal trajectory probing (velocity profiles rolled out along a
//! path) and lateral path probing (sigmoidal lane-change blending).

mod blend;
mod profile;
mod rollout;

pub use blend::{blend_paths, blend_weight, path_from, Blend, BlendSpec};
pub use profile::{sample_profiles, ProbeConfig, VelocityProfile};
pub use rollout::{predict_other, roll_out, TrajectorySample, TrajectoryStep};
