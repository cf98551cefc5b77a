//! Episode recording and bit-exact playback, frame rendering with attention rings,
//! and curve smoothing.

mod record;
mod render;
mod smooth;

pub use record::{
    read_trajectory, record_episode, replay, write_trajectory, ReplayReport, StepEntry, TrajectoryHeader,
    TrajectoryRecord, TRAJECTORY_FORMAT, TRAJECTORY_VERSION,
};
pub use render::{render_frame, render_frames, ring_radius, RenderStyle};
pub use smooth::{gaussian_kernel, smooth_curve};
