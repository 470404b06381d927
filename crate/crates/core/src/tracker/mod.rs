//! Multi-object tracking: a constant-velocity Kalman filter per track,
//! IoU-based assignment via the Hungarian algorithm, track lifecycle
//! management, and assembly of fixed-slot tracklets for the model.

mod assign;
mod kalman;
mod track;

pub use assign::assign;
pub use kalman::{
    kalman_predict, kalman_update, kalman_update_with_noise, measurement_from_box, state_to_bbox,
    KalmanState, INIT_COV_DIAG, MEASUREMENT_NOISE_DIAG, PROCESS_NOISE_DIAG,
};
pub use track::{assemble_tracklets, AssembledTracklets, Track, Tracker, TrackerParams, Tracklet};
