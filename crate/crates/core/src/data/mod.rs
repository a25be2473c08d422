//! Clips, landmarks, conditioning windows and the procedural toy corpus.

pub mod clip;
pub mod crop;
pub mod frame;
pub mod landmarks;
pub mod toy;
pub mod window;

pub use clip::{read_dataset, split_clips, write_dataset, FrameClip};
pub use crop::{center_crop, crop_clip, face_center};
pub use frame::Image;
pub use landmarks::{rasterize_landmarks, LandmarkSet};
pub use toy::make_toy_dataset;
pub use window::{
    build_window, window_centers, ConditioningWindow, PRIOR_FRAMES, PRIOR_FRAMES_CHANNELS, WINDOW_LEN, WINDOW_RADIUS,
};
