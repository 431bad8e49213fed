//! Spatial task affordance prediction from egocentric video.
//!
//! Given an egocentric image and a free-text task, predict the ground region
//! (an isotropic Gaussian in the viewer's gravity-aligned frame) where a
//! person stands while doing that task.

pub mod baseline;
pub mod config;
pub mod dataset;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod navigation;
pub mod scalar;
pub mod seed;
pub mod synth;

pub use dataset::{EgoVideo, Frame, PreparedVideo, TaskSpan, TrainingPair};
pub use encoders::{Embedding, EmbeddingCache, TextEncoder, VisionAdapter};
pub use error::{Error, Result};
pub use geometry::{GravityAlignedPose, GroundGaussian, Polygon2D, Pose, Vec2, Vec3};
pub use model::{Checkpoint, Network, TrainConfig};
