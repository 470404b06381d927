//! Compositional action recognition from object box trajectories.
//!
//! The crate is organized bottom-up:
//!
//! - [`numkit`]: dense f64 matrices, a reverse-mode autodiff tape, SGD with
//!   momentum, gradient checking, and a binary checkpoint container.
//! - [`geometry`]: boxes, IoU, and normalized center/size coordinates.
//! - [`tracker`]: a Kalman + Hungarian multi-object tracker that turns
//!   per-frame detections into per-video tracklets.
//! - [`splits`]: annotation ingestion, train/val split generators
//!   (compositional, shuffled, few-shot, one-class), and a synthetic
//!   trajectory corpus generator.
//! - [`stin`]: the spatial-temporal interaction network itself.
//! - [`harness`]: training/evaluation loops, metrics, and the CLI commands.

pub mod geometry;
pub mod harness;
pub mod numkit;
mod rng;
pub mod splits;
pub mod stin;
pub mod tracker;
