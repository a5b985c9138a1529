//! Autoregressive, camera-conditioned video extension and loop generation.
//!
//! A session owns a growing latent timeline and the camera trajectory that
//! produced it. Each extension folds the pressed keys into new poses, picks
//! a clean "head" from the existing timeline, and denoises the new frames by
//! inpainting along time with the head frozen.

mod looping;
mod session;

pub use looping::make_loop;
pub use session::{ConditionKind, HybridInput, Segment, SessionConfig, SessionState};
