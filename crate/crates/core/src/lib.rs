//! Anticipatory dialogue engine.
//!
//! Predicts a user's next-turn affective reaction (emotion valence/arousal,
//! laughter occurrence/type) from the system's current turn, gates on
//! prediction confidence, and self-corrects online from recognition feedback.
//! Ships with a calibrated simulated user and an analysis toolkit so the
//! closed loop can be evaluated without real audio.

pub mod analysis;
pub mod controller;
pub mod error;
pub mod perception;
pub mod plan;
pub mod predictor;
pub mod laughter;
pub mod store;
pub mod types;
pub mod user;

pub use error::Error;
