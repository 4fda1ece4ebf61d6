//! Radar-based sense-and-avoid simulation library.
//!
//! Implements the full closed-loop pipeline of a planar MAV avoiding
//! obstacles with a two-antenna fast-chirp FMCW radar:
//!
//! 1. [`radar_model`] — synthetic I/Q frame generation from a scene of
//!    point reflectors, with configurable noise.
//! 2. [`detector`] — range FFT, Doppler FFT, peak detection and
//!    two-antenna phase-comparison bearing estimation.
//! 3. [`tracker`] — multi-target tracking: gated GNN association via the
//!    Hungarian algorithm, constant-acceleration Kalman filters in polar
//!    coordinates, covariance-thresholded track birth and death.
//! 4. [`avoidance`] — velocity-obstacle collision cones and a simple
//!    side-step manoeuvre.
//! 5. [`sim`] — deterministic closed-loop trial runner with CSV/JSON logs.
//!
//! The `sense-avoid` binary exposes the pipeline as a CLI; see
//! [`scenario`] for the configuration file format.

pub mod avoidance;
pub mod cli;
pub mod detector;
pub mod geometry;
pub mod radar_model;
pub mod scenario;
pub mod sim;
pub mod tracker;

pub use geometry::wrap_angle;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
