//! Link-level simulator and estimation library for OFDM links between
//! high-altitude platforms and low-Earth-orbit satellites.
//!
//! The crate covers the full chain: 4-QAM OFDM framing with pilots and a
//! repeated synchronization preamble, Rician block fading with a
//! Gaussian-mixture carrier-offset process, a classical receiver
//! (preamble correlation + least-squares estimation + zero forcing), a small
//! CNN regression engine that refines both estimates sequentially, 3-user
//! power-domain NOMA with successive interference cancellation, and a
//! Monte Carlo harness that sweeps SNR and writes per-point metrics as CSV.

pub mod channel;
pub mod classical;
pub mod cnn_estimator;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod link;
pub mod nn;
pub mod noma;
pub mod rng;
pub mod waveform;

pub use error::{Result, SimError};
