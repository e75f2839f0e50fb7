use num_complex::Complex64;

use super::config::EstimatorKind;
use crate::error::{Result, SimError};

/// Bit error rate: Hamming distance over length.
pub fn ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<f64> {
    if tx_bits.len() != rx_bits.len() {
        return Err(SimError::LengthMismatch {
            expected: tx_bits.len(),
            got: rx_bits.len(),
        });
    }
    if tx_bits.is_empty() {
        return Ok(0.0);
    }
    let errors = tx_bits
        .iter()
        .zip(rx_bits)
        .filter(|(a, b)| (**a != 0) != (**b != 0))
        .count();
    Ok(errors as f64 / tx_bits.len() as f64)
}

/// Mean squared error between complex vectors: mean |e - t|^2.
pub fn mse(estimates: &[Complex64], truth: &[Complex64]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(SimError::LengthMismatch {
            expected: truth.len(),
            got: estimates.len(),
        });
    }
    if estimates.is_empty() {
        return Ok(0.0);
    }
    Ok(estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t).norm_sqr())
        .sum::<f64>()
        / estimates.len() as f64)
}

/// One sweep result row: metrics for a (SNR, estimator, user) triple.
/// `user` is 0 for the single-user link and the 1-based user index for NOMA.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub snr_db: f64,
    pub estimator: EstimatorKind,
    pub user: usize,
    pub mse_cfo: f64,
    pub mse_channel: f64,
    pub ber: f64,
    pub packet_loss: f64,
}
