//! Power-domain non-orthogonal multiple access: superposition coding,
//! successive interference cancellation at the receivers, uplink combining
//! at the base station, and the sum-rate metric.
//!
//! Users are indexed 1..=M in decreasing power-coefficient order: user 1 is
//! the weak-channel user holding most of the power and decodes first; each
//! stronger user subtracts the reconstructed signals of everyone before it.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{add_awgn, apply_cfo, apply_channel, measure_power, ChannelRealization};
use crate::error::{Result, SimError};

/// Power-allocation parameters. Coefficients are ordered weak user first
/// (largest share) and must sum to one, so superposing unit-power streams
/// conserves the total power budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NomaConfig {
    /// Per-user power fractions, strictly decreasing.
    pub power_coeffs: Vec<f64>,
    /// Total transmit power shared by the users.
    pub total_power: f64,
}

impl Default for NomaConfig {
    fn default() -> Self {
        NomaConfig {
            power_coeffs: vec![0.761, 0.191, 0.048],
            total_power: 1.0,
        }
    }
}

impl NomaConfig {
    pub fn num_users(&self) -> usize {
        self.power_coeffs.len()
    }

    /// Amplitude scaling sqrt(alpha_i * P_t) for the 1-based user index.
    pub fn amplitude(&self, user_index: usize) -> f64 {
        (self.power_coeffs[user_index - 1] * self.total_power).sqrt()
    }

    /// Coherent sum of all per-user amplitudes; this is what a known unit
    /// pilot adds up to when synchronized users superpose.
    pub fn composite_pilot_amplitude(&self) -> f64 {
        (1..=self.num_users()).map(|i| self.amplitude(i)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.power_coeffs.is_empty() {
            return Err(SimError::InvalidConfig("at least one NOMA user required".into()));
        }
        if self.total_power <= 0.0 {
            return Err(SimError::InvalidConfig("total_power must be > 0".into()));
        }
        if self.power_coeffs.iter().any(|&a| a <= 0.0) {
            return Err(SimError::InvalidConfig("power coefficients must be > 0".into()));
        }
        let sum: f64 = self.power_coeffs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidConfig(format!(
                "power coefficients sum to {sum}, expected 1"
            )));
        }
        if self.power_coeffs.windows(2).any(|w| w[0] <= w[1]) {
            return Err(SimError::InvalidConfig(
                "power coefficients must strictly decrease (weak user first)".into(),
            ));
        }
        Ok(())
    }
}

/// One user's transmit-side state. `samples` holds modulated data: frequency
/// symbols for downlink superposition or time samples for uplink combining.
/// The uplink additionally needs the user's own channel.
#[derive(Debug, Clone)]
pub struct UserSignal {
    /// 1-based index; 1 is the weak user with the largest power share.
    pub user_index: usize,
    pub bits: Vec<u8>,
    pub samples: Vec<Complex64>,
    pub channel: Option<ChannelRealization>,
}

fn check_users(users: &[UserSignal], cfg: &NomaConfig) -> Result<usize> {
    cfg.validate()?;
    if users.len() != cfg.num_users() {
        return Err(SimError::LengthMismatch {
            expected: cfg.num_users(),
            got: users.len(),
        });
    }
    let len = users[0].samples.len();
    for u in users {
        if u.samples.len() != len {
            return Err(SimError::LengthMismatch {
                expected: len,
                got: u.samples.len(),
            });
        }
    }
    Ok(len)
}

/// Superposition coding: y = sum_i sqrt(alpha_i P_t) x_i, elementwise over
/// the users' sample streams (users given in index order).
pub fn superpose(users: &[UserSignal], cfg: &NomaConfig) -> Result<Vec<Complex64>> {
    let len = check_users(users, cfg)?;
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (i, u) in users.iter().enumerate() {
        let amp = cfg.amplitude(i + 1);
        for (o, &x) in out.iter_mut().zip(&u.samples) {
            *o += amp * x;
        }
    }
    Ok(out)
}

/// One SIC stage at a downlink receiver. `equalized` is the channel-
/// equalized superposed constellation; `detected_priors` holds the
/// hard-decided unit-power symbols of users 1..i-1 (later users are never
/// touched). User 1 passes through without cancellation; user i >= 2 gets
/// the priors subtracted at their power scalings and is normalized by its
/// own amplitude.
pub fn sic_decode_downlink(
    equalized: &[Complex64],
    user_index: usize,
    cfg: &NomaConfig,
    detected_priors: &[Vec<Complex64>],
) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if user_index == 0 || user_index > cfg.num_users() {
        return Err(SimError::InvalidConfig(format!(
            "user index {user_index} outside 1..={}",
            cfg.num_users()
        )));
    }
    if user_index == 1 {
        return Ok(equalized.to_vec());
    }
    if detected_priors.len() < user_index - 1 {
        return Err(SimError::InvalidConfig(format!(
            "user {user_index} needs {} prior decisions, got {}",
            user_index - 1,
            detected_priors.len()
        )));
    }
    for prior in detected_priors.iter().take(user_index - 1) {
        if prior.len() != equalized.len() {
            return Err(SimError::LengthMismatch {
                expected: equalized.len(),
                got: prior.len(),
            });
        }
    }
    let mut residual = equalized.to_vec();
    for (j, prior) in detected_priors.iter().take(user_index - 1).enumerate() {
        let amp = cfg.amplitude(j + 1);
        for (r, &p) in residual.iter_mut().zip(prior) {
            *r -= amp * p;
        }
    }
    let own = cfg.amplitude(user_index);
    for r in residual.iter_mut() {
        *r /= own;
    }
    Ok(residual)
}

/// Run the full SIC chain on an equalized superposed constellation,
/// hard-deciding each user in power order and feeding the decisions forward.
/// Returns the soft symbols per user (demap them for bits).
pub fn sic_decode_all(equalized: &[Complex64], cfg: &NomaConfig) -> Result<Vec<Vec<Complex64>>> {
    let mut soft = Vec::with_capacity(cfg.num_users());
    let mut priors: Vec<Vec<Complex64>> = Vec::with_capacity(cfg.num_users());
    for i in 1..=cfg.num_users() {
        let s = sic_decode_downlink(equalized, i, cfg, &priors)?;
        let decided = crate::waveform::qam_modulate(&crate::waveform::qam_demodulate(&s))?;
        priors.push(decided);
        soft.push(s);
    }
    Ok(soft)
}

/// Signal received at the base station on the uplink: each user's time
/// samples run through that user's own channel, are scaled by the user's
/// power amplitude and summed; one common carrier offset rotates the sum and
/// noise is calibrated to the measured combined power. Returns the samples
/// and whether any user's channel memory exceeded the cyclic prefix.
#[allow(clippy::too_many_arguments)]
pub fn uplink_combine(
    users: &[UserSignal],
    cfg: &NomaConfig,
    fft_size: usize,
    cp_length: usize,
    epsilon: f64,
    snr_db: Option<f64>,
    rng: &mut impl Rng,
) -> Result<(Vec<Complex64>, bool)> {
    let len = check_users(users, cfg)?;
    let mut sum = vec![Complex64::new(0.0, 0.0); len];
    let mut cp_exceeded = false;
    for (i, u) in users.iter().enumerate() {
        let ch = u.channel.as_ref().ok_or_else(|| {
            SimError::InvalidConfig(format!("uplink user {} has no channel", u.user_index))
        })?;
        let faded = apply_channel(&u.samples, ch, cp_length);
        cp_exceeded |= faded.cp_exceeded;
        let amp = cfg.amplitude(i + 1);
        for (o, &x) in sum.iter_mut().zip(&faded.samples) {
            *o += amp * x;
        }
    }
    let rotated = if epsilon == 0.0 {
        sum
    } else {
        apply_cfo(&sum, epsilon, fft_size, 0)
    };
    let out = match snr_db {
        Some(snr) => add_awgn(&rotated, snr, measure_power(&rotated), rng)?,
        None => rotated,
    };
    Ok((out, cp_exceeded))
}

/// Aggregate spectral efficiency sum_i log2(1 + snr_i) in bits/s/Hz.
pub fn sum_rate(snrs: &[f64]) -> Result<f64> {
    if let Some(bad) = snrs.iter().find(|&&g| g < 0.0) {
        return Err(SimError::InvalidConfig(format!(
            "sum_rate needs nonnegative linear SNRs, got {bad}"
        )));
    }
    Ok(snrs.iter().map(|g| (1.0 + g).log2()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use crate::waveform::{qam_demodulate, qam_modulate};
    use rand::SeedableRng;

    fn qam_stream(seed: u64, n: usize) -> (Vec<u8>, Vec<Complex64>) {
        let mut rng = SimRng::seed_from_u64(seed);
        let bits: Vec<u8> = (0..n * 2).map(|_| rng.random_range(0..2u8)).collect();
        let syms = qam_modulate(&bits).unwrap();
        (bits, syms)
    }

    fn users(n_syms: usize) -> Vec<UserSignal> {
        (1..=3)
            .map(|i| {
                let (bits, samples) = qam_stream(i as u64, n_syms);
                UserSignal {
                    user_index: i,
                    bits,
                    samples,
                    channel: None,
                }
            })
            .collect()
    }

    #[test]
    fn table_coefficients_sum_to_one_exactly() {
        let cfg = NomaConfig::default();
        assert!(cfg.validate().is_ok());
        let sum: f64 = cfg.power_coeffs.iter().sum();
        assert_eq!(sum, 1.0);
    }

    #[test]
    fn config_rejects_bad_coefficients() {
        let up = NomaConfig {
            power_coeffs: vec![0.2, 0.8],
            total_power: 1.0,
        };
        assert!(up.validate().is_err());
        let off = NomaConfig {
            power_coeffs: vec![0.7, 0.2],
            total_power: 1.0,
        };
        assert!(off.validate().is_err());
    }

    #[test]
    fn superposition_conserves_power() {
        // With independent unit-power streams and coefficients summing to
        // one, E|y|^2 = P_t.
        let cfg = NomaConfig::default();
        let us = users(100_000);
        let y = superpose(&us, &cfg).unwrap();
        let p = measure_power(&y);
        assert!((p - 1.0).abs() < 0.01, "superposed power {p}");
    }

    #[test]
    fn single_user_superposition_is_identity() {
        let cfg = NomaConfig {
            power_coeffs: vec![1.0],
            total_power: 1.0,
        };
        let (bits, samples) = qam_stream(9, 50);
        let u = UserSignal {
            user_index: 1,
            bits,
            samples: samples.clone(),
            channel: None,
        };
        let y = superpose(&[u], &cfg).unwrap();
        assert_eq!(y, samples);
    }

    #[test]
    fn total_power_scales_amplitude() {
        let mut cfg = NomaConfig::default();
        let us = users(64);
        let y1 = superpose(&us, &cfg).unwrap();
        cfg.total_power = 4.0;
        let y4 = superpose(&us, &cfg).unwrap();
        for (a, b) in y4.iter().zip(&y1) {
            assert!((a - b * 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn worst_case_interference_keeps_decisions_exact() {
        // Enumerate all 64 4-QAM triples through the noiseless chain with
        // perfect priors: the residual interference on user 2 is
        // sqrt(a3/a2) ~ 0.501 per symbol, at most 0.354 per I/Q component,
        // which stays below the 0.7071 decision distance. User 3 cancels
        // everything. So every user decodes exactly.
        let cfg = NomaConfig::default();
        let points = [
            Complex64::new(1.0, 1.0),
            Complex64::new(1.0, -1.0),
            Complex64::new(-1.0, 1.0),
            Complex64::new(-1.0, -1.0),
        ]
        .map(|p| p * std::f64::consts::FRAC_1_SQRT_2);

        let ratio = (cfg.power_coeffs[2] / cfg.power_coeffs[1]).sqrt();
        assert!((ratio - 0.5013) < 1e-3);

        for &x1 in &points {
            for &x2 in &points {
                for &x3 in &points {
                    let us: Vec<UserSignal> = [x1, x2, x3]
                        .iter()
                        .enumerate()
                        .map(|(i, &s)| UserSignal {
                            user_index: i + 1,
                            bits: qam_demodulate(&[s]),
                            samples: vec![s],
                            channel: None,
                        })
                        .collect();
                    let y = superpose(&us, &cfg).unwrap();

                    // User 1 decodes the superposition directly.
                    let soft1 = sic_decode_downlink(&y, 1, &cfg, &[]).unwrap();
                    assert_eq!(qam_demodulate(&soft1), qam_demodulate(&[x1]));

                    // User 2 subtracts the (correct) user-1 decision.
                    let soft2 = sic_decode_downlink(&y, 2, &cfg, &[vec![x1]]).unwrap();
                    assert_eq!(qam_demodulate(&soft2), qam_demodulate(&[x2]));
                    let expect2 = x2 + ratio * x3;
                    assert!((soft2[0] - expect2).norm() < 1e-12);

                    // User 3 cancels both and recovers exactly.
                    let soft3 =
                        sic_decode_downlink(&y, 3, &cfg, &[vec![x1], vec![x2]]).unwrap();
                    assert!((soft3[0] - x3).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn later_priors_do_not_affect_earlier_users() {
        let cfg = NomaConfig::default();
        let us = users(32);
        let y = superpose(&us, &cfg).unwrap();
        let garbage = vec![Complex64::new(123.0, -456.0); 32];
        let with_extra =
            sic_decode_downlink(&y, 2, &cfg, &[us[0].samples.clone(), garbage]).unwrap();
        let without = sic_decode_downlink(&y, 2, &cfg, &[us[0].samples.clone()]).unwrap();
        assert_eq!(with_extra, without);
    }

    #[test]
    fn missing_priors_error() {
        let cfg = NomaConfig::default();
        let y = vec![Complex64::new(1.0, 0.0); 4];
        assert!(sic_decode_downlink(&y, 3, &cfg, &[vec![Complex64::new(1.0, 0.0); 4]]).is_err());
    }

    #[test]
    fn sic_chain_recovers_all_users_noiselessly() {
        let cfg = NomaConfig::default();
        let us = users(500);
        let y = superpose(&us, &cfg).unwrap();
        let soft = sic_decode_all(&y, &cfg).unwrap();
        for (u, s) in us.iter().zip(&soft) {
            assert_eq!(qam_demodulate(s), u.bits, "user {}", u.user_index);
        }
    }

    #[test]
    fn uplink_single_flat_user_reduces_to_scaling() {
        let cfg = NomaConfig {
            power_coeffs: vec![1.0],
            total_power: 4.0,
        };
        let (bits, samples) = qam_stream(4, 40);
        let u = UserSignal {
            user_index: 1,
            bits,
            samples: samples.clone(),
            channel: Some(
                ChannelRealization::from_taps(vec![Complex64::new(1.0, 0.0)], 8).unwrap(),
            ),
        };
        let mut rng = SimRng::seed_from_u64(0);
        let (rx, warn) = uplink_combine(&[u], &cfg, 256, 16, 0.0, None, &mut rng).unwrap();
        assert!(!warn);
        for (a, b) in rx.iter().zip(&samples) {
            assert!((a - b * 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn uplink_with_flat_unit_channels_equals_downlink_superposition() {
        let cfg = NomaConfig::default();
        let mut us = users(64);
        for u in us.iter_mut() {
            u.channel = Some(
                ChannelRealization::from_taps(vec![Complex64::new(1.0, 0.0)], 8).unwrap(),
            );
        }
        let mut rng = SimRng::seed_from_u64(1);
        let (ul, _) = uplink_combine(&us, &cfg, 256, 16, 0.0, None, &mut rng).unwrap();
        let dl = superpose(&us, &cfg).unwrap();
        for (a, b) in ul.iter().zip(&dl) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn uplink_energy_balances_signal_plus_noise() {
        // Monte Carlo energy oracle: combined power should match the
        // coefficient-weighted convolved energies plus the injected noise.
        use crate::channel::{draw_channel, RicianChannelSpec};
        let cfg = NomaConfig::default();
        let spec = RicianChannelSpec::default();
        let mut rng = SimRng::seed_from_u64(5);
        let snr_db = 10.0;
        let trials = 200;
        let n_syms = 256;
        let mut measured = 0.0;
        let mut expected = 0.0;
        for _ in 0..trials {
            let mut us = users(n_syms);
            for u in us.iter_mut() {
                let (_, s) = qam_stream(rng.random(), n_syms);
                u.samples = s;
                u.channel = Some(draw_channel(&spec, 8, &mut rng).unwrap());
            }
            // Noise-free combined power defines the noise level.
            let (clean, _) =
                uplink_combine(&us, &cfg, 256, 16, 0.1, None, &mut rng.clone()).unwrap();
            let p_clean = measure_power(&clean);
            expected += p_clean * (1.0 + 10f64.powf(-snr_db / 10.0));
            let (noisy, _) =
                uplink_combine(&us, &cfg, 256, 16, 0.1, Some(snr_db), &mut rng).unwrap();
            measured += measure_power(&noisy);
        }
        let ratio = measured / expected;
        assert!((ratio - 1.0).abs() < 0.02, "energy ratio {ratio}");
    }

    #[test]
    fn uplink_requires_channels() {
        let cfg = NomaConfig::default();
        let us = users(8);
        let mut rng = SimRng::seed_from_u64(2);
        assert!(uplink_combine(&us, &cfg, 256, 16, 0.0, None, &mut rng).is_err());
    }

    #[test]
    fn sum_rate_values() {
        assert_eq!(sum_rate(&[1.0, 1.0, 1.0]).unwrap(), 3.0);
        assert_eq!(sum_rate(&[0.0]).unwrap(), 0.0);
        // Direct evaluation oracle: 2 + 1 + log2(1.2511).
        let v = sum_rate(&[3.0, 1.0, 0.2511]).unwrap();
        assert!((v - 3.3232).abs() <= 1e-4, "sum rate {v}");
        assert!(sum_rate(&[-0.1]).is_err());
    }

    #[test]
    fn sum_rate_is_monotone() {
        let base = sum_rate(&[1.0, 2.0, 3.0]).unwrap();
        assert!(sum_rate(&[1.5, 2.0, 3.0]).unwrap() > base);
        assert!(sum_rate(&[1.0, 2.0, 3.5]).unwrap() > base);
    }
}
