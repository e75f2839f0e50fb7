//! SNR sweep drivers. Each SNR point runs `trials_per_point` frames; each
//! trial owns an RNG stream derived from (seed, mode, point, trial), so the
//! same config and seed reproduce results byte for byte no matter how the
//! points are scheduled across workers, and classical/CNN runs with the same
//! seed see identical channels, offsets, bits and noise (paired seeds).
//!
//! Points run in parallel; the frames within a point run in order because
//! the CNN receiver's offset window is stream state.

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{EstimatorKind, ScenarioConfig, SweepMode};
use super::metrics::{mse, MetricRecord};
use crate::channel::{draw_channel, draw_cfo};
use crate::cnn_estimator::SequentialEstimator;
use crate::error::{Result, SimError};
use crate::link::{
    apply_impairment, assemble_frame, build_frame, payload_grids, random_frame_bits,
    receive_classical, receive_cnn, receive_perfect_csi, Impairment, LinkContext, RxFrame,
};
use crate::nn::CnnModel;
use crate::noma::{sic_decode_all, uplink_combine, NomaConfig, UserSignal};
use crate::rng::{rng_from, tags, SimRng};
use crate::waveform::qam_demodulate;

/// Trained refiner pair for CNN sweeps.
#[derive(Debug, Clone)]
pub struct CnnModels {
    pub cfo: CnnModel,
    pub ce: CnnModel,
}

fn mode_tag(mode: SweepMode) -> u64 {
    match mode {
        SweepMode::Oma => 0x10,
        SweepMode::NomaDl => 0x11,
        SweepMode::NomaUl => 0x12,
    }
}

fn trial_rng(cfg: &ScenarioConfig, mode: SweepMode, point: usize, trial: usize) -> SimRng {
    rng_from(
        cfg.seed,
        &[tags::TRIAL, mode_tag(mode), point as u64, trial as u64],
    )
}

fn make_estimator(
    cfg: &ScenarioConfig,
    models: Option<&CnnModels>,
) -> Result<Option<SequentialEstimator>> {
    match (cfg.estimator, models) {
        (EstimatorKind::Classical, _) => Ok(None),
        (EstimatorKind::Cnn, Some(m)) => Ok(Some(SequentialEstimator::new(
            m.cfo.clone(),
            m.ce.clone(),
            cfg.arch.cfo_window,
        )?)),
        (EstimatorKind::Cnn, None) => Err(SimError::MissingModel(
            "cnn estimator selected but no models supplied".into(),
        )),
    }
}

fn base_context(cfg: &ScenarioConfig) -> Result<LinkContext> {
    LinkContext::new(
        cfg.ofdm.clone(),
        cfg.channel.clone(),
        cfg.cfo.clone(),
        cfg.seed,
    )
}

fn snr_for(cfg: &ScenarioConfig, snr_db: f64) -> Option<f64> {
    if cfg.noiseless {
        None
    } else {
        Some(snr_db)
    }
}

/// Dispatch on mode. NOMA modes need `cfg.noma`; the CNN estimator needs
/// models.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    mode: SweepMode,
    models: Option<&CnnModels>,
) -> Result<Vec<MetricRecord>> {
    match mode {
        SweepMode::Oma => run_oma_sweep(cfg, models),
        SweepMode::NomaDl => run_noma_dl_sweep(cfg, models),
        SweepMode::NomaUl => run_noma_ul_sweep(cfg, models),
    }
}

/// Single-user sweep: one record per SNR point (user 0).
pub fn run_oma_sweep(
    cfg: &ScenarioConfig,
    models: Option<&CnnModels>,
) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    make_estimator(cfg, models)?;
    let ctx = base_context(cfg)?;
    cfg.snr_grid_db
        .par_iter()
        .enumerate()
        .map(|(pi, &snr_db)| {
            let mut estimator = make_estimator(cfg, models)?;
            let mut acc = PointAccumulator::new(1);
            for trial in 0..cfg.trials_per_point {
                let mut rng = trial_rng(cfg, SweepMode::Oma, pi, trial);
                let bits = random_frame_bits(&ctx, &mut rng);
                let frame = build_frame(&ctx, bits)?;
                let imp = Impairment {
                    channel: draw_channel(&ctx.channel, ctx.ofdm.fft_size, &mut rng)?,
                    cfo: draw_cfo(&ctx.cfo, &mut rng),
                    snr_db: snr_for(cfg, snr_db),
                };
                let rx = apply_impairment(&frame.time, &imp, &ctx, &mut rng)?;
                let truth = imp.channel.cfr_at(&ctx.layout.occupied);
                let out =
                    receive_dispatch(&rx, &ctx, cfg, &mut estimator, imp.cfo.epsilon, &truth)?;
                acc.absorb(0, &out, imp.cfo.epsilon, &truth, &frame.bits)?;
            }
            Ok(acc.into_records(snr_db, cfg.estimator, &[0])[0].clone())
        })
        .collect()
}

/// Downlink NOMA sweep: the superposed frame reaches every user through that
/// user's own channel (or one shared broadcast draw) and a shared offset;
/// each user runs its own estimation and cancels the stronger-power users
/// before it. One record per (SNR, user).
pub fn run_noma_dl_sweep(
    cfg: &ScenarioConfig,
    models: Option<&CnnModels>,
) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    make_estimator(cfg, models)?;
    let noma = cfg
        .noma
        .clone()
        .ok_or_else(|| SimError::InvalidConfig("NOMA sweep needs cfg.noma".into()))?;
    let m = noma.num_users();
    let tx_ctx = base_context(cfg)?;
    let rx_ctx = tx_ctx
        .clone()
        .with_pilot_value(Complex64::new(noma.composite_pilot_amplitude(), 0.0));

    cfg.snr_grid_db
        .par_iter()
        .enumerate()
        .map(|(pi, &snr_db)| {
            // One refiner instance per user: the offset window is per-stream
            // receiver state.
            let mut estimators: Vec<Option<SequentialEstimator>> = (0..m)
                .map(|_| make_estimator(cfg, models))
                .collect::<Result<_>>()?;
            let mut acc = PointAccumulator::new(m);
            for trial in 0..cfg.trials_per_point {
                let mut rng = trial_rng(cfg, SweepMode::NomaDl, pi, trial);

                // Per-user payloads, superposed in the frequency domain.
                let user_bits: Vec<Vec<u8>> =
                    (0..m).map(|_| random_frame_bits(&tx_ctx, &mut rng)).collect();
                let grids: Vec<Vec<Vec<Complex64>>> = user_bits
                    .iter()
                    .map(|b| payload_grids(&tx_ctx, b))
                    .collect::<Result<_>>()?;
                let mut superposed = Vec::with_capacity(tx_ctx.ofdm.num_symbols);
                for l in 0..tx_ctx.ofdm.num_symbols {
                    let mut grid = vec![Complex64::new(0.0, 0.0); tx_ctx.ofdm.fft_size];
                    for (u, user_grids) in grids.iter().enumerate() {
                        let amp = noma.amplitude(u + 1);
                        for (g, &x) in grid.iter_mut().zip(&user_grids[l]) {
                            *g += amp * x;
                        }
                    }
                    superposed.push(grid);
                }
                let tx_time = assemble_frame(&tx_ctx, &superposed)?;

                let eps = draw_cfo(&tx_ctx.cfo, &mut rng);
                let shared_channel = if cfg.independent_dl_channels {
                    None
                } else {
                    Some(draw_channel(&tx_ctx.channel, tx_ctx.ofdm.fft_size, &mut rng)?)
                };

                for user in 0..m {
                    let channel = match &shared_channel {
                        Some(ch) => ch.clone(),
                        None => draw_channel(&tx_ctx.channel, tx_ctx.ofdm.fft_size, &mut rng)?,
                    };
                    let imp = Impairment {
                        channel,
                        cfo: eps,
                        snr_db: snr_for(cfg, snr_db),
                    };
                    let rx = apply_impairment(&tx_time, &imp, &rx_ctx, &mut rng)?;
                    let truth = imp.channel.cfr_at(&rx_ctx.layout.occupied);
                    let out = receive_dispatch(
                        &rx,
                        &rx_ctx,
                        cfg,
                        &mut estimators[user],
                        imp.cfo.epsilon,
                        &truth,
                    )?;
                    let decoded = sic_bits(&out, &noma, user + 1)?;
                    acc.absorb_decoded(
                        user,
                        &out,
                        imp.cfo.epsilon,
                        &truth,
                        &user_bits[user],
                        &decoded,
                    )?;
                }
            }
            let users: Vec<usize> = (1..=m).collect();
            Ok(acc.into_records(snr_db, cfg.estimator, &users))
        })
        .collect::<Result<Vec<Vec<MetricRecord>>>>()
        .map(|nested| nested.into_iter().flatten().collect())
}

/// Uplink NOMA sweep: every user's frame crosses its own channel (one draw
/// shared when configured), the base station sees the sum under one offset,
/// estimates one artificial channel from the composite pilots, equalizes
/// once and cancels successively. One record per (SNR, user).
pub fn run_noma_ul_sweep(
    cfg: &ScenarioConfig,
    models: Option<&CnnModels>,
) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    make_estimator(cfg, models)?;
    let noma = cfg
        .noma
        .clone()
        .ok_or_else(|| SimError::InvalidConfig("NOMA sweep needs cfg.noma".into()))?;
    let m = noma.num_users();
    let tx_ctx = base_context(cfg)?;
    let composite = Complex64::new(noma.composite_pilot_amplitude(), 0.0);
    let rx_ctx = tx_ctx.clone().with_pilot_value(composite);

    cfg.snr_grid_db
        .par_iter()
        .enumerate()
        .map(|(pi, &snr_db)| {
            let mut estimator = make_estimator(cfg, models)?;
            let mut acc = PointAccumulator::new(m);
            for trial in 0..cfg.trials_per_point {
                let mut rng = trial_rng(cfg, SweepMode::NomaUl, pi, trial);

                let shared_channel = if cfg.ul_shared_channel {
                    Some(draw_channel(&tx_ctx.channel, tx_ctx.ofdm.fft_size, &mut rng)?)
                } else {
                    None
                };
                let mut users = Vec::with_capacity(m);
                for u in 0..m {
                    let bits = random_frame_bits(&tx_ctx, &mut rng);
                    let frame = build_frame(&tx_ctx, bits.clone())?;
                    let channel = match &shared_channel {
                        Some(ch) => ch.clone(),
                        None => draw_channel(&tx_ctx.channel, tx_ctx.ofdm.fft_size, &mut rng)?,
                    };
                    users.push(UserSignal {
                        user_index: u + 1,
                        bits,
                        samples: frame.time,
                        channel: Some(channel),
                    });
                }
                let eps = draw_cfo(&tx_ctx.cfo, &mut rng);
                let (rx, _) = uplink_combine(
                    &users,
                    &noma,
                    tx_ctx.ofdm.fft_size,
                    tx_ctx.ofdm.cp_length,
                    eps.epsilon,
                    snr_for(cfg, snr_db),
                    &mut rng,
                )?;

                // The artificial channel the base station estimates: the
                // amplitude-weighted mix of the user responses, normalized
                // by the composite pilot amplitude.
                let mut truth = vec![Complex64::new(0.0, 0.0); rx_ctx.layout.occupied.len()];
                for (u, user) in users.iter().enumerate() {
                    let cfr = user
                        .channel
                        .as_ref()
                        .expect("channel set above")
                        .cfr_at(&rx_ctx.layout.occupied);
                    let amp = noma.amplitude(u + 1);
                    for (t, h) in truth.iter_mut().zip(&cfr) {
                        *t += amp * h / composite;
                    }
                }

                let out =
                    receive_dispatch(&rx, &rx_ctx, cfg, &mut estimator, eps.epsilon, &truth)?;
                for user in 0..m {
                    let decoded = sic_bits(&out, &noma, user + 1)?;
                    acc.absorb_decoded(
                        user,
                        &out,
                        eps.epsilon,
                        &truth,
                        &users[user].bits,
                        &decoded,
                    )?;
                }
            }
            let users: Vec<usize> = (1..=m).collect();
            Ok(acc.into_records(snr_db, cfg.estimator, &users))
        })
        .collect::<Result<Vec<Vec<MetricRecord>>>>()
        .map(|nested| nested.into_iter().flatten().collect())
}

/// Run the configured receiver over one frame.
fn receive_dispatch(
    rx: &[Complex64],
    ctx: &LinkContext,
    cfg: &ScenarioConfig,
    estimator: &mut Option<SequentialEstimator>,
    true_eps: f64,
    truth: &[Complex64],
) -> Result<RxFrame> {
    if cfg.perfect_csi {
        return receive_perfect_csi(rx, ctx, true_eps, truth);
    }
    match estimator {
        Some(est) => receive_cnn(rx, ctx, est),
        None => receive_classical(rx, ctx),
    }
}

/// Successive cancellation down to `user_index`, demapping that user's bits
/// across all payload symbols.
fn sic_bits(out: &RxFrame, noma: &NomaConfig, user_index: usize) -> Result<Vec<u8>> {
    let mut bits = Vec::new();
    for eq in &out.equalized {
        let soft = sic_decode_all(&eq.symbols, noma)?;
        bits.extend(qam_demodulate(&soft[user_index - 1]));
    }
    Ok(bits)
}

/// Order-independent per-point reduction: plain sums and counts per user.
struct PointAccumulator {
    per_user: Vec<UserAccumulator>,
}

#[derive(Default, Clone)]
struct UserAccumulator {
    se_cfo: f64,
    mse_channel: f64,
    bit_errors: u64,
    bits: u64,
    wraps: u64,
    frames: u64,
}

impl PointAccumulator {
    fn new(users: usize) -> Self {
        PointAccumulator {
            per_user: vec![UserAccumulator::default(); users],
        }
    }

    /// Absorb a frame whose bits come straight from the receiver.
    fn absorb(
        &mut self,
        user: usize,
        out: &RxFrame,
        true_eps: f64,
        truth: &[Complex64],
        tx_bits: &[u8],
    ) -> Result<()> {
        let decoded = out.bits.clone();
        self.absorb_decoded(user, out, true_eps, truth, tx_bits, &decoded)
    }

    /// Absorb a frame with externally decoded bits (the SIC path).
    fn absorb_decoded(
        &mut self,
        user: usize,
        out: &RxFrame,
        true_eps: f64,
        truth: &[Complex64],
        tx_bits: &[u8],
        decoded: &[u8],
    ) -> Result<()> {
        let a = &mut self.per_user[user];
        let d_eps = out.eps_used - true_eps;
        a.se_cfo += d_eps * d_eps;
        let mut ch = 0.0;
        for est in &out.cfr_per_symbol {
            ch += mse(&est.cfr, truth)?;
        }
        a.mse_channel += ch / out.cfr_per_symbol.len() as f64;
        if tx_bits.len() != decoded.len() {
            return Err(SimError::LengthMismatch {
                expected: tx_bits.len(),
                got: decoded.len(),
            });
        }
        a.bit_errors += tx_bits
            .iter()
            .zip(decoded)
            .filter(|(x, y)| (**x != 0) != (**y != 0))
            .count() as u64;
        a.bits += tx_bits.len() as u64;
        if d_eps.abs() > 0.5 {
            a.wraps += 1;
        }
        a.frames += 1;
        Ok(())
    }

    fn into_records(
        self,
        snr_db: f64,
        estimator: EstimatorKind,
        user_labels: &[usize],
    ) -> Vec<MetricRecord> {
        self.per_user
            .iter()
            .zip(user_labels)
            .map(|(a, &user)| MetricRecord {
                snr_db,
                estimator,
                user,
                mse_cfo: a.se_cfo / a.frames.max(1) as f64,
                mse_channel: a.mse_channel / a.frames.max(1) as f64,
                ber: a.bit_errors as f64 / a.bits.max(1) as f64,
                packet_loss: a.wraps as f64 / a.frames.max(1) as f64,
            })
            .collect()
    }
}
