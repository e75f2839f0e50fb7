//! Single-frame link machinery shared by dataset synthesis and the Monte
//! Carlo sweeps, so training data and evaluation traverse one code path.
//!
//! A frame is laid out as
//!
//! ```text
//! | preamble CP | preamble half 1 | preamble half 2 | CP+symbol 0 | ... |
//! ```
//!
//! The preamble gets its own cyclic prefix so its two halves stay exactly
//! periodic through multipath, and it is scaled to the payload's per-sample
//! power so the frame sees a uniform signal level. One channel realization
//! and one carrier offset apply per frame; noise is calibrated against the
//! post-channel signal power.

use num_complex::Complex64;

use crate::channel::{
    add_awgn, apply_cfo, apply_channel, draw_cfo, draw_channel, measure_power, CfoMixture,
    CfoValue, ChannelRealization, RicianChannelSpec,
};
use crate::classical::{
    correct_cfo, interpolate_cfr, ls_estimate, schmidl_cox_cfo, zf_equalize, ChannelEstimate,
    EqualizedSymbols,
};
use crate::cnn_estimator::SequentialEstimator;
use crate::error::{Result, SimError};
use crate::waveform::{
    build_preamble, extract_pilots, insert_pilots, ofdm_demodulate, ofdm_modulate, qam_demodulate,
    qam_modulate, FrameLayout, OfdmConfig, Preamble,
};

use rand::Rng;

/// Everything a transmitter/receiver pair needs that stays fixed across
/// frames. `pilot_value` is the pilot amplitude the receiver divides out;
/// it is 1 for a single transmitter and the coherent sum of the per-user
/// scalings when several synchronized users superpose.
#[derive(Debug, Clone)]
pub struct LinkContext {
    pub ofdm: OfdmConfig,
    pub layout: FrameLayout,
    pub preamble: Preamble,
    pub channel: RicianChannelSpec,
    pub cfo: CfoMixture,
    pub pilot_value: Complex64,
}

impl LinkContext {
    pub fn new(
        ofdm: OfdmConfig,
        channel: RicianChannelSpec,
        cfo: CfoMixture,
        preamble_seed: u64,
    ) -> Result<Self> {
        ofdm.validate()?;
        channel.validate()?;
        cfo.validate()?;
        let layout = FrameLayout::new(&ofdm)?;
        let preamble = build_preamble(&ofdm, preamble_seed);
        Ok(LinkContext {
            ofdm,
            layout,
            preamble,
            channel,
            cfo,
            pilot_value: Complex64::new(1.0, 0.0),
        })
    }

    /// Same link with a different known pilot amplitude.
    pub fn with_pilot_value(mut self, pilot_value: Complex64) -> Self {
        self.pilot_value = pilot_value;
        self
    }

    /// Payload bits carried by one frame.
    pub fn bits_per_frame(&self) -> usize {
        self.ofdm.num_symbols * self.layout.num_data() * 2
    }

    /// Total samples in one frame.
    pub fn frame_len(&self) -> usize {
        self.ofdm.cp_length
            + 2 * self.ofdm.preamble_half_len
            + self.ofdm.num_symbols * self.ofdm.symbol_len()
    }

    fn preamble_start(&self) -> usize {
        self.ofdm.cp_length
    }

    fn symbol_start(&self, l: usize) -> usize {
        self.ofdm.cp_length + 2 * self.ofdm.preamble_half_len + l * self.ofdm.symbol_len()
    }
}

/// One transmitted frame: the payload bits, the per-symbol frequency grids
/// and the assembled time-domain samples.
#[derive(Debug, Clone)]
pub struct TxFrame {
    pub bits: Vec<u8>,
    pub grids: Vec<Vec<Complex64>>,
    pub time: Vec<Complex64>,
}

/// Uniform random payload bits for one frame.
pub fn random_frame_bits(ctx: &LinkContext, rng: &mut impl Rng) -> Vec<u8> {
    (0..ctx.bits_per_frame()).map(|_| rng.random_range(0..2u8)).collect()
}

/// Map payload bits onto per-symbol frequency grids (pilots included).
pub fn payload_grids(ctx: &LinkContext, bits: &[u8]) -> Result<Vec<Vec<Complex64>>> {
    if bits.len() != ctx.bits_per_frame() {
        return Err(SimError::LengthMismatch {
            expected: ctx.bits_per_frame(),
            got: bits.len(),
        });
    }
    let per_symbol = ctx.layout.num_data() * 2;
    bits.chunks_exact(per_symbol)
        .map(|chunk| insert_pilots(&qam_modulate(chunk)?, &ctx.layout))
        .collect()
}

/// Assemble time samples from per-symbol grids: prefixed preamble first,
/// then each OFDM symbol with its cyclic prefix. The preamble is scaled to
/// the payload's per-sample power.
pub fn assemble_frame(ctx: &LinkContext, grids: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
    if grids.len() != ctx.ofdm.num_symbols {
        return Err(SimError::LengthMismatch {
            expected: ctx.ofdm.num_symbols,
            got: grids.len(),
        });
    }
    let mut payload = Vec::with_capacity(ctx.ofdm.num_symbols * ctx.ofdm.symbol_len());
    for grid in grids {
        payload.extend(ofdm_modulate(grid, &ctx.ofdm)?);
    }
    let payload_power = measure_power(&payload);
    let scale = if payload_power > 0.0 { payload_power.sqrt() } else { 1.0 };

    let full = ctx.preamble.full();
    let mut time = Vec::with_capacity(ctx.frame_len());
    // Cyclic prefix for the preamble: a copy of its tail.
    time.extend(full[full.len() - ctx.ofdm.cp_length..].iter().map(|v| v * scale));
    time.extend(full.iter().map(|v| v * scale));
    time.extend(payload);
    Ok(time)
}

/// Bits -> grids -> time samples for a single transmitter.
pub fn build_frame(ctx: &LinkContext, bits: Vec<u8>) -> Result<TxFrame> {
    let grids = payload_grids(ctx, &bits)?;
    let time = assemble_frame(ctx, &grids)?;
    Ok(TxFrame { bits, grids, time })
}

/// Block-fading state for one frame. `snr_db: None` means no noise.
#[derive(Debug, Clone)]
pub struct Impairment {
    pub channel: ChannelRealization,
    pub cfo: CfoValue,
    pub snr_db: Option<f64>,
}

/// Draw the per-frame channel and offset.
pub fn draw_impairment(
    ctx: &LinkContext,
    snr_db: Option<f64>,
    rng: &mut impl Rng,
) -> Result<Impairment> {
    Ok(Impairment {
        channel: draw_channel(&ctx.channel, ctx.ofdm.fft_size, rng)?,
        cfo: draw_cfo(&ctx.cfo, rng),
        snr_db,
    })
}

/// Channel, then offset rotation (phase reference at frame sample 0), then
/// noise calibrated to the measured post-channel power.
pub fn apply_impairment(
    tx_time: &[Complex64],
    imp: &Impairment,
    ctx: &LinkContext,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>> {
    let faded = apply_channel(tx_time, &imp.channel, ctx.ofdm.cp_length);
    let rotated = apply_cfo(&faded.samples, imp.cfo.epsilon, ctx.ofdm.fft_size, 0);
    match imp.snr_db {
        Some(snr) => add_awgn(&rotated, snr, measure_power(&rotated), rng),
        None => Ok(rotated),
    }
}

/// What a receiver recovers from one frame.
#[derive(Debug, Clone)]
pub struct RxFrame {
    /// Preamble estimate before any refinement.
    pub eps_raw: f64,
    /// Offset the receiver actually corrected with.
    pub eps_used: f64,
    /// Channel estimate per payload symbol, over the occupied subcarriers.
    pub cfr_per_symbol: Vec<ChannelEstimate>,
    /// Equalized data subcarriers per payload symbol.
    pub equalized: Vec<EqualizedSymbols>,
    /// Hard decisions over all payload symbols.
    pub bits: Vec<u8>,
}

/// Raw preamble-correlation offset estimate for a received frame.
pub fn estimate_preamble_cfo(rx: &[Complex64], ctx: &LinkContext) -> Result<f64> {
    expect_frame_len(rx, ctx)?;
    let hp = ctx.ofdm.preamble_half_len;
    let start = ctx.preamble_start();
    let p1 = &rx[start..start + hp];
    let p2 = &rx[start + hp..start + 2 * hp];
    Ok(schmidl_cox_cfo(p1, p2, ctx.ofdm.fft_size, hp)?.epsilon_hat)
}

fn expect_frame_len(rx: &[Complex64], ctx: &LinkContext) -> Result<()> {
    if rx.len() != ctx.frame_len() {
        return Err(SimError::LengthMismatch {
            expected: ctx.frame_len(),
            got: rx.len(),
        });
    }
    Ok(())
}

/// Classical receiver: preamble offset estimate, correction, per-symbol
/// least-squares estimation with linear interpolation, zero forcing, hard
/// decisions.
pub fn receive_classical(rx: &[Complex64], ctx: &LinkContext) -> Result<RxFrame> {
    let eps = estimate_preamble_cfo(rx, ctx)?;
    finish_receive(rx, ctx, eps, eps, None)
}

/// CNN receiver: the raw offset estimate passes through the sequential
/// refiner's offset stage, the frame is corrected with the refined value,
/// and each symbol's interpolated estimate passes through the channel stage.
pub fn receive_cnn(
    rx: &[Complex64],
    ctx: &LinkContext,
    est: &mut SequentialEstimator,
) -> Result<RxFrame> {
    let raw = estimate_preamble_cfo(rx, ctx)?;
    let refined = est.refine_cfo(raw)?;
    finish_receive(rx, ctx, raw, refined, Some(est))
}

/// Genie receiver: corrects with the true offset and equalizes with the true
/// channel response (given over the occupied subcarriers).
pub fn receive_perfect_csi(
    rx: &[Complex64],
    ctx: &LinkContext,
    true_eps: f64,
    true_cfr: &[Complex64],
) -> Result<RxFrame> {
    expect_frame_len(rx, ctx)?;
    if true_cfr.len() != ctx.layout.occupied.len() {
        return Err(SimError::LengthMismatch {
            expected: ctx.layout.occupied.len(),
            got: true_cfr.len(),
        });
    }
    let corrected = correct_cfo(rx, true_eps, ctx.ofdm.fft_size, 0);
    let data_positions = ctx.layout.data_positions();
    let mut cfr_per_symbol = Vec::with_capacity(ctx.ofdm.num_symbols);
    let mut equalized = Vec::with_capacity(ctx.ofdm.num_symbols);
    let mut bits = Vec::with_capacity(ctx.bits_per_frame());
    for l in 0..ctx.ofdm.num_symbols {
        let start = ctx.symbol_start(l);
        let grid = ofdm_demodulate(&corrected[start..start + ctx.ofdm.symbol_len()], &ctx.ofdm)?;
        let (_, y_data) = extract_pilots(&grid, &ctx.layout)?;
        let est_at_data: Vec<Complex64> = data_positions.iter().map(|&p| true_cfr[p]).collect();
        let eq = zf_equalize(&y_data, &est_at_data)?;
        bits.extend(qam_demodulate(&eq.symbols));
        cfr_per_symbol.push(ChannelEstimate {
            cfr: true_cfr.to_vec(),
        });
        equalized.push(eq);
    }
    Ok(RxFrame {
        eps_raw: true_eps,
        eps_used: true_eps,
        cfr_per_symbol,
        equalized,
        bits,
    })
}

fn finish_receive(
    rx: &[Complex64],
    ctx: &LinkContext,
    eps_raw: f64,
    eps_used: f64,
    refiner: Option<&SequentialEstimator>,
) -> Result<RxFrame> {
    expect_frame_len(rx, ctx)?;
    let corrected = correct_cfo(rx, eps_used, ctx.ofdm.fft_size, 0);
    let x_pilots = vec![ctx.pilot_value; ctx.layout.num_pilots()];
    let data_positions = ctx.layout.data_positions();

    let mut cfr_per_symbol = Vec::with_capacity(ctx.ofdm.num_symbols);
    let mut equalized = Vec::with_capacity(ctx.ofdm.num_symbols);
    let mut bits = Vec::with_capacity(ctx.bits_per_frame());
    for l in 0..ctx.ofdm.num_symbols {
        let start = ctx.symbol_start(l);
        let grid = ofdm_demodulate(&corrected[start..start + ctx.ofdm.symbol_len()], &ctx.ofdm)?;
        let (y_pilots, y_data) = extract_pilots(&grid, &ctx.layout)?;
        let pilot_est = ls_estimate(&y_pilots, &x_pilots)?;
        let mut est = interpolate_cfr(
            &pilot_est,
            &ctx.layout.pilot_positions,
            ctx.layout.occupied.len(),
        )?;
        if let Some(refiner) = refiner {
            est = refiner.refine_channel(&est)?;
        }
        let est_at_data: Vec<Complex64> = data_positions.iter().map(|&p| est.cfr[p]).collect();
        let eq = zf_equalize(&y_data, &est_at_data)?;
        bits.extend(qam_demodulate(&eq.symbols));
        cfr_per_symbol.push(est);
        equalized.push(eq);
    }
    Ok(RxFrame {
        eps_raw,
        eps_used,
        cfr_per_symbol,
        equalized,
        bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    fn flat_ctx() -> LinkContext {
        LinkContext::new(
            OfdmConfig::default(),
            RicianChannelSpec::flat(),
            CfoMixture::fixed(0.0),
            7,
        )
        .unwrap()
    }

    fn faded_ctx() -> LinkContext {
        LinkContext::new(
            OfdmConfig::default(),
            RicianChannelSpec::default(),
            CfoMixture::from_seed(3),
            7,
        )
        .unwrap()
    }

    #[test]
    fn frame_geometry_adds_up() {
        let ctx = flat_ctx();
        assert_eq!(ctx.frame_len(), 16 + 320 + 6 * 272);
        assert_eq!(ctx.bits_per_frame(), 6 * 112 * 2);
        let mut rng = SimRng::seed_from_u64(1);
        let bits = random_frame_bits(&ctx, &mut rng);
        let frame = build_frame(&ctx, bits).unwrap();
        assert_eq!(frame.time.len(), ctx.frame_len());
        assert_eq!(frame.grids.len(), 6);
    }

    #[test]
    fn preamble_power_matches_payload_power() {
        let ctx = flat_ctx();
        let mut rng = SimRng::seed_from_u64(2);
        let frame = build_frame(&ctx, random_frame_bits(&ctx, &mut rng)).unwrap();
        let pre = &frame.time[16..336];
        let payload = &frame.time[336..];
        let p_pre = measure_power(pre);
        let p_pay = measure_power(payload);
        assert!(
            (p_pre / p_pay - 1.0).abs() < 1e-9,
            "preamble power {p_pre} vs payload {p_pay}"
        );
    }

    #[test]
    fn noiseless_flat_chain_recovers_bits_exactly() {
        let ctx = flat_ctx();
        let mut rng = SimRng::seed_from_u64(3);
        for trial in 0..5 {
            let bits = random_frame_bits(&ctx, &mut rng);
            let frame = build_frame(&ctx, bits.clone()).unwrap();
            let eps = -0.37 + 0.15 * trial as f64;
            let imp = Impairment {
                channel: draw_channel(&ctx.channel, 256, &mut rng).unwrap(),
                cfo: CfoValue { epsilon: eps },
                snr_db: None,
            };
            let rx = apply_impairment(&frame.time, &imp, &ctx, &mut rng).unwrap();
            let out = receive_classical(&rx, &ctx).unwrap();
            assert!(
                (out.eps_raw - eps).abs() < 1e-9,
                "trial {trial}: estimate {} for true {eps}",
                out.eps_raw
            );
            assert_eq!(out.bits, bits, "trial {trial}");
        }
    }

    #[test]
    fn noiseless_multipath_chain_recovers_bits_exactly() {
        // The preamble CP keeps the halves periodic through the 3-tap
        // channel, and per-symbol LS absorbs the per-symbol phase.
        let ctx = faded_ctx();
        let mut rng = SimRng::seed_from_u64(4);
        for _ in 0..5 {
            let bits = random_frame_bits(&ctx, &mut rng);
            let frame = build_frame(&ctx, bits.clone()).unwrap();
            let imp = draw_impairment(&ctx, None, &mut rng).unwrap();
            let rx = apply_impairment(&frame.time, &imp, &ctx, &mut rng).unwrap();
            let out = receive_classical(&rx, &ctx).unwrap();
            assert!((out.eps_raw - imp.cfo.epsilon).abs() < 1e-6);
            assert_eq!(out.bits, bits);
        }
    }

    #[test]
    fn perfect_csi_receiver_matches_truth() {
        let ctx = faded_ctx();
        let mut rng = SimRng::seed_from_u64(5);
        let bits = random_frame_bits(&ctx, &mut rng);
        let frame = build_frame(&ctx, bits.clone()).unwrap();
        let imp = draw_impairment(&ctx, None, &mut rng).unwrap();
        let rx = apply_impairment(&frame.time, &imp, &ctx, &mut rng).unwrap();
        let truth = imp.channel.cfr_at(&ctx.layout.occupied);
        let out = receive_perfect_csi(&rx, &ctx, imp.cfo.epsilon, &truth).unwrap();
        assert_eq!(out.bits, bits);
    }

    #[test]
    fn cnn_receiver_with_passthrough_models_equals_classical() {
        use crate::nn::CnnModel;
        let ctx = faded_ctx();
        let mut rng = SimRng::seed_from_u64(6);
        let mut est = SequentialEstimator::new(
            CnnModel::identity_passthrough(9, 1),
            CnnModel::identity_passthrough(9, 1),
            8,
        )
        .unwrap();
        for _ in 0..3 {
            let bits = random_frame_bits(&ctx, &mut rng);
            let frame = build_frame(&ctx, bits).unwrap();
            let imp = draw_impairment(&ctx, Some(12.0), &mut rng).unwrap();
            let rx = apply_impairment(&frame.time, &imp, &ctx, &mut rng).unwrap();
            let classical = receive_classical(&rx, &ctx).unwrap();
            let cnn = receive_cnn(&rx, &ctx, &mut est).unwrap();
            assert_eq!(cnn.eps_used, classical.eps_used);
            assert_eq!(cnn.bits, classical.bits);
            for (a, b) in cnn.cfr_per_symbol.iter().zip(&classical.cfr_per_symbol) {
                assert_eq!(a.cfr, b.cfr);
            }
        }
    }

    #[test]
    fn receivers_are_deterministic() {
        let ctx = faded_ctx();
        let mut rng = SimRng::seed_from_u64(8);
        let bits = random_frame_bits(&ctx, &mut rng);
        let frame = build_frame(&ctx, bits).unwrap();
        let imp = draw_impairment(&ctx, Some(10.0), &mut rng).unwrap();
        let rx = apply_impairment(&frame.time, &imp, &ctx, &mut rng).unwrap();
        let a = receive_classical(&rx, &ctx).unwrap();
        let b = receive_classical(&rx, &ctx).unwrap();
        assert_eq!(a.bits, b.bits);
        assert_eq!(a.eps_used, b.eps_used);
    }

    #[test]
    fn wrong_frame_length_is_rejected() {
        let ctx = flat_ctx();
        let short = vec![Complex64::new(0.0, 0.0); 100];
        assert!(receive_classical(&short, &ctx).is_err());
        assert!(estimate_preamble_cfo(&short, &ctx).is_err());
    }
}
