//! Classical receiver baseline: preamble correlation for the carrier offset,
//! least-squares channel estimation at the pilots, linear interpolation to
//! the full band, and zero-forcing equalization.

use num_complex::Complex64;

use crate::error::{Result, SimError};

/// Carrier-offset estimate, wrapped into the [-0.5, 0.5] domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfoEstimate {
    pub epsilon_hat: f64,
}

/// Channel frequency-response estimate over the occupied subcarriers, in
/// ascending frequency order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub cfr: Vec<Complex64>,
}

/// Estimate the normalized carrier offset from the two received preamble
/// halves: eps = N / (2 pi D) * angle(sum P1* P2), where D is the sample
/// distance between corresponding elements of the halves. With D = N this
/// reduces to the textbook 1/(2 pi) normalization. The channel cancels in
/// the conjugate product because both halves traverse it identically.
///
/// Estimates landing outside the [-0.5, 0.5] offset domain are clamped to
/// the boundary; an offset beyond half a subcarrier is unresolvable here.
pub fn schmidl_cox_cfo(
    p1_rx: &[Complex64],
    p2_rx: &[Complex64],
    fft_size: usize,
    separation: usize,
) -> Result<CfoEstimate> {
    if p1_rx.len() != p2_rx.len() {
        return Err(SimError::LengthMismatch {
            expected: p1_rx.len(),
            got: p2_rx.len(),
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in p1_rx.iter().zip(p2_rx) {
        acc += a.conj() * b;
    }
    if acc.norm_sqr() == 0.0 {
        return Err(SimError::DegenerateAngle);
    }
    let raw = fft_size as f64 / (2.0 * std::f64::consts::PI * separation as f64) * acc.arg();
    Ok(CfoEstimate {
        epsilon_hat: raw.clamp(-0.5, 0.5),
    })
}

/// Undo an estimated offset: multiply sample n by e^{-j 2 pi eps n / N}.
/// Definitionally `apply_cfo` with the negated argument.
pub fn correct_cfo(
    samples: &[Complex64],
    epsilon_hat: f64,
    fft_size: usize,
    start_index: usize,
) -> Vec<Complex64> {
    crate::channel::apply_cfo(samples, -epsilon_hat, fft_size, start_index)
}

/// Least-squares channel estimate at the pilot positions: H'[p] = Y[p]/X[p].
pub fn ls_estimate(y_pilots: &[Complex64], x_pilots: &[Complex64]) -> Result<Vec<Complex64>> {
    if y_pilots.len() != x_pilots.len() {
        return Err(SimError::LengthMismatch {
            expected: x_pilots.len(),
            got: y_pilots.len(),
        });
    }
    let mut out = Vec::with_capacity(y_pilots.len());
    for (i, (y, x)) in y_pilots.iter().zip(x_pilots).enumerate() {
        if x.norm_sqr() == 0.0 {
            return Err(SimError::ZeroPilot(i));
        }
        out.push(y / x);
    }
    Ok(out)
}

/// Linearly interpolate pilot estimates onto all `target_len` occupied
/// subcarriers, real and imaginary parts separately. Positions outside the
/// pilot span hold the nearest pilot value.
pub fn interpolate_cfr(
    pilot_estimates: &[Complex64],
    pilot_positions: &[usize],
    target_len: usize,
) -> Result<ChannelEstimate> {
    if pilot_estimates.len() < 2 {
        return Err(SimError::TooFewPilots(pilot_estimates.len()));
    }
    if pilot_estimates.len() != pilot_positions.len() {
        return Err(SimError::LengthMismatch {
            expected: pilot_positions.len(),
            got: pilot_estimates.len(),
        });
    }
    if pilot_positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::InvalidConfig(
            "pilot positions must be strictly increasing".into(),
        ));
    }

    let mut cfr = Vec::with_capacity(target_len);
    let mut seg = 0usize;
    for t in 0..target_len {
        if t <= pilot_positions[0] {
            if t == pilot_positions[0] {
                cfr.push(pilot_estimates[0]);
            } else {
                cfr.push(pilot_estimates[0]); // nearest-pilot hold at the edge
            }
            continue;
        }
        if t >= *pilot_positions.last().unwrap() {
            cfr.push(*pilot_estimates.last().unwrap());
            continue;
        }
        while pilot_positions[seg + 1] < t {
            seg += 1;
        }
        let (p0, p1) = (pilot_positions[seg], pilot_positions[seg + 1]);
        if t == p0 {
            cfr.push(pilot_estimates[seg]);
            continue;
        }
        let frac = (t - p0) as f64 / (p1 - p0) as f64;
        let a = pilot_estimates[seg];
        let b = pilot_estimates[seg + 1];
        cfr.push(Complex64::new(
            a.re + (b.re - a.re) * frac,
            a.im + (b.im - a.im) * frac,
        ));
    }
    Ok(ChannelEstimate { cfr })
}

/// Zero-forcing equalization output. Subcarriers whose channel estimate sat
/// below the magnitude floor are flagged as erasures and zeroed; downstream
/// hard decisions then fall back to the demapper tie rule, which is
/// accounted as random bits in deep-fade BER terms.
#[derive(Debug, Clone)]
pub struct EqualizedSymbols {
    pub symbols: Vec<Complex64>,
    pub erasures: Vec<bool>,
}

/// Magnitude floor below which an estimate cannot be divided out.
pub const ZF_ERASURE_FLOOR: f64 = 1e-12;

/// Divide the observations by the channel estimate: X[k] = Y[k] / H'[k].
pub fn zf_equalize(
    observations: &[Complex64],
    estimate: &[Complex64],
) -> Result<EqualizedSymbols> {
    if observations.len() != estimate.len() {
        return Err(SimError::LengthMismatch {
            expected: estimate.len(),
            got: observations.len(),
        });
    }
    let mut symbols = Vec::with_capacity(observations.len());
    let mut erasures = vec![false; observations.len()];
    for (i, (y, h)) in observations.iter().zip(estimate).enumerate() {
        if h.norm() < ZF_ERASURE_FLOOR {
            symbols.push(Complex64::new(0.0, 0.0));
            erasures[i] = true;
        } else {
            symbols.push(y / h);
        }
    }
    Ok(EqualizedSymbols { symbols, erasures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::apply_cfo;
    use crate::rng::SimRng;
    use crate::waveform::{build_preamble, OfdmConfig};
    use rand::{Rng, SeedableRng};

    fn preamble_with_cfo(eps: f64) -> (Vec<Complex64>, Vec<Complex64>, usize, usize) {
        let cfg = OfdmConfig::default();
        let p = build_preamble(&cfg, 5);
        let full = apply_cfo(&p.full(), eps, cfg.fft_size, 0);
        let d = p.half_len();
        (full[..d].to_vec(), full[d..].to_vec(), cfg.fft_size, d)
    }

    #[test]
    fn zero_offset_gives_zero_estimate() {
        let (p1, p2, n, d) = preamble_with_cfo(0.0);
        let est = schmidl_cox_cfo(&p1, &p2, n, d).unwrap();
        assert_eq!(est.epsilon_hat, 0.0);
    }

    #[test]
    fn noiseless_estimate_is_exact() {
        // Analytic oracle: the cross term carries phase 2 pi eps D / N.
        let (p1, p2, n, d) = preamble_with_cfo(0.25);
        let est = schmidl_cox_cfo(&p1, &p2, n, d).unwrap();
        assert!((est.epsilon_hat - 0.25).abs() < 1e-9);
    }

    #[test]
    fn estimate_sweeps_the_domain() {
        for i in 0..19 {
            let eps = -0.45 + i as f64 * 0.05;
            let (p1, p2, n, d) = preamble_with_cfo(eps);
            let est = schmidl_cox_cfo(&p1, &p2, n, d).unwrap();
            assert!((est.epsilon_hat - eps).abs() < 1e-9, "eps {eps}");
        }
    }

    #[test]
    fn channel_cancels_in_the_correlation() {
        // Algebraic oracle on the half ratio: a D-periodic preamble through
        // any filter stays D-periodic, so the conjugate product phase is
        // untouched. Cyclic warm-up keeps the first taps in steady state.
        use crate::channel::{apply_channel, ChannelRealization};
        let cfg = OfdmConfig::default();
        let p = build_preamble(&cfg, 5);
        let eps = 0.17;
        let taps = vec![
            Complex64::new(0.7, -0.2),
            Complex64::new(0.3, 0.25),
            Complex64::new(-0.1, 0.05),
        ];
        let ch = ChannelRealization::from_taps(taps.clone(), cfg.fft_size).unwrap();

        // Prefix a copy of the tail so the linear convolution reaches steady
        // state before the part we correlate.
        let full = p.full();
        let guard = taps.len() - 1;
        let mut extended = full[full.len() - guard..].to_vec();
        extended.extend_from_slice(&full);
        let faded = apply_channel(&extended, &ch, guard);
        let rotated = apply_cfo(&faded.samples[guard..], eps, cfg.fft_size, 0);

        let d = p.half_len();
        let est = schmidl_cox_cfo(&rotated[..d], &rotated[d..], cfg.fft_size, d).unwrap();
        assert!(
            (est.epsilon_hat - eps).abs() < 1e-9,
            "channel shifted the estimate to {}",
            est.epsilon_hat
        );
    }

    #[test]
    fn estimate_ignores_overall_complex_scaling() {
        let (p1, p2, n, d) = preamble_with_cfo(0.31);
        let g = Complex64::new(-1.3, 2.2);
        let p1s: Vec<_> = p1.iter().map(|v| v * g).collect();
        let p2s: Vec<_> = p2.iter().map(|v| v * g).collect();
        let a = schmidl_cox_cfo(&p1, &p2, n, d).unwrap();
        let b = schmidl_cox_cfo(&p1s, &p2s, n, d).unwrap();
        assert!((a.epsilon_hat - b.epsilon_hat).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_error() {
        let z = vec![Complex64::new(0.0, 0.0); 8];
        assert!(matches!(
            schmidl_cox_cfo(&z, &z, 256, 8),
            Err(SimError::DegenerateAngle)
        ));
        let short = vec![Complex64::new(1.0, 0.0); 4];
        assert!(schmidl_cox_cfo(&z, &short, 256, 8).is_err());
    }

    #[test]
    fn correction_undoes_the_rotation() {
        let mut rng = SimRng::seed_from_u64(2);
        let x: Vec<Complex64> = (0..500)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let eps = 0.4;
        let rotated = apply_cfo(&x, eps, 256, 0);
        let fixed = correct_cfo(&rotated, eps, 256, 0);
        for (a, b) in fixed.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
        // eps = 0 is the identity.
        assert_eq!(correct_cfo(&x, 0.0, 256, 0), x);
        // Definitional equivalence with apply_cfo(-eps).
        assert_eq!(correct_cfo(&x, 0.2, 256, 7), apply_cfo(&x, -0.2, 256, 7));
    }

    #[test]
    fn ls_is_exact_without_noise() {
        let h = [Complex64::new(0.4, -1.1), Complex64::new(-0.2, 0.9)];
        let x = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let y: Vec<Complex64> = h.iter().zip(&x).map(|(h, x)| h * x).collect();
        let est = ls_estimate(&y, &x).unwrap();
        for (e, t) in est.iter().zip(&h) {
            assert!((e - t).norm() < 1e-15);
        }
        // Unit pilots make the estimate the observation itself.
        let ones = vec![Complex64::new(1.0, 0.0); 2];
        assert_eq!(ls_estimate(&y, &ones).unwrap(), y);
    }

    #[test]
    fn ls_rejects_zero_pilots() {
        let y = vec![Complex64::new(1.0, 0.0); 2];
        let x = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(matches!(ls_estimate(&y, &x), Err(SimError::ZeroPilot(1))));
    }

    #[test]
    fn ls_mse_tracks_the_analytic_variance() {
        // Analytic LS variance oracle: with unit pilots the estimation MSE
        // equals the per-pilot noise variance 1/gamma.
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = SimRng::seed_from_u64(10);
        let gamma = 25.0f64;
        let sigma = (1.0 / gamma / 2.0).sqrt();
        let trials = 10_000;
        let pilots = 16;
        let x = vec![Complex64::new(1.0, 0.0); pilots];
        let h = Complex64::new(0.8, -0.6);
        let mut acc = 0.0;
        for _ in 0..trials {
            let y: Vec<Complex64> = (0..pilots)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    h + Complex64::new(re * sigma, im * sigma)
                })
                .collect();
            let est = ls_estimate(&y, &x).unwrap();
            acc += est.iter().map(|e| (e - h).norm_sqr()).sum::<f64>() / pilots as f64;
        }
        let mse = acc / trials as f64;
        assert!(
            (mse * gamma - 1.0).abs() < 0.05,
            "LS MSE {mse} should be within 5% of {}",
            1.0 / gamma
        );
    }

    #[test]
    fn ls_matches_brute_force_minimizer() {
        // Grid search over a 2-D slice of ||Y - X H||^2 around the LS
        // solution; no grid point may beat it.
        let mut rng = SimRng::seed_from_u64(77);
        let x: Vec<Complex64> = (0..3)
            .map(|_| Complex64::new(rng.random::<f64>() + 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let y: Vec<Complex64> = (0..3)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let est = ls_estimate(&y, &x).unwrap();
        let cost = |h: &[Complex64]| -> f64 {
            y.iter()
                .zip(&x)
                .zip(h)
                .map(|((y, x), h)| (y - x * h).norm_sqr())
                .sum()
        };
        let base = cost(&est);
        for da in [-0.05f64, 0.0, 0.05] {
            for db in [-0.05f64, 0.0, 0.05] {
                let mut probe = est.clone();
                probe[0] += Complex64::new(da, db);
                assert!(cost(&probe) + 1e-12 >= base);
                let mut probe = est.clone();
                probe[1] += Complex64::new(da, -db);
                assert!(cost(&probe) + 1e-12 >= base);
            }
        }
    }

    #[test]
    fn interpolation_recovers_flat_and_linear_profiles() {
        let c = Complex64::new(0.3, -0.8);
        let est = interpolate_cfr(&[c, c, c], &[0, 8, 16], 20).unwrap();
        for v in &est.cfr {
            assert!((v - c).norm() < 1e-15);
        }
        // Pilots at {0, 8} with values 0 and 8: index 4 interpolates to 4.
        let est = interpolate_cfr(
            &[Complex64::new(0.0, 0.0), Complex64::new(8.0, 0.0)],
            &[0, 8],
            9,
        )
        .unwrap();
        assert!((est.cfr[4] - Complex64::new(4.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn interpolation_holds_the_edges() {
        let est = interpolate_cfr(
            &[Complex64::new(1.0, 1.0), Complex64::new(2.0, -1.0)],
            &[2, 5],
            9,
        )
        .unwrap();
        assert_eq!(est.cfr[0], Complex64::new(1.0, 1.0));
        assert_eq!(est.cfr[1], Complex64::new(1.0, 1.0));
        assert_eq!(est.cfr[8], Complex64::new(2.0, -1.0));
    }

    #[test]
    fn interpolation_needs_two_increasing_pilots() {
        let one = [Complex64::new(1.0, 0.0)];
        assert!(matches!(
            interpolate_cfr(&one, &[0], 4),
            Err(SimError::TooFewPilots(1))
        ));
        let two = [Complex64::new(1.0, 0.0); 2];
        assert!(interpolate_cfr(&two, &[3, 3], 4).is_err());
    }

    #[test]
    fn single_tap_cfr_is_recovered_exactly() {
        // A one-tap channel has a flat frequency response, so 16 pilots
        // reconstruct all 128 occupied bins exactly.
        use crate::channel::{draw_channel, RicianChannelSpec};
        let cfg = OfdmConfig::default();
        let layout = crate::waveform::FrameLayout::new(&cfg).unwrap();
        let spec = RicianChannelSpec {
            k_factor: 4.0,
            num_taps: 1,
            tap_power_profile: vec![1.0],
        };
        let mut rng = SimRng::seed_from_u64(3);
        let ch = draw_channel(&spec, cfg.fft_size, &mut rng).unwrap();
        let truth = ch.cfr_at(&layout.occupied);
        let pilots: Vec<Complex64> = layout
            .pilot_positions
            .iter()
            .map(|&p| truth[p])
            .collect();
        let est = interpolate_cfr(&pilots, &layout.pilot_positions, truth.len()).unwrap();
        for (e, t) in est.cfr.iter().zip(&truth) {
            assert!((e - t).norm() < 1e-12);
        }
    }

    #[test]
    fn zf_inverts_known_gains() {
        let mut rng = SimRng::seed_from_u64(4);
        let tx: Vec<Complex64> = (0..50)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let h: Vec<Complex64> = (0..50)
            .map(|_| Complex64::new(rng.random::<f64>() + 0.5, rng.random::<f64>()))
            .collect();
        let y: Vec<Complex64> = tx.iter().zip(&h).map(|(x, h)| x * h).collect();
        let eq = zf_equalize(&y, &h).unwrap();
        assert!(eq.erasures.iter().all(|&e| !e));
        for (a, b) in eq.symbols.iter().zip(&tx) {
            assert!((a - b).norm() < 1e-12);
        }
        // Unit estimate is the identity.
        let ones = vec![Complex64::new(1.0, 0.0); 50];
        let eq = zf_equalize(&y, &ones).unwrap();
        assert_eq!(eq.symbols, y);
    }

    #[test]
    fn zf_flags_vanishing_estimates() {
        let y = vec![Complex64::new(1.0, 1.0); 2];
        let h = vec![Complex64::new(1.0, 0.0), Complex64::new(1e-15, 0.0)];
        let eq = zf_equalize(&y, &h).unwrap();
        assert!(!eq.erasures[0]);
        assert!(eq.erasures[1]);
        assert_eq!(eq.symbols[1], Complex64::new(0.0, 0.0));
    }
}
