//! Link impairments: frequency-selective Rician fading, the Gaussian-mixture
//! carrier-offset process, and additive white Gaussian noise.
//!
//! One channel realization and one CFO value apply per frame (block fading);
//! redraws happen between frames. All draws take an explicit RNG so parallel
//! trials can own independent seeded streams.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::waveform::dft;

/// Rician tap-set parameters. The first tap carries the line-of-sight
/// component with power ratio K; later taps are pure scatter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RicianChannelSpec {
    /// LOS-to-scatter power ratio (linear).
    pub k_factor: f64,
    /// Number of taps L.
    pub num_taps: usize,
    /// Per-tap average power, sums to one.
    pub tap_power_profile: Vec<f64>,
}

impl Default for RicianChannelSpec {
    fn default() -> Self {
        RicianChannelSpec {
            k_factor: 10.0,
            num_taps: 3,
            tap_power_profile: vec![0.8, 0.15, 0.05],
        }
    }
}

impl RicianChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_factor < 0.0 {
            return Err(SimError::InvalidConfig("k_factor must be >= 0".into()));
        }
        if self.num_taps == 0 {
            return Err(SimError::InvalidConfig("num_taps must be >= 1".into()));
        }
        if self.tap_power_profile.len() != self.num_taps {
            return Err(SimError::InvalidConfig(format!(
                "tap_power_profile has {} entries for {} taps",
                self.tap_power_profile.len(),
                self.num_taps
            )));
        }
        if self.tap_power_profile.iter().any(|&p| p < 0.0) {
            return Err(SimError::InvalidConfig("tap powers must be >= 0".into()));
        }
        let sum: f64 = self.tap_power_profile.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidConfig(format!(
                "tap power profile sums to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// Flat unit channel, useful for calibration runs.
    pub fn flat() -> Self {
        RicianChannelSpec {
            k_factor: f64::INFINITY,
            num_taps: 1,
            tap_power_profile: vec![1.0],
        }
    }
}

/// One block-fading draw: impulse-response taps plus the frequency response
/// over the full transform grid.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub taps: Vec<Complex64>,
    /// N-point transform of the zero-padded taps.
    pub cfr: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn from_taps(taps: Vec<Complex64>, fft_size: usize) -> Result<Self> {
        let mut padded = vec![Complex64::new(0.0, 0.0); fft_size];
        let l = taps.len().min(fft_size);
        padded[..l].copy_from_slice(&taps[..l]);
        let cfr = dft(&padded, false)?;
        Ok(ChannelRealization { taps, cfr })
    }

    /// Frequency response restricted to the given bins.
    pub fn cfr_at(&self, bins: &[usize]) -> Vec<Complex64> {
        bins.iter().map(|&k| self.cfr[k]).collect()
    }
}

/// Standard complex normal CN(0,1): each component N(0, 1/2).
fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draw one Rician realization. Tap 0 mixes a deterministic LOS part with
/// scatter according to K; the expected total tap energy is one.
pub fn draw_channel(
    spec: &RicianChannelSpec,
    fft_size: usize,
    rng: &mut impl Rng,
) -> Result<ChannelRealization> {
    spec.validate()?;
    let k = spec.k_factor;
    let (los, scatter) = if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    };
    let mut taps = Vec::with_capacity(spec.num_taps);
    for (i, &p) in spec.tap_power_profile.iter().enumerate() {
        let amp = p.sqrt();
        let tap = if i == 0 {
            amp * (Complex64::new(los, 0.0) + scatter * complex_normal(rng))
        } else {
            amp * complex_normal(rng)
        };
        taps.push(tap);
    }
    ChannelRealization::from_taps(taps, fft_size)
}

/// Result of pushing a signal through the tapped channel.
#[derive(Debug, Clone)]
pub struct FadedSignal {
    pub samples: Vec<Complex64>,
    /// Set when the cyclic prefix is shorter than the channel memory, in
    /// which case the per-subcarrier model no longer holds exactly.
    pub cp_exceeded: bool,
}

/// Linear convolution with the channel taps, truncated to the input length.
/// With a cyclic prefix of at least L-1 samples per symbol the received grid
/// obeys Y[k] = H[k] X[k] exactly.
pub fn apply_channel(
    samples: &[Complex64],
    ch: &ChannelRealization,
    cp_length: usize,
) -> FadedSignal {
    let mut out = vec![Complex64::new(0.0, 0.0); samples.len()];
    for (lag, &h) in ch.taps.iter().enumerate() {
        if h.norm_sqr() == 0.0 {
            continue;
        }
        for n in lag..samples.len() {
            out[n] += h * samples[n - lag];
        }
    }
    FadedSignal {
        samples: out,
        cp_exceeded: ch.taps.len() > cp_length + 1,
    }
}

/// Rotate sample n (global index `start_index + i`) by e^{j 2 pi eps n / N}.
/// Passing the running sample index keeps the phase continuous across
/// symbols of a frame.
pub fn apply_cfo(
    samples: &[Complex64],
    epsilon: f64,
    fft_size: usize,
    start_index: usize,
) -> Vec<Complex64> {
    let step = 2.0 * std::f64::consts::PI * epsilon / fft_size as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let ang = step * (start_index + i) as f64;
            s * Complex64::new(ang.cos(), ang.sin())
        })
        .collect()
}

/// Closed-form amplitude attenuation of the desired subcarrier under a
/// normalized offset eps: sin(pi eps) / (N sin(pi eps / N)).
pub fn cfo_attenuation(epsilon: f64, fft_size: usize) -> f64 {
    let n = fft_size as f64;
    let denom = n * (std::f64::consts::PI * epsilon / n).sin();
    if denom == 0.0 {
        return 1.0;
    }
    (std::f64::consts::PI * epsilon).sin() / denom
}

/// Gaussian-mixture process for the normalized carrier offset. Component i
/// is chosen with probability `weights[i]`; the draw comes from
/// N(means[i], variances[i]) and is clipped to the [-0.5, 0.5] domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CfoMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl CfoMixture {
    pub fn validate(&self) -> Result<()> {
        let u = self.weights.len();
        if u == 0 || self.means.len() != u || self.variances.len() != u {
            return Err(SimError::InvalidConfig(
                "mixture weights/means/variances must share a nonzero length".into(),
            ));
        }
        if self.weights.iter().any(|&w| w < 0.0) {
            return Err(SimError::InvalidConfig("mixture weights must be >= 0".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidConfig(format!(
                "mixture weights sum to {sum}, expected 1"
            )));
        }
        if self.variances.iter().any(|&v| v <= 0.0) {
            return Err(SimError::InvalidConfig("mixture variances must be > 0".into()));
        }
        Ok(())
    }

    /// Three-component mixture with Dirichlet(1,1,1) weights drawn from the
    /// seed and fixed means/variances. The drawn weights land in the config
    /// file, so a scenario is reproducible from its echo.
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = crate::rng::rng_from(seed, &[crate::rng::tags::MIXTURE_WEIGHTS]);
        let raw: Vec<f64> = (0..3)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        CfoMixture {
            weights: raw.iter().map(|e| e / total).collect(),
            means: vec![-0.2, 0.05, 0.3],
            variances: vec![0.01, 0.01, 0.01],
        }
    }

    /// Degenerate single-component mixture pinned at `epsilon`.
    pub fn fixed(epsilon: f64) -> Self {
        CfoMixture {
            weights: vec![1.0],
            means: vec![epsilon],
            variances: vec![1e-30],
        }
    }
}

/// Normalized carrier frequency offset, |epsilon| <= 0.5 subcarrier spacings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfoValue {
    pub epsilon: f64,
}

/// Draw one offset from the mixture: pick a component by weight, sample the
/// Gaussian, clip to the +-0.5 domain.
pub fn draw_cfo(mix: &CfoMixture, rng: &mut impl Rng) -> CfoValue {
    debug_assert!(mix.validate().is_ok());
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut comp = mix.weights.len() - 1;
    for (i, &w) in mix.weights.iter().enumerate() {
        acc += w;
        if u < acc {
            comp = i;
            break;
        }
    }
    let z: f64 = StandardNormal.sample(rng);
    let eps = mix.means[comp] + z * mix.variances[comp].sqrt();
    CfoValue {
        epsilon: eps.clamp(-0.5, 0.5),
    }
}

/// Mean per-sample power of a signal.
pub fn measure_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Add circular white Gaussian noise CN(0, N0) with
/// N0 = signal_power / 10^(snr_db/10).
pub fn add_awgn(
    samples: &[Complex64],
    snr_db: f64,
    signal_power: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>> {
    if signal_power <= 0.0 {
        return Err(SimError::InvalidConfig(format!(
            "signal_power must be > 0, got {signal_power}"
        )));
    }
    let n0 = signal_power / 10f64.powf(snr_db / 10.0);
    let sigma = (n0 / 2.0).sqrt();
    Ok(samples
        .iter()
        .map(|&s| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            s + Complex64::new(re * sigma, im * sigma)
        })
        .collect())
}
