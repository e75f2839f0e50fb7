//! OFDM transmit/receive primitives: bit mapping, transforms, cyclic prefix,
//! pilot layout and the repeated synchronization preamble.
//!
//! All functions here are pure; randomness (the preamble contents) comes in
//! through an explicit seed.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::rng::{rng_from, tags};

/// Known pilot symbol. Unit power keeps least-squares estimation a plain
/// per-pilot division.
pub const PILOT_SYMBOL: Complex64 = Complex64::new(1.0, 0.0);

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Waveform constants: transform size, occupancy, cyclic prefix, pilot ratio,
/// preamble half length and the number of payload symbols per frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OfdmConfig {
    /// Transform size N.
    pub fft_size: usize,
    /// Number of occupied subcarriers (pilots + data).
    pub num_subcarriers: usize,
    /// Cyclic prefix length in samples.
    pub cp_length: usize,
    /// Fraction of occupied subcarriers carrying pilots.
    pub pilot_ratio: f64,
    /// Length of one preamble half; the transmitted preamble is two
    /// identical halves back to back.
    pub preamble_half_len: usize,
    /// Payload OFDM symbols per frame.
    pub num_symbols: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        OfdmConfig {
            fft_size: 256,
            num_subcarriers: 128,
            cp_length: 16,
            pilot_ratio: 1.0 / 8.0,
            preamble_half_len: 160,
            num_symbols: 6,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() {
            return Err(SimError::NotPowerOfTwo(self.fft_size));
        }
        if self.num_subcarriers == 0 || self.num_subcarriers % 2 != 0 {
            return Err(SimError::InvalidConfig(format!(
                "num_subcarriers must be positive and even, got {}",
                self.num_subcarriers
            )));
        }
        // Occupied bins straddle DC symmetrically; DC itself stays empty.
        if self.num_subcarriers + 2 > self.fft_size {
            return Err(SimError::InvalidConfig(format!(
                "{} subcarriers cannot fit a {}-bin grid with DC unused",
                self.num_subcarriers, self.fft_size
            )));
        }
        if self.cp_length >= self.fft_size {
            return Err(SimError::InvalidConfig(format!(
                "cp_length {} must be shorter than fft_size {}",
                self.cp_length, self.fft_size
            )));
        }
        let pilots = self.num_subcarriers as f64 * self.pilot_ratio;
        if !(pilots.fract().abs() < 1e-9) || pilots < 2.0 {
            return Err(SimError::InvalidConfig(format!(
                "pilot_ratio {} must yield an integer pilot count >= 2",
                self.pilot_ratio
            )));
        }
        if self.num_subcarriers % (pilots as usize) != 0 {
            return Err(SimError::InvalidConfig(
                "pilot count must divide num_subcarriers evenly".into(),
            ));
        }
        if self.preamble_half_len == 0 {
            return Err(SimError::InvalidConfig("preamble_half_len must be > 0".into()));
        }
        if self.num_symbols == 0 {
            return Err(SimError::InvalidConfig("num_symbols must be > 0".into()));
        }
        Ok(())
    }

    /// Pilot count per symbol.
    pub fn num_pilots(&self) -> usize {
        (self.num_subcarriers as f64 * self.pilot_ratio).round() as usize
    }

    /// Data subcarriers per symbol.
    pub fn num_data(&self) -> usize {
        self.num_subcarriers - self.num_pilots()
    }

    /// Time samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_length
    }
}

/// Subcarrier layout for one OFDM symbol. Pilot, data and guard index sets
/// partition the `fft_size` grid; `occupied` lists the active bins in
/// ascending frequency (negative frequencies first), which is the canonical
/// order for channel-estimate vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    pub fft_size: usize,
    /// Active bins in ascending frequency order, length `num_subcarriers`.
    pub occupied: Vec<usize>,
    /// Positions of pilots within `occupied` (strictly increasing).
    pub pilot_positions: Vec<usize>,
    /// FFT-bin indices of pilot subcarriers.
    pub pilot_indices: Vec<usize>,
    /// FFT-bin indices of data subcarriers.
    pub data_indices: Vec<usize>,
    /// FFT-bin indices left empty (DC and band-edge guards).
    pub guard_indices: Vec<usize>,
}

impl FrameLayout {
    /// Layout is a pure function of the config: the occupied bins split
    /// symmetrically around DC (which stays unused) with the guard band at
    /// the band edges, and every `1/pilot_ratio`-th occupied bin is a pilot.
    pub fn new(cfg: &OfdmConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.fft_size;
        let half = cfg.num_subcarriers / 2;

        // Ascending frequency: bins n-half..n are -half..-1, bins 1..=half
        // are +1..+half.
        let mut occupied = Vec::with_capacity(cfg.num_subcarriers);
        occupied.extend(n - half..n);
        occupied.extend(1..=half);

        let num_pilots = cfg.num_pilots();
        let spacing = cfg.num_subcarriers / num_pilots;
        let pilot_positions: Vec<usize> = (0..num_pilots).map(|i| i * spacing).collect();
        let pilot_indices: Vec<usize> = pilot_positions.iter().map(|&p| occupied[p]).collect();

        let mut is_pilot = vec![false; cfg.num_subcarriers];
        for &p in &pilot_positions {
            is_pilot[p] = true;
        }
        let data_indices: Vec<usize> = occupied
            .iter()
            .enumerate()
            .filter(|(pos, _)| !is_pilot[*pos])
            .map(|(_, &bin)| bin)
            .collect();

        let mut active = vec![false; n];
        for &bin in &occupied {
            active[bin] = true;
        }
        let guard_indices: Vec<usize> = (0..n).filter(|&k| !active[k]).collect();

        Ok(FrameLayout {
            fft_size: n,
            occupied,
            pilot_positions,
            pilot_indices,
            data_indices,
            guard_indices,
        })
    }

    pub fn num_pilots(&self) -> usize {
        self.pilot_positions.len()
    }

    pub fn num_data(&self) -> usize {
        self.data_indices.len()
    }

    /// Positions of data subcarriers within `occupied`.
    pub fn data_positions(&self) -> Vec<usize> {
        let mut is_pilot = vec![false; self.occupied.len()];
        for &p in &self.pilot_positions {
            is_pilot[p] = true;
        }
        (0..self.occupied.len()).filter(|&p| !is_pilot[p]).collect()
    }
}

/// Gray-mapped 4-QAM with unit average symbol energy. The map is fixed as
/// 00 -> (+,+), 01 -> (+,-), 11 -> (-,-), 10 -> (-,+), each component
/// scaled by 1/sqrt(2). Bits are taken two at a time; any nonzero byte
/// counts as a 1 bit.
pub fn qam_modulate(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(SimError::OddBitCount(bits.len()));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|pair| {
            let re = if pair[0] == 0 { INV_SQRT2 } else { -INV_SQRT2 };
            let im = if pair[1] == 0 { INV_SQRT2 } else { -INV_SQRT2 };
            Complex64::new(re, im)
        })
        .collect())
}

/// Hard-decision 4-QAM demapper: per-component sign decision, two bits per
/// symbol. Components exactly at zero resolve to the (+,+) quadrant.
pub fn qam_demodulate(symbols: &[Complex64]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        bits.push(u8::from(s.re < 0.0));
        bits.push(u8::from(s.im < 0.0));
    }
    bits
}

/// Radix-2 DFT. Forward: X[k] = sum_n x[n] e^{-j2pi kn/N}; inverse carries
/// the 1/N factor so that inverse(forward(x)) == x.
pub fn dft(input: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    if !input.len().is_power_of_two() {
        return Err(SimError::NotPowerOfTwo(input.len()));
    }
    let mut buf = input.to_vec();
    fft_in_place(&mut buf, inverse);
    Ok(buf)
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j ^= bit;
        if i < j {
            buf.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let w_len = Complex64::new(ang.cos(), ang.sin());
        let half = len / 2;
        let mut start = 0;
        while start < n {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..half {
                let u = buf[start + k];
                let v = w * buf[start + k + half];
                buf[start + k] = u + v;
                buf[start + k + half] = u - v;
                w *= w_len;
            }
            start += len;
        }
        len <<= 1;
    }

    if inverse {
        let scale = 1.0 / n as f64;
        for x in buf.iter_mut() {
            *x *= scale;
        }
    }
}

/// Inverse transform plus cyclic prefix: the last `cp_length` time samples
/// are copied in front of the symbol body.
pub fn ofdm_modulate(grid: &[Complex64], cfg: &OfdmConfig) -> Result<Vec<Complex64>> {
    if grid.len() != cfg.fft_size {
        return Err(SimError::LengthMismatch {
            expected: cfg.fft_size,
            got: grid.len(),
        });
    }
    let body = dft(grid, true)?;
    let mut out = Vec::with_capacity(cfg.symbol_len());
    out.extend_from_slice(&body[cfg.fft_size - cfg.cp_length..]);
    out.extend_from_slice(&body);
    Ok(out)
}

/// Strip the cyclic prefix and apply the forward transform.
pub fn ofdm_demodulate(samples: &[Complex64], cfg: &OfdmConfig) -> Result<Vec<Complex64>> {
    if samples.len() != cfg.symbol_len() {
        return Err(SimError::LengthMismatch {
            expected: cfg.symbol_len(),
            got: samples.len(),
        });
    }
    dft(&samples[cfg.cp_length..], false)
}

/// Place data symbols on the data subcarriers and unit pilots on the pilot
/// subcarriers; guards stay zero. Data symbols fill `data_indices` in
/// ascending frequency order.
pub fn insert_pilots(data: &[Complex64], layout: &FrameLayout) -> Result<Vec<Complex64>> {
    if data.len() != layout.num_data() {
        return Err(SimError::LengthMismatch {
            expected: layout.num_data(),
            got: data.len(),
        });
    }
    let mut grid = vec![Complex64::new(0.0, 0.0); layout.fft_size];
    for &bin in &layout.pilot_indices {
        grid[bin] = PILOT_SYMBOL;
    }
    for (&bin, &sym) in layout.data_indices.iter().zip(data) {
        grid[bin] = sym;
    }
    Ok(grid)
}

/// Split a received grid into (pilot observations, data observations), both
/// in ascending frequency order. Guard bins are never returned.
pub fn extract_pilots(
    grid: &[Complex64],
    layout: &FrameLayout,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if grid.len() != layout.fft_size {
        return Err(SimError::LengthMismatch {
            expected: layout.fft_size,
            got: grid.len(),
        });
    }
    let pilots = layout.pilot_indices.iter().map(|&k| grid[k]).collect();
    let data = layout.data_indices.iter().map(|&k| grid[k]).collect();
    Ok((pilots, data))
}

/// Synchronization preamble: two identical halves of unit-power QPSK
/// samples. The repetition lets the receiver read the carrier offset out of
/// the phase drift between halves.
#[derive(Debug, Clone)]
pub struct Preamble {
    pub half: Vec<Complex64>,
}

impl Preamble {
    /// The transmitted sequence: both halves back to back.
    pub fn full(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.half.len() * 2);
        out.extend_from_slice(&self.half);
        out.extend_from_slice(&self.half);
        out
    }

    pub fn half_len(&self) -> usize {
        self.half.len()
    }
}

/// Deterministic-for-seed preamble of `preamble_half_len` QPSK samples,
/// duplicated.
pub fn build_preamble(cfg: &OfdmConfig, seed: u64) -> Preamble {
    let mut rng = rng_from(seed, &[tags::PREAMBLE]);
    let half = (0..cfg.preamble_half_len)
        .map(|_| {
            let re = if rng.random::<bool>() { INV_SQRT2 } else { -INV_SQRT2 };
            let im = if rng.random::<bool>() { INV_SQRT2 } else { -INV_SQRT2 };
            Complex64::new(re, im)
        })
        .collect();
    Preamble { half }
}
