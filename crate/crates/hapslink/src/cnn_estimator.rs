//! CNN-side estimation: packing complex vectors into real tensor planes and
//! the two-stage sequential refiner that first denoises the carrier-offset
//! estimate, then the channel estimate derived under the refined offset.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::classical::ChannelEstimate;
use crate::error::{Result, SimError};
use crate::nn::{CnnModel, Tensor3};

/// Pack a complex vector into a |v| x 2 x 1 real tensor: column 0 holds the
/// real parts, column 1 the imaginary parts. The packing is an isometry.
pub fn complex_to_planes(v: &[Complex64]) -> Tensor3 {
    let mut data = Vec::with_capacity(v.len() * 2);
    for z in v {
        data.push(z.re);
        data.push(z.im);
    }
    Tensor3::from_vec(v.len(), 2, 1, data).expect("dims match by construction")
}

/// Inverse of [`complex_to_planes`]; the tensor must be h x 2 x 1.
pub fn planes_to_complex(t: &Tensor3) -> Result<Vec<Complex64>> {
    let (h, w, c) = t.dims();
    if w != 2 || c != 1 {
        return Err(SimError::ShapeMismatch(format!(
            "plane tensor must be h x 2 x 1, got {h}x{w}x{c}"
        )));
    }
    Ok(t.data()
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect())
}

/// Two-stage CNN refiner. Stage one keeps a sliding window of raw
/// carrier-offset estimates and maps it through the offset network; the last
/// element of the refined sequence is the causal output. Stage two maps the
/// offset-corrected least-squares channel estimate through the channel
/// network. The refinement order is fixed: offset first, channel second.
///
/// The window is mutable receiver state; use one instance per concurrent
/// stream.
#[derive(Debug, Clone)]
pub struct SequentialEstimator {
    pub cfo_model: CnnModel,
    pub ce_model: CnnModel,
    window_len: usize,
    window: VecDeque<f64>,
}

impl SequentialEstimator {
    pub fn new(cfo_model: CnnModel, ce_model: CnnModel, window_len: usize) -> Result<Self> {
        if window_len == 0 {
            return Err(SimError::InvalidConfig("window_len must be >= 1".into()));
        }
        if cfo_model.input_channels() != 1 || ce_model.input_channels() != 1 {
            return Err(SimError::MissingModel(
                "estimator models must take single-channel tensors".into(),
            ));
        }
        Ok(SequentialEstimator {
            cfo_model,
            ce_model,
            window_len,
            window: VecDeque::with_capacity(window_len),
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Forget the stream history (e.g. between independent sweeps).
    pub fn reset(&mut self) {
        self.window.clear();
    }

    /// Stage one: absorb a raw estimate and return the refined offset. On
    /// the first call the window bootstraps by repeating the raw estimate.
    /// The output is clamped to the valid offset domain.
    pub fn refine_cfo(&mut self, raw_estimate: f64) -> Result<f64> {
        if self.window.is_empty() {
            for _ in 0..self.window_len {
                self.window.push_back(raw_estimate);
            }
        } else {
            self.window.pop_front();
            self.window.push_back(raw_estimate);
        }
        let data: Vec<f64> = self.window.iter().copied().collect();
        let input = Tensor3::from_vec(self.window_len, 1, 1, data)?;
        let refined = self.cfo_model.forward(&input)?;
        let last = refined.data()[refined.len() - 1];
        Ok(last.clamp(-0.5, 0.5))
    }

    /// Stage two: map an interpolated channel estimate through the channel
    /// network.
    pub fn refine_channel(&self, ls: &ChannelEstimate) -> Result<ChannelEstimate> {
        let input = complex_to_planes(&ls.cfr);
        let out = self.ce_model.forward(&input)?;
        Ok(ChannelEstimate {
            cfr: planes_to_complex(&out)?,
        })
    }
}
