use rand::Rng;

use super::tensor::Tensor3;
use crate::error::{Result, SimError};

/// One 2-D convolution layer. Following mainstream CNN convention the
/// "convolution" is a cross-correlation (no kernel flip). Weights are laid
/// out as [ky][kx][in_channel][out_channel] so the innermost loop runs over
/// output channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub padding: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients for one layer, shaped like its weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(kernel_size: usize, in_channels: usize, out_channels: usize, padding: usize) -> Self {
        ConvLayer {
            kernel_size,
            in_channels,
            out_channels,
            padding,
            weights: vec![0.0; kernel_size * kernel_size * in_channels * out_channels],
            bias: vec![0.0; out_channels],
        }
    }

    /// He-style uniform init: weights in +-sqrt(6 / fan_in), zero bias.
    pub fn he_uniform(
        kernel_size: usize,
        in_channels: usize,
        out_channels: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = (kernel_size * kernel_size * in_channels) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let mut layer = Self::zeros(kernel_size, in_channels, out_channels, padding);
        for w in layer.weights.iter_mut() {
            *w = rng.random_range(-bound..bound);
        }
        layer
    }

    /// Identity layer: center tap one on the diagonal, zero bias. Requires
    /// same-padding and matching channel counts to be a true passthrough.
    pub fn delta(kernel_size: usize, channels: usize) -> Self {
        let padding = (kernel_size - 1) / 2;
        let mut layer = Self::zeros(kernel_size, channels, channels, padding);
        let center = kernel_size / 2;
        for c in 0..channels {
            let idx = ((center * kernel_size + center) * channels + c) * channels + c;
            layer.weights[idx] = 1.0;
        }
        layer
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Output spatial dims for an input of (h, w): h + 2 pad - k + 1 each.
    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let oh = (h + 2 * self.padding).checked_sub(self.kernel_size - 1);
        let ow = (w + 2 * self.padding).checked_sub(self.kernel_size - 1);
        match (oh, ow) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok((oh, ow)),
            _ => Err(SimError::ShapeMismatch(format!(
                "kernel {} with padding {} yields empty output for {}x{} input",
                self.kernel_size, self.padding, h, w
            ))),
        }
    }

    /// Zero-padded cross-correlation plus bias. The padding is implicit:
    /// out-of-range taps are skipped rather than materialized, which also
    /// makes tall-and-narrow inputs cheap.
    pub fn forward(&self, input: &Tensor3) -> Result<Tensor3> {
        let (h, w, cin) = input.dims();
        if cin != self.in_channels {
            return Err(SimError::ShapeMismatch(format!(
                "layer expects {} input channels, got {}",
                self.in_channels, cin
            )));
        }
        let (oh, ow) = self.output_dims(h, w)?;
        let k = self.kernel_size;
        let p = self.padding;
        let cout = self.out_channels;
        let mut out = Tensor3::zeros(oh, ow, cout);

        let id = input.data();
        let od = out.data_mut();
        let wd = &self.weights;

        for oy in 0..oh {
            let ky_lo = p.saturating_sub(oy);
            let ky_hi = k.min(h + p - oy);
            for ox in 0..ow {
                let kx_lo = p.saturating_sub(ox);
                let kx_hi = k.min(w + p - ox);
                let obase = (oy * ow + ox) * cout;
                od[obase..obase + cout].copy_from_slice(&self.bias);
                for ky in ky_lo..ky_hi {
                    let iy = oy + ky - p;
                    for kx in kx_lo..kx_hi {
                        let ix = ox + kx - p;
                        let ibase = (iy * w + ix) * cin;
                        let wbase = (ky * k + kx) * cin * cout;
                        for ic in 0..cin {
                            let a = id[ibase + ic];
                            let wrow = &wd[wbase + ic * cout..wbase + (ic + 1) * cout];
                            let orow = &mut od[obase..obase + cout];
                            for (o, &wv) in orow.iter_mut().zip(wrow) {
                                *o += a * wv;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Backward pass: given the loss gradient at the output, produce the
    /// parameter gradients and the gradient at the input.
    pub fn backward(&self, input: &Tensor3, grad_out: &Tensor3) -> Result<(ConvGrads, Tensor3)> {
        let (h, w, cin) = input.dims();
        let (oh, ow) = self.output_dims(h, w)?;
        let (gh, gw, gc) = grad_out.dims();
        if (gh, gw, gc) != (oh, ow, self.out_channels) {
            return Err(SimError::ShapeMismatch(format!(
                "output gradient is {gh}x{gw}x{gc}, expected {oh}x{ow}x{}",
                self.out_channels
            )));
        }
        let k = self.kernel_size;
        let p = self.padding;
        let cout = self.out_channels;

        let mut grads = ConvGrads {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; cout],
        };
        let mut grad_in = Tensor3::zeros(h, w, cin);

        let id = input.data();
        let gd = grad_out.data();
        let wd = &self.weights;
        let dwd = &mut grads.weights;
        let din = grad_in.data_mut();

        for oy in 0..oh {
            let ky_lo = p.saturating_sub(oy);
            let ky_hi = k.min(h + p - oy);
            for ox in 0..ow {
                let kx_lo = p.saturating_sub(ox);
                let kx_hi = k.min(w + p - ox);
                let gbase = (oy * ow + ox) * cout;
                let grow = &gd[gbase..gbase + cout];
                for (b, &g) in grads.bias.iter_mut().zip(grow) {
                    *b += g;
                }
                for ky in ky_lo..ky_hi {
                    let iy = oy + ky - p;
                    for kx in kx_lo..kx_hi {
                        let ix = ox + kx - p;
                        let ibase = (iy * w + ix) * cin;
                        let wbase = (ky * k + kx) * cin * cout;
                        for ic in 0..cin {
                            let a = id[ibase + ic];
                            let wrow = &wd[wbase + ic * cout..wbase + (ic + 1) * cout];
                            let dwrow = &mut dwd[wbase + ic * cout..wbase + (ic + 1) * cout];
                            let mut s = 0.0;
                            for oc in 0..cout {
                                let g = grow[oc];
                                dwrow[oc] += a * g;
                                s += wrow[oc] * g;
                            }
                            din[ibase + ic] += s;
                        }
                    }
                }
            }
        }
        Ok((grads, grad_in))
    }
}

/// Free-function spelling of [`ConvLayer::forward`].
pub fn conv2d_forward(input: &Tensor3, layer: &ConvLayer) -> Result<Tensor3> {
    layer.forward(input)
}
