use super::conv::{ConvGrads, ConvLayer};
use super::tensor::Tensor3;
use crate::error::{Result, SimError};
use crate::rng::{rng_from, tags};

/// One stage of the network: a convolution, optionally followed by ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnLayer {
    pub conv: ConvLayer,
    pub relu: bool,
}

/// A convolutional regression network: a stack of same-padding conv+ReLU
/// stages followed by a single-filter linear projection. The network is
/// fully convolutional, so it accepts any spatial size with the configured
/// input channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub layers: Vec<CnnLayer>,
}

impl CnnModel {
    /// Standard regression stack: `hidden_layers` conv stages of `filters`
    /// kernels with ReLU, then a one-filter projection without activation.
    /// All layers use same-padding so the output keeps the input's spatial
    /// shape. Weights are He-uniform from the seed.
    pub fn regression_stack(
        in_channels: usize,
        hidden_layers: usize,
        filters: usize,
        kernel: usize,
        seed: u64,
    ) -> Self {
        let padding = (kernel - 1) / 2;
        let mut rng = rng_from(seed, &[tags::WEIGHT_INIT]);
        let mut layers = Vec::with_capacity(hidden_layers + 1);
        let mut cin = in_channels;
        for _ in 0..hidden_layers {
            layers.push(CnnLayer {
                conv: ConvLayer::he_uniform(kernel, cin, filters, padding, &mut rng),
                relu: true,
            });
            cin = filters;
        }
        layers.push(CnnLayer {
            conv: ConvLayer::he_uniform(kernel, cin, 1, padding, &mut rng),
            relu: false,
        });
        CnnModel { layers }
    }

    /// A single delta-kernel projection with zero bias: the network computes
    /// the identity map. Useful as a passthrough reference.
    pub fn identity_passthrough(kernel: usize, channels: usize) -> Self {
        CnnModel {
            layers: vec![CnnLayer {
                conv: ConvLayer::delta(kernel, channels),
                relu: false,
            }],
        }
    }

    pub fn input_channels(&self) -> usize {
        self.layers.first().map_or(0, |l| l.conv.in_channels)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.conv.param_count()).sum()
    }

    /// Inference pass.
    pub fn forward(&self, input: &Tensor3) -> Result<Tensor3> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.conv.forward(&x)?;
            if layer.relu {
                x = relu(&x);
            }
        }
        Ok(x)
    }

    /// Forward pass keeping pre-activations and stage outputs for backprop.
    fn forward_trace(&self, input: &Tensor3) -> Result<(Vec<Tensor3>, Vec<Tensor3>)> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let z = layer.conv.forward(&x)?;
            x = if layer.relu { relu(&z) } else { z.clone() };
            pre.push(z);
            post.push(x.clone());
        }
        Ok((pre, post))
    }

    /// Exact analytic gradients of the squared-error loss with respect to
    /// every weight and bias. Returns the per-sample loss alongside.
    pub fn backward(&self, input: &Tensor3, target: &Tensor3) -> Result<(f64, ModelGrads)> {
        let (pre, post) = self.forward_trace(input)?;
        let pred = post.last().expect("model has at least one layer");
        let loss = mse_loss(pred, target)?;

        // d/dpred of sum((pred - target)^2).
        let mut grad = Tensor3::zeros(pred.dims().0, pred.dims().1, pred.dims().2);
        for ((g, &p), &t) in grad
            .data_mut()
            .iter_mut()
            .zip(pred.data())
            .zip(target.data())
        {
            *g = 2.0 * (p - t);
        }

        let mut layer_grads = vec![
            ConvGrads {
                weights: Vec::new(),
                bias: Vec::new(),
            };
            self.layers.len()
        ];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if layer.relu {
                for (g, &z) in grad.data_mut().iter_mut().zip(pre[i].data()) {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let layer_input = if i == 0 { input } else { &post[i - 1] };
            let (cg, gi) = layer.conv.backward(layer_input, &grad)?;
            layer_grads[i] = cg;
            grad = gi;
        }
        Ok((loss, ModelGrads { layers: layer_grads }))
    }
}

/// Elementwise max(0, z).
pub fn relu(t: &Tensor3) -> Tensor3 {
    let (h, w, c) = t.dims();
    let data = t.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor3::from_vec(h, w, c, data).expect("dims preserved")
}

/// Squared Euclidean distance between prediction and target. Batch means
/// are taken by the caller, so a batch of one reproduces the plain sum of
/// squared errors.
pub fn mse_loss(pred: &Tensor3, target: &Tensor3) -> Result<f64> {
    if pred.dims() != target.dims() {
        return Err(SimError::ShapeMismatch(format!(
            "loss dims {:?} vs {:?}",
            pred.dims(),
            target.dims()
        )));
    }
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum())
}

/// Gradients for every layer of a model, in layer order.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub layers: Vec<ConvGrads>,
}

impl ModelGrads {
    pub fn zeros_like(model: &CnnModel) -> Self {
        ModelGrads {
            layers: model
                .layers
                .iter()
                .map(|l| ConvGrads {
                    weights: vec![0.0; l.conv.weights.len()],
                    bias: vec![0.0; l.conv.bias.len()],
                })
                .collect(),
        }
    }

    /// self += other * scale
    pub fn add_scaled(&mut self, other: &ModelGrads, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y * scale;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y * scale;
            }
        }
    }
}
