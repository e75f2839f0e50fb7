use super::model::{CnnModel, ModelGrads};

/// Adam optimizer state: first and second gradient moments plus the step
/// counter driving bias correction. The moment vectors are flat over all
/// model parameters in layer order (weights then bias per layer).
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub learning_rate: f64,
    pub eps_bias: f64,
}

impl AdamState {
    pub fn new(param_count: usize, beta1: f64, beta2: f64, learning_rate: f64, eps_bias: f64) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
            beta1,
            beta2,
            learning_rate,
            eps_bias,
        }
    }

    /// Advance the step counter and return the bias-correction denominators
    /// (1 - beta1^t, 1 - beta2^t). The counter moves before correction, so
    /// the first step uses t = 1.
    fn advance(&mut self) -> (f64, f64) {
        self.t += 1;
        (
            1.0 - self.beta1.powi(self.t as i32),
            1.0 - self.beta2.powi(self.t as i32),
        )
    }

    /// Update one contiguous slice of parameters whose moments start at
    /// `offset`: m <- b1 m + (1-b1) g, v <- b2 v + (1-b2) g^2, then
    /// w <- w - lr * m_hat / (sqrt(v_hat) + eps).
    fn update_slice(&mut self, offset: usize, params: &mut [f64], grads: &[f64], bc: (f64, f64)) {
        debug_assert_eq!(params.len(), grads.len());
        let (bc1, bc2) = bc;
        for (i, (w, &g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[offset + i];
            let v = &mut self.v[offset + i];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps_bias);
        }
    }
}

/// One Adam step over a flat parameter vector.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) {
    assert_eq!(params.len(), state.m.len(), "state sized for these params");
    let bc = state.advance();
    state.update_slice(0, params, grads, bc);
}

/// Plain gradient descent: w <- w - lr * g.
pub fn sgd_step(params: &mut [f64], grads: &[f64], learning_rate: f64) {
    debug_assert_eq!(params.len(), grads.len());
    for (w, &g) in params.iter_mut().zip(grads) {
        *w -= learning_rate * g;
    }
}

impl CnnModel {
    /// One Adam step over every parameter of the model. The state must have
    /// been sized with [`CnnModel::param_count`].
    pub fn adam_update(&mut self, state: &mut AdamState, grads: &ModelGrads) {
        assert_eq!(state.m.len(), self.param_count());
        let bc = state.advance();
        let mut offset = 0;
        for (layer, lg) in self.layers.iter_mut().zip(&grads.layers) {
            state.update_slice(offset, &mut layer.conv.weights, &lg.weights, bc);
            offset += lg.weights.len();
            state.update_slice(offset, &mut layer.conv.bias, &lg.bias, bc);
            offset += lg.bias.len();
        }
    }
}
