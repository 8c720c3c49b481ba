use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Logistic function `1 / (1 + e^-x)`.
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fully connected network with one sigmoid hidden layer and linear outputs.
///
/// All parameters live in one flat vector laid out as
/// `[w1 (hidden x inputs), b1 (hidden), w2 (outputs x hidden), b2 (outputs)]`
/// so that gradients and momentum buffers share the same indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    params: Vec<f64>,
    /// Last applied update, for momentum.
    prev_update: Vec<f64>,
}

impl Network {
    /// Weights and biases drawn uniformly from `[-init_range, init_range]`.
    pub fn new(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        init_range: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let n = Self::param_count_for(inputs, hidden, outputs);
        let params = (0..n)
            .map(|_| {
                if init_range > 0.0 {
                    rng.gen_range(-init_range..=init_range)
                } else {
                    0.0
                }
            })
            .collect();
        Network {
            inputs,
            hidden,
            outputs,
            params,
            prev_update: vec![0.0; n],
        }
    }

    /// Redraws the input-to-hidden weights and hidden biases uniformly from
    /// `[-weight_range, weight_range]` and `[-bias_range, bias_range]`.
    pub fn init_hidden(&mut self, weight_range: f64, bias_range: f64, rng: &mut ChaCha8Rng) {
        let (b1, w2, _) = self.offsets();
        let draw = |r: f64, rng: &mut ChaCha8Rng| if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 };
        for p in &mut self.params[..b1] {
            *p = draw(weight_range, rng);
        }
        for p in &mut self.params[b1..w2] {
            *p = draw(bias_range, rng);
        }
    }

    pub fn param_count_for(inputs: usize, hidden: usize, outputs: usize) -> usize {
        hidden * inputs + hidden + outputs * hidden + outputs
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.inputs, self.hidden, self.outputs)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn prev_update(&self) -> &[f64] {
        &self.prev_update
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        (b1, w2, b2)
    }

    /// Sets every output weight to zero and the output biases to `bias`.
    pub fn set_output_layer(&mut self, bias: &[f64]) {
        assert_eq!(bias.len(), self.outputs);
        let (_, w2, b2) = self.offsets();
        self.params[w2..b2].fill(0.0);
        self.params[b2..].copy_from_slice(bias);
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.inputs, "input width");
        let (b1, _, _) = self.offsets();
        (0..self.hidden)
            .map(|i| {
                let row = &self.params[i * self.inputs..(i + 1) * self.inputs];
                let z = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.params[b1 + i];
                logistic(z)
            })
            .collect()
    }

    fn outputs_from(&self, h: &[f64]) -> Vec<f64> {
        let (_, w2, b2) = self.offsets();
        (0..self.outputs)
            .map(|j| {
                let row = &self.params[w2 + j * self.hidden..w2 + (j + 1) * self.hidden];
                row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.params[b2 + j]
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.outputs_from(&self.hidden_activations(x))
    }

    /// Half the squared error summed over the outputs.
    pub fn loss(&self, x: &[f64], target: &[f64]) -> f64 {
        0.5 * self
            .forward(x)
            .iter()
            .zip(target)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>()
    }

    /// Gradient of [`Network::loss`] with respect to every parameter.
    pub fn gradient(&self, x: &[f64], target: &[f64]) -> Vec<f64> {
        assert_eq!(target.len(), self.outputs, "target width");
        let h = self.hidden_activations(x);
        let o = self.outputs_from(&h);
        let (b1, w2, b2) = self.offsets();
        let mut g = vec![0.0; self.params.len()];
        let delta_out: Vec<f64> = o.iter().zip(target).map(|(o, t)| o - t).collect();
        for (j, d) in delta_out.iter().enumerate() {
            for i in 0..self.hidden {
                g[w2 + j * self.hidden + i] = d * h[i];
            }
            g[b2 + j] = *d;
        }
        for i in 0..self.hidden {
            let back: f64 = delta_out
                .iter()
                .enumerate()
                .map(|(j, d)| self.params[w2 + j * self.hidden + i] * d)
                .sum();
            let dh = back * h[i] * (1.0 - h[i]);
            for l in 0..self.inputs {
                g[i * self.inputs + l] = dh * x[l];
            }
            g[b1 + i] = dh;
        }
        g
    }

    /// One backpropagation iteration: `update = -lr * grad + momentum * prev`.
    pub fn train_step(&mut self, x: &[f64], target: &[f64], lr: f64, momentum: f64) {
        let g = self.gradient(x, target);
        for ((p, prev), gi) in self.params.iter_mut().zip(&mut self.prev_update).zip(&g) {
            let upd = -lr * gi + momentum * *prev;
            *p += upd;
            *prev = upd;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params
            .iter()
            .chain(&self.prev_update)
            .all(|v| v.is_finite())
    }
}

/// Euclidean norm of the output error.
pub fn output_error(output: &[f64], target: &[f64]) -> f64 {
    output
        .iter()
        .zip(target)
        .map(|(o, t)| (o - t) * (o - t))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_output_layer_returns_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::new(1, 250, 2, 0.1, &mut rng);
        net.set_output_layer(&[0.25, -0.5]);
        for x in [0.0, 0.3, 7.0] {
            assert_eq!(net.forward(&[x]), vec![0.25, -0.5]);
        }
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let a = Network::new(1, 20, 2, 0.1, &mut ChaCha8Rng::seed_from_u64(5));
        let b = Network::new(1, 20, 2, 0.1, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert_eq!(a.params().len(), 20 + 20 + 40 + 2);
        assert!(a.params().iter().all(|p| p.abs() <= 0.1));
    }

    #[test]
    fn error_examples() {
        assert_eq!(output_error(&[0.3, 0.4], &[0.0, 0.0]), 0.5);
        assert!((output_error(&[0.1, 0.0], &[0.0, 0.0]) - 0.1).abs() < 1e-15);
        assert_eq!(output_error(&[0.2, 0.7], &[0.2, 0.7]), 0.0);
    }

    #[test]
    fn momentum_reuses_previous_update() {
        let mut net = Network::new(1, 3, 2, 0.1, &mut ChaCha8Rng::seed_from_u64(1));
        net.train_step(&[0.5], &[1.0, 0.0], 0.1, 0.0);
        let first = net.prev_update().to_vec();
        let g = net.gradient(&[0.5], &[1.0, 0.0]);
        let before = net.params().to_vec();
        net.train_step(&[0.5], &[1.0, 0.0], 0.1, 0.5);
        for i in 0..before.len() {
            let expect = before[i] - 0.1 * g[i] + 0.5 * first[i];
            assert!((net.params()[i] - expect).abs() < 1e-15);
        }
    }
}
