use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DqnError;

/// Single-hidden-layer MLP: `q = W2 · relu(W1 · x + b1) + b2`.
///
/// All parameters live in one flat vector laid out as `[W1, b1, W2, b2]`.
/// `W1` is stored input-major (row `i` holds the weights leaving input `i`)
/// and `W2` output-major (row `a` holds the weights entering output `a`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    params: Vec<f64>,
}

/// Gradient buffer with the same layout as [`QNetwork::params`].
pub type Gradient = Vec<f64>;

impl QNetwork {
    /// A network with every weight and bias set to zero.
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Result<Self, DqnError> {
        if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
            return Err(DqnError::InvalidShape {
                input_dim,
                hidden_dim,
                output_dim,
            });
        }
        let len = hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim;
        Ok(QNetwork {
            input_dim,
            hidden_dim,
            output_dim,
            params: vec![0.0; len],
        })
    }

    /// Each layer's weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Result<Self, DqnError> {
        let mut net = Self::zeros(input_dim, hidden_dim, output_dim)?;
        let b1 = 1.0 / (input_dim as f64).sqrt();
        let b2 = 1.0 / (hidden_dim as f64).sqrt();
        let (first, second) = net.params.split_at_mut(hidden_dim * input_dim + hidden_dim);
        for p in first.iter_mut() {
            *p = rng.gen_range(-b1..=b1);
        }
        for p in second.iter_mut() {
            *p = rng.gen_range(-b2..=b2);
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn same_shape(&self, other: &QNetwork) -> bool {
        self.input_dim == other.input_dim
            && self.hidden_dim == other.hidden_dim
            && self.output_dim == other.output_dim
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden_dim * self.input_dim;
        let w2 = b1 + self.hidden_dim;
        let b2 = w2 + self.output_dim * self.hidden_dim;
        (b1, w2, b2)
    }

    /// Split the flat parameters into `(W1, b1, W2, b2)`.
    pub fn layers(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        (&p[..b1], &p[b1..w2], &p[w2..b2], &p[b2..])
    }

    fn check_input(&self, state: &[f64]) -> Result<(), DqnError> {
        if state.len() != self.input_dim {
            return Err(DqnError::DimensionMismatch {
                expected: self.input_dim,
                got: state.len(),
            });
        }
        Ok(())
    }

    fn hidden_into(&self, state: &[f64], hidden: &mut [f64]) {
        let (w1, b1, _, _) = self.layers();
        hidden.copy_from_slice(b1);
        for (row, x) in w1.chunks_exact(self.hidden_dim).zip(state) {
            for (h, w) in hidden.iter_mut().zip(row) {
                *h += w * x;
            }
        }
        for h in hidden.iter_mut() {
            *h = h.max(0.0);
        }
    }

    fn output_unit(&self, hidden: &[f64], a: usize) -> f64 {
        let (_, _, w2, b2) = self.layers();
        let row = &w2[a * self.hidden_dim..(a + 1) * self.hidden_dim];
        b2[a] + dot(row, hidden)
    }

    /// Q-values for every action.
    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>, DqnError> {
        self.check_input(state)?;
        let mut hidden = vec![0.0; self.hidden_dim];
        self.hidden_into(state, &mut hidden);
        Ok((0..self.output_dim).map(|a| self.output_unit(&hidden, a)).collect())
    }

    /// `max_a Q(state, a)`.
    pub fn max_q(&self, state: &[f64]) -> Result<f64, DqnError> {
        let mut hidden = vec![0.0; self.hidden_dim];
        self.max_q_with(state, &mut hidden)
    }

    /// [`max_q`](Self::max_q) using caller-provided scratch of `hidden_dim` entries.
    pub(crate) fn max_q_with(&self, state: &[f64], hidden: &mut [f64]) -> Result<f64, DqnError> {
        self.check_input(state)?;
        self.hidden_into(state, hidden);
        Ok((0..self.output_dim)
            .map(|a| self.output_unit(hidden, a))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Mean squared TD error `mean_i (Q(s_i, a_i) - y_i)^2` for fixed targets.
    pub fn td_loss(&self, samples: &[TdSample<'_>]) -> Result<f64, DqnError> {
        if samples.is_empty() {
            return Err(DqnError::EmptyInput);
        }
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut loss = 0.0;
        for s in samples {
            self.check_sample(s)?;
            self.hidden_into(s.state, &mut hidden);
            let err = self.output_unit(&hidden, s.action) - s.target;
            loss += err * err;
        }
        Ok(loss / samples.len() as f64)
    }

    /// Loss as in [`td_loss`](Self::td_loss) plus its gradient with respect to
    /// every parameter, written into `grad` (resized and overwritten).
    pub fn td_loss_and_gradient(
        &self,
        samples: &[TdSample<'_>],
        grad: &mut Gradient,
    ) -> Result<f64, DqnError> {
        if samples.is_empty() {
            return Err(DqnError::EmptyInput);
        }
        grad.clear();
        grad.resize(self.params.len(), 0.0);
        let (ob1, ow2, ob2) = self.offsets();
        let (_, _, w2, _) = self.layers();
        let scale = 2.0 / samples.len() as f64;
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut dz = vec![0.0; self.hidden_dim];
        let mut loss = 0.0;
        for s in samples {
            self.check_sample(s)?;
            self.hidden_into(s.state, &mut hidden);
            let err = self.output_unit(&hidden, s.action) - s.target;
            loss += err * err;
            let dq = scale * err;

            grad[ob2 + s.action] += dq;
            let w2_row = &w2[s.action * self.hidden_dim..(s.action + 1) * self.hidden_dim];
            let gw2_row = &mut grad[ow2 + s.action * self.hidden_dim..ow2 + (s.action + 1) * self.hidden_dim];
            for (g, h) in gw2_row.iter_mut().zip(&hidden) {
                *g += dq * h;
            }
            // ReLU gate: h_j > 0 exactly when the pre-activation is positive
            for ((d, w), h) in dz.iter_mut().zip(w2_row).zip(&hidden) {
                *d = if *h > 0.0 { dq * w } else { 0.0 };
            }
            let (gw1, rest) = grad.split_at_mut(ob1);
            for (g, d) in rest[..self.hidden_dim].iter_mut().zip(&dz) {
                *g += d;
            }
            for (gw1_row, x) in gw1.chunks_exact_mut(self.hidden_dim).zip(s.state) {
                for (g, d) in gw1_row.iter_mut().zip(&dz) {
                    *g += d * x;
                }
            }
        }
        Ok(loss / samples.len() as f64)
    }

    fn check_sample(&self, s: &TdSample<'_>) -> Result<(), DqnError> {
        self.check_input(s.state)?;
        if s.action >= self.output_dim {
            return Err(DqnError::ActionOutOfRange {
                action: s.action,
                output_dim: self.output_dim,
            });
        }
        Ok(())
    }

    /// `params -= step * grad`.
    pub fn apply_gradient(&mut self, grad: &[f64], step: f64) {
        for (p, g) in self.params.iter_mut().zip(grad) {
            *p -= step * g;
        }
    }

    /// Overwrite this network's parameters with `other`'s.
    pub fn copy_from(&mut self, other: &QNetwork) -> Result<(), DqnError> {
        if !self.same_shape(other) {
            return Err(DqnError::ShapeMismatch);
        }
        self.params.copy_from_slice(&other.params);
        Ok(())
    }
}

/// Dot product with four independent accumulators, so long rows are not
/// bound by the latency of a single running sum.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// One regression example for the online network: push `Q(state, action)`
/// toward `target`.
#[derive(Debug, Clone, Copy)]
pub struct TdSample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub target: f64,
}
