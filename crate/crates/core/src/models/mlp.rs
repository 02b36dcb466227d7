use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::Var;
use crate::params::{Layout, ParamVector};
use crate::scalar::Scalar;

/// Negative-side slope of [`Activation::LeakyRelu`].
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
    LeakyRelu,
    Sigmoid,
}

impl Activation {
    pub fn apply<'t, T: Scalar>(self, x: Var<'t, T>) -> Var<'t, T> {
        match self {
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.relu(),
            Activation::LeakyRelu => x.leaky_relu(T::of(LEAKY_SLOPE)),
            Activation::Sigmoid => x.sigmoid(),
        }
    }
}

/// Fully connected network `input → hidden… → output`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input);
        w.extend_from_slice(&self.hidden);
        w.push(self.output);
        w
    }

    /// `w{l}` (fan_in × fan_out, row-major) then `b{l}` per layer.
    pub fn layout(&self) -> Layout {
        let widths = self.widths();
        let mut layout = Layout::new();
        for (l, pair) in widths.windows(2).enumerate() {
            layout.push(format!("w{l}"), pair[0] * pair[1]);
            layout.push(format!("b{l}"), pair[1]);
        }
        layout
    }

    pub fn param_len(&self) -> usize {
        self.layout().total()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<T: Scalar>(&self, seed: u64) -> ParamVector<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = self.widths();
        let mut values = Vec::with_capacity(self.param_len());
        for pair in widths.windows(2) {
            let limit = (6.0 / (pair[0] + pair[1]) as f64).sqrt();
            for _ in 0..pair[0] * pair[1] {
                values.push(T::of(rng.random_range(-limit..limit)));
            }
            values.extend(std::iter::repeat_n(T::zero(), pair[1]));
        }
        ParamVector::new(values, self.layout()).expect("finite initial weights")
    }

    /// Per-layer `(weight, bias)` views of `theta` starting at `offset`.
    pub fn layers<'t, T: Scalar>(
        &self,
        theta: Var<'t, T>,
        offset: usize,
    ) -> Vec<(Var<'t, T>, Var<'t, T>)> {
        let widths = self.widths();
        let mut off = offset;
        let mut out = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let w = theta.slice(off, pair[0], pair[1]);
            off += pair[0] * pair[1];
            let b = theta.slice(off, 1, pair[1]);
            off += pair[1];
            out.push((w, b));
        }
        out
    }

    /// Batched forward pass: rows of `x` are inputs.
    pub fn forward<'t, T: Scalar>(&self, theta: Var<'t, T>, x: Var<'t, T>) -> Var<'t, T> {
        self.forward_at(theta, 0, x)
    }

    /// Forward pass reading weights from `theta` starting at `offset`.
    pub fn forward_at<'t, T: Scalar>(
        &self,
        theta: Var<'t, T>,
        offset: usize,
        x: Var<'t, T>,
    ) -> Var<'t, T> {
        let layers = self.layers(theta, offset);
        let last = layers.len() - 1;
        let mut h = x;
        for (l, (w, b)) in layers.into_iter().enumerate() {
            let pre = h.matmul(w).add_row(b);
            h = if l == last {
                self.output_activation.apply(pre)
            } else {
                self.activation.apply(pre)
            };
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::Tape;
    use crate::matrix::Matrix;

    #[test]
    fn layout_counts() {
        let spec = MlpSpec {
            input: 2,
            hidden: vec![32, 32],
            output: 2,
            activation: Activation::Tanh,
            output_activation: Activation::Linear,
        };
        assert_eq!(spec.param_len(), 2 * 32 + 32 + 32 * 32 + 32 + 32 * 2 + 2);
        let p: ParamVector<f64> = spec.init(3);
        assert_eq!(p, spec.init(3));
        assert_eq!(p.slice("b0").unwrap(), &[0.0; 32]);
    }

    #[test]
    fn forward_single_linear_layer() {
        let spec = MlpSpec {
            input: 2,
            hidden: vec![],
            output: 1,
            activation: Activation::Tanh,
            output_activation: Activation::Linear,
        };
        let tape = Tape::new();
        let th = tape.constant(Matrix::column(vec![1.0, -2.0, 0.5]));
        let x = tape.constant(Matrix::from_rows(&[vec![3.0, 1.0], vec![0.0, 0.0]]));
        let y = spec.forward(th, x).value();
        assert_eq!(y.as_slice(), &[1.5, 0.5]);
    }
}
