use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::numerics::{axpy_unchecked, cross_entropy, dot_unchecked, prob::softmax_unchecked, Matrix, RngStream};

use super::config::MlpConfig;
use super::gradient::logit_gradient_unchecked;

/// Dense layer `out = W · in + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Option<Vec<f64>>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    fn num_params(&self) -> usize {
        self.weights.as_slice().len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.out_dim())
            .map(|r| dot_unchecked(self.weights.row(r), input))
            .collect();
        if let Some(b) = &self.bias {
            axpy_unchecked(1.0, b, &mut out);
        }
        out
    }
}

/// Parameters of a feed-forward leaky-ReLU network with a softmax head.
/// The final layer's weight matrix is `W ∈ ℝ^{d_y × d_h}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
    pub leaky_slope: f64,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// Pre-activations of each hidden layer.
    pub pre_activations: Vec<Vec<f64>>,
    /// Layer inputs: `activations[0] = x`, the last entry is the penultimate
    /// activation `u`.
    pub activations: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ForwardPass {
    pub fn penultimate(&self) -> &[f64] {
        self.activations.last().expect("input is always present")
    }
}

/// Gradient with the same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub layers: Vec<Layer>,
}

impl ParamGradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: l.bias.as_ref().map(|b| vec![0.0; b.len()]),
                })
                .collect(),
        }
    }

    pub fn last_layer_weights(&self) -> &Matrix {
        &self.layers.last().expect("at least one layer").weights
    }

    /// Flattened in [`ModelParams::flatten`] order.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub(crate) fn add_scaled(&mut self, alpha: f64, other: &ParamGradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            axpy_unchecked(alpha, b.weights.as_slice(), a.weights.as_mut_slice());
            if let (Some(x), Some(y)) = (a.bias.as_mut(), b.bias.as_ref()) {
                axpy_unchecked(alpha, y, x);
            }
        }
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weights.as_slice());
        if let Some(b) = &l.bias {
            out.extend_from_slice(b);
        }
    }
    out
}

impl ModelParams {
    /// Uniform `±1/√fan_in` weights from the seeded stream, zero biases.
    pub fn init(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = RngStream::new(config.seed);
        let widths = config.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut weights = Matrix::zeros(fan_out, fan_in);
                for v in weights.as_mut_slice() {
                    *v = rng.uniform_range(-bound, bound);
                }
                Layer {
                    weights,
                    bias: config.bias.then(|| vec![0.0; fan_out]),
                }
            })
            .collect();
        Ok(Self {
            layers,
            leaky_slope: config.leaky_slope,
        })
    }

    /// Builds parameters from explicit layers, checking that widths chain.
    pub fn from_layers(layers: Vec<Layer>, leaky_slope: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("model layers"));
        }
        for pair in layers.windows(2) {
            ensure_len("layer widths", pair[0].out_dim(), pair[1].in_dim())?;
        }
        for l in &layers {
            if let Some(b) = &l.bias {
                ensure_len("layer bias", l.out_dim(), b.len())?;
                crate::error::ensure_finite("layer bias", b)?;
            }
            if !l.weights.is_finite() {
                return Err(Error::NonFinite("layer weights"));
            }
        }
        if layers.last().map_or(0, Layer::out_dim) < 2 {
            return Err(Error::InvalidConfig("output layer needs >= 2 classes".into()));
        }
        Ok(Self { layers, leaky_slope })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.last_layer().out_dim()
    }

    pub fn penultimate_dim(&self) -> usize {
        self.last_layer().in_dim()
    }

    pub fn last_layer(&self) -> &Layer {
        self.layers.last().expect("at least one layer")
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Per layer: weights row-major, then bias.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        ensure_len("flat parameters", self.num_params(), flat.len())?;
        let mut out = self.clone();
        let mut pos = 0;
        for l in &mut out.layers {
            let n = l.weights.as_slice().len();
            l.weights.as_mut_slice().copy_from_slice(&flat[pos..pos + n]);
            pos += n;
            if let Some(b) = l.bias.as_mut() {
                let m = b.len();
                b.copy_from_slice(&flat[pos..pos + m]);
                pos += m;
            }
        }
        Ok(out)
    }

    pub(crate) fn add_scaled(&mut self, alpha: f64, grad: &ParamGradients) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            axpy_unchecked(alpha, g.weights.as_slice(), l.weights.as_mut_slice());
            if let (Some(b), Some(gb)) = (l.bias.as_mut(), g.bias.as_ref()) {
                axpy_unchecked(alpha, gb, b);
            }
        }
    }

    pub fn squared_norm(&self) -> f64 {
        let f = self.flatten();
        dot_unchecked(&f, &f)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.as_ref().is_none_or(|b| b.iter().all(|v| v.is_finite())))
    }

    fn leaky(&self, v: f64) -> f64 {
        if v > 0.0 {
            v
        } else {
            self.leaky_slope * v
        }
    }

    fn leaky_derivative(&self, v: f64) -> f64 {
        if v > 0.0 {
            1.0
        } else {
            self.leaky_slope
        }
    }

    /// Forward pass: hidden layers use leaky-ReLU, the output is `softmax(W u + b)`.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass> {
        ensure_len("forward input", self.input_dim(), x.len())?;
        crate::error::ensure_finite("forward input", x)?;
        let last = self.layers.len() - 1;
        let mut pre_activations = Vec::with_capacity(last);
        let mut activations = Vec::with_capacity(last + 1);
        activations.push(x.to_vec());
        for layer in &self.layers[..last] {
            let z = layer.apply(activations.last().unwrap());
            activations.push(z.iter().map(|&v| self.leaky(v)).collect());
            pre_activations.push(z);
        }
        let logits = self.layers[last].apply(activations.last().unwrap());
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        let probs = softmax_unchecked(&logits);
        Ok(ForwardPass {
            pre_activations,
            activations,
            logits,
            probs,
        })
    }

    /// Cross-entropy loss of one labeled point.
    pub fn loss(&self, x: &[f64], label: usize) -> Result<f64> {
        cross_entropy(&self.forward(x)?.probs, label)
    }

    /// Exact gradient of `cross_entropy(forward(x), label)` with respect to
    /// every parameter. Also returns the loss.
    pub fn backprop(&self, x: &[f64], label: usize) -> Result<(ParamGradients, f64)> {
        let pass = self.forward(x)?;
        let loss = cross_entropy(&pass.probs, label)?;
        let mut grads = ParamGradients::zeros_like(self);
        self.backprop_into(&pass, label, 1.0, &mut grads);
        Ok((grads, loss))
    }

    /// Accumulates `scale · ∇ℓ` into `grads` given a completed forward pass.
    pub(crate) fn backprop_into(&self, pass: &ForwardPass, label: usize, scale: f64, grads: &mut ParamGradients) {
        let mut delta = logit_gradient_unchecked(&pass.probs, label);
        for l in (0..self.layers.len()).rev() {
            let input = &pass.activations[l];
            let g = &mut grads.layers[l];
            for (r, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy_unchecked(scale * d, input, g.weights.row_mut(r));
                }
            }
            if let Some(b) = g.bias.as_mut() {
                axpy_unchecked(scale, &delta, b);
            }
            if l > 0 {
                let mut back = vec![0.0; input.len()];
                let w = &self.layers[l].weights;
                for (r, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        axpy_unchecked(d, w.row(r), &mut back);
                    }
                }
                for (b, &z) in back.iter_mut().zip(&pass.pre_activations[l - 1]) {
                    *b *= self.leaky_derivative(z);
                }
                delta = back;
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let p = self.forward(x)?.probs;
        Ok(argmax(&p))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_net() -> ModelParams {
        // 2 -> 3 -> 3, leaky slope 0.1
        let l1 = Layer {
            weights: Matrix::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0], vec![-1.0, -1.0]]).unwrap(),
            bias: Some(vec![0.0, -1.0, 0.5]),
        };
        let l2 = Layer {
            weights: Matrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 1.0, -1.0], vec![1.0, 1.0, 1.0]]).unwrap(),
            bias: Some(vec![0.1, 0.0, -0.1]),
        };
        ModelParams::from_layers(vec![l1, l2], 0.1).unwrap()
    }

    #[test]
    fn hand_computed_forward() {
        // x = (1, 2):
        // z1 = (1-2+0, 0.5+4-1, -1-2+0.5) = (-1, 3.5, -2.5)
        // h1 = (-0.1, 3.5, -0.25)
        // a  = (-0.1 - 0.5 + 0.1, 3.5 + 0.25, -0.1 + 3.5 - 0.25 - 0.1) = (-0.5, 3.75, 3.05)
        let net = hand_net();
        let p = net.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(p.pre_activations[0], vec![-1.0, 3.5, -2.5]);
        assert_eq!(p.penultimate(), &[-0.1, 3.5, -0.25]);
        let expected = [-0.5, 3.75, 3.05];
        for (a, e) in p.logits.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        let z: f64 = expected.iter().map(|v| v.exp()).sum();
        for (pi, e) in p.probs.iter().zip(expected) {
            assert!((pi - e.exp() / z).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_hidden_identity_passthrough() {
        let layer = Layer {
            weights: Matrix::identity(3),
            bias: None,
        };
        let net = ModelParams::from_layers(vec![layer], 0.01).unwrap();
        let p = net.forward(&[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(p.logits, vec![0.3, -1.0, 2.0]);
        assert_eq!(p.penultimate(), &[0.3, -1.0, 2.0]);
        assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let net = hand_net();
        assert!(matches!(net.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            net.backprop(&[1.0, 1.0], 3),
            Err(Error::LabelOutOfRange { .. })
        ));
        let bad = vec![
            Layer {
                weights: Matrix::zeros(3, 2),
                bias: None,
            },
            Layer {
                weights: Matrix::zeros(2, 4),
                bias: None,
            },
        ];
        assert!(ModelParams::from_layers(bad, 0.01).is_err());
    }

    #[test]
    fn flatten_round_trip() {
        let mut cfg = MlpConfig::new(3, vec![4, 2], 3);
        cfg.seed = 9;
        let p = ModelParams::init(&cfg).unwrap();
        let flat = p.flatten();
        assert_eq!(flat.len(), p.num_params());
        assert_eq!(p.with_flat(&flat).unwrap(), p);
    }

    #[test]
    fn duplicated_point_identical_gradients() {
        let net = hand_net();
        let (g1, l1) = net.backprop(&[0.7, -0.2], 1).unwrap();
        let (g2, l2) = net.backprop(&[0.7, -0.2], 1).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(l1.to_bits(), l2.to_bits());
    }
}
