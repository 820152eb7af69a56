use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

/// Affine layer `y = x·W + b` with `W` stored as `inputs × outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Glorot-normal weights, zero bias.
    pub fn xavier<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let std = (2.0 / (inputs + outputs) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        Self {
            weights: Array2::from_shape_simple_fn((inputs, outputs), || normal.sample(rng)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weights);
        y += &self.bias;
        y
    }

    pub fn zero_grad(&self) -> DenseGrad {
        DenseGrad {
            weights: Array2::zeros(self.weights.raw_dim()),
            bias: Array1::zeros(self.bias.len()),
        }
    }

    /// Parameter gradients for upstream gradient `delta` (w.r.t. the affine
    /// output) and the layer input `x`.
    pub fn grad(&self, x: ArrayView2<'_, f64>, delta: ArrayView2<'_, f64>) -> DenseGrad {
        DenseGrad {
            weights: x.t().dot(&delta),
            bias: delta.sum_axis(Axis(0)),
        }
    }
}

/// Stack of dense layers, tanh on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    name: &'static str,
}

/// Per-layer outputs (after activation) of one forward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub outputs: Vec<Array2<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("at least one layer")
    }
}

impl Mlp {
    pub fn new(name: &'static str, layers: Vec<Dense>) -> Self {
        assert!(!layers.is_empty(), "an MLP needs at least one layer");
        for w in layers.windows(2) {
            assert_eq!(w[0].outputs(), w[1].inputs(), "layer widths must chain");
        }
        Self { layers, name }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            Activation::Identity
        } else {
            Activation::Tanh
        }
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<MlpTrace> {
        if x.ncols() != self.inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs(),
                actual: x.ncols(),
            });
        }
        let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let input = match outputs.last() {
                Some(prev) => prev.view(),
                None => x,
            };
            let mut y = layer.forward(input);
            if self.activation(l) == Activation::Tanh {
                y.mapv_inplace(f64::tanh);
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{} layer {l}", self.name)));
            }
            outputs.push(y);
        }
        Ok(MlpTrace { outputs })
    }

    /// Back-propagates `grad_out` (gradient w.r.t. the network output).
    /// Returns per-layer parameter gradients and, when `input_grad` is set,
    /// the gradient w.r.t. the network input.
    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        trace: &MlpTrace,
        grad_out: Array2<f64>,
        input_grad: bool,
    ) -> (Vec<DenseGrad>, Option<Array2<f64>>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_out;
        let mut dx = None;
        for l in (0..self.layers.len()).rev() {
            let mut delta = upstream;
            if self.activation(l) == Activation::Tanh {
                delta.zip_mut_with(&trace.outputs[l], |d, &y| *d *= 1.0 - y * y);
            }
            let input = if l == 0 { x } else { trace.outputs[l - 1].view() };
            grads.push(self.layers[l].grad(input, delta.view()));
            if l > 0 || input_grad {
                let g = delta.dot(&self.layers[l].weights.t());
                if l == 0 {
                    dx = Some(g);
                    break;
                }
                upstream = g;
            } else {
                break;
            }
        }
        grads.reverse();
        (grads, dx)
    }
}
