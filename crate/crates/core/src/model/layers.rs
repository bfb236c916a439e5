use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Affine map `x ↦ W x + b` applied row-wise: `X·Wᵀ + bᵀ`.
///
/// `weight` is `out × in`, `bias` is `out × 1`. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(output, input),
            bias: Matrix::zeros(output, 1),
        }
    }

    /// Weights Normal(0, `std`), biases zero.
    pub fn normal(input: usize, output: usize, std: f64, rng: &mut Rng) -> Self {
        Self {
            weight: Matrix::from_fn(output, input, |_, _| std * rng.normal()),
            bias: Matrix::zeros(output, 1),
        }
    }

    pub fn from_parts(weight: Matrix, bias: Matrix) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape(
                "Linear::from_parts",
                format!("{} bias entries", weight.rows()),
                bias.len(),
            ));
        }
        let out = weight.rows();
        Ok(Self {
            weight,
            bias: Matrix::from_vec(out, 1, bias.into_vec())?,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "Linear::forward",
                format!("{} input columns", self.input_dim()),
                x.cols(),
            ));
        }
        let mut out = x.matmul_t(&self.weight)?;
        out.add_row_broadcast(&self.bias)?;
        Ok(out)
    }

    /// Output coordinate `j` for one input row.
    #[inline]
    pub fn forward_coord(&self, x: &[f64], j: usize) -> f64 {
        crate::numerics::dot(self.weight.row(j), x) + self.bias.as_slice()[j]
    }

    /// Gradients of the parameters and the input, given `d_out = ∂L/∂(output)`.
    pub fn backward(&self, x: &Matrix, d_out: &Matrix) -> Result<(Linear, Matrix)> {
        let grad = Linear {
            weight: d_out.t_matmul(x)?,
            bias: d_out.column_sums(),
        };
        let dx = d_out.matmul(&self.weight)?;
        Ok((grad, dx))
    }

    pub fn params_mut(&mut self) -> [&mut Matrix; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn params(&self) -> [&Matrix; 2] {
        [&self.weight, &self.bias]
    }
}

/// Multilayer perceptron `f_θ`: ReLU after every hidden layer, identity on
/// the last. With no layers it is the identity map.
#[derive(Clone, Debug, PartialEq)]
pub struct Backbone {
    layers: Vec<Linear>,
    input_dim: usize,
}

/// Activations kept from a forward pass for the backward pass.
pub struct BackboneTrace {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Matrix>,
    output: Matrix,
}

impl BackboneTrace {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

impl Backbone {
    pub fn identity(dim: usize) -> Self {
        Self {
            layers: Vec::new(),
            input_dim: dim,
        }
    }

    /// Layers `dims[0] → dims[1] → … → dims[last]`. Hidden layers use He
    /// initialization `N(0, 2/fan_in)`, the output layer `N(0, 1/fan_in)`.
    pub fn new(dims: &[usize], rng: &mut Rng) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::domain("Backbone::new", format!("invalid layer dims {dims:?}")));
        }
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let gain = if l + 1 < n { 2.0 } else { 1.0 };
                Linear::normal(w[0], w[1], (gain / w[0] as f64).sqrt(), rng)
            })
            .collect();
        Ok(Self {
            layers,
            input_dim: dims[0],
        })
    }

    pub fn from_layers(layers: Vec<Linear>, input_dim: usize) -> Result<Self> {
        let mut dim = input_dim;
        for layer in &layers {
            if layer.input_dim() != dim {
                return Err(Error::shape("Backbone::from_layers", dim, layer.input_dim()));
            }
            dim = layer.output_dim();
        }
        Ok(Self { layers, input_dim })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, Linear::output_dim)
    }

    pub fn is_identity(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_traced(x)?.output)
    }

    pub fn forward_traced(&self, x: &Matrix) -> Result<BackboneTrace> {
        if x.cols() != self.input_dim {
            return Err(Error::shape(
                "forward_features",
                format!("{} input columns", self.input_dim),
                x.cols(),
            ));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        let last = self.layers.len().saturating_sub(1);
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&a)?;
            if l < last {
                z.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut a, z));
        }
        Ok(BackboneTrace { inputs, output: a })
    }

    /// Parameter gradients per layer and the gradient with respect to the
    /// input batch, given `d_out = ∂L/∂h`.
    pub fn backward(&self, trace: &BackboneTrace, d_out: &Matrix) -> Result<(Vec<Linear>, Matrix)> {
        let mut grads = vec![None; self.layers.len()];
        let mut delta = d_out.clone();
        for l in (0..self.layers.len()).rev() {
            let input = &trace.inputs[l];
            let (g, mut dx) = self.layers[l].backward(input, &delta)?;
            grads[l] = Some(g);
            if l > 0 {
                // input of layer l is relu(pre-activation of layer l−1)
                for (d, &a) in dx.as_mut_slice().iter_mut().zip(input.as_slice()) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = dx;
        }
        Ok((grads.into_iter().map(Option::unwrap).collect(), delta))
    }
}
