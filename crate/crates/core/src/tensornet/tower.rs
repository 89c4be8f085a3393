use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{relu_mask, Linear, Matrix, ParamTensor, Scalar};
use crate::error::{Error, Result};

/// Guard added to the norm in the output L2 normalization.
pub const NORM_EPSILON: f64 = 1e-12;

/// Embedding half-width for uniform initialization.
pub const EMBEDDING_INIT_BOUND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply<T: Scalar>(self, m: &mut Matrix<T>) {
        match self {
            Activation::Relu => super::relu_in_place(m),
            Activation::Tanh => m.as_mut_slice().iter_mut().for_each(|v| *v = v.tanh()),
        }
    }

    fn backward<T: Scalar>(self, grad: &mut Matrix<T>, activated: &Matrix<T>) {
        match self {
            Activation::Relu => relu_mask(grad, activated),
            Activation::Tanh => {
                for (g, &h) in grad.as_mut_slice().iter_mut().zip(activated.as_slice()) {
                    *g = *g * (T::one() - h * h);
                }
            }
        }
    }
}

/// Shape of one tower: ID embedding, hidden layers, output layer, L2 normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerSpec {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub out_dim: usize,
    pub activation: Activation,
}

impl TowerSpec {
    /// Embedding 64, two hidden layers of 64, output 64 unless overridden.
    pub fn new(vocab_size: usize, dim: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: dim,
            hidden_dims: vec![dim, dim],
            out_dim: dim,
            activation: Activation::Relu,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.out_dim == 0 {
            return Err(Error::InvalidArgument(format!("degenerate tower spec {self:?}")));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument("zero-width hidden layer".into()));
        }
        Ok(())
    }
}

/// Activations kept from a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct TowerCache<T> {
    ids: Vec<usize>,
    /// Input of every affine layer; the last one feeds the output layer.
    layer_inputs: Vec<Matrix<T>>,
    prenorm: Matrix<T>,
    norms: Vec<f64>,
}

impl<T: Scalar> TowerCache<T> {
    pub fn batch_len(&self) -> usize {
        self.ids.len()
    }

    /// Squared norms of the outputs before normalization.
    pub fn prenorm_squared_norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.norms.iter().map(|n| n * n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tower<T> {
    spec: TowerSpec,
    pub embedding: ParamTensor<T>,
    pub hidden: Vec<Linear<T>>,
    pub output: Linear<T>,
}

impl<T: Scalar> Tower<T> {
    pub fn new<R: Rng + ?Sized>(prefix: &str, spec: TowerSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let embedding = ParamTensor::uniform(
            format!("{prefix}.embedding"),
            &[spec.vocab_size, spec.embed_dim],
            EMBEDDING_INIT_BOUND,
            rng,
        );
        let mut hidden = Vec::with_capacity(spec.hidden_dims.len());
        let mut fan_in = spec.embed_dim;
        for (l, &width) in spec.hidden_dims.iter().enumerate() {
            hidden.push(Linear::glorot(&format!("{prefix}.hidden{l}"), fan_in, width, rng));
            fan_in = width;
        }
        let output = Linear::glorot(&format!("{prefix}.output"), fan_in, spec.out_dim, rng);
        Ok(Self {
            spec,
            embedding,
            hidden,
            output,
        })
    }

    /// Rebuilds a tower from tensors in `params()` order.
    pub fn from_params(spec: TowerSpec, params: Vec<ParamTensor<T>>) -> Result<Self> {
        spec.validate()?;
        let expected = 1 + 2 * (spec.hidden_dims.len() + 1);
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "tower expects {expected} tensors, got {}",
                params.len()
            )));
        }
        let mut it = params.into_iter();
        let embedding = it.next().unwrap();
        check_shape(&embedding, &[spec.vocab_size, spec.embed_dim])?;
        let mut fan_in = spec.embed_dim;
        let mut take_linear = |fan_in: usize, fan_out: usize| -> Result<Linear<T>> {
            let weight = it.next().unwrap();
            let bias = it.next().unwrap();
            check_shape(&weight, &[fan_in, fan_out])?;
            check_shape(&bias, &[fan_out])?;
            Ok(Linear { weight, bias })
        };
        let mut hidden = Vec::new();
        for &width in &spec.hidden_dims {
            hidden.push(take_linear(fan_in, width)?);
            fan_in = width;
        }
        let output = take_linear(fan_in, spec.out_dim)?;
        Ok(Self {
            spec,
            embedding,
            hidden,
            output,
        })
    }

    pub fn spec(&self) -> &TowerSpec {
        &self.spec
    }

    pub fn out_dim(&self) -> usize {
        self.spec.out_dim
    }

    pub fn params(&self) -> Vec<&ParamTensor<T>> {
        let mut v = vec![&self.embedding];
        for l in &self.hidden {
            v.extend(l.params());
        }
        v.extend(self.output.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        let mut v = vec![&mut self.embedding];
        for l in &mut self.hidden {
            v.extend(l.params_mut());
        }
        v.extend(self.output.params_mut());
        v
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&id| id >= self.spec.vocab_size) {
            Some(&id) => Err(Error::OutOfRange {
                index: id,
                size: self.spec.vocab_size,
            }),
            None => Ok(()),
        }
    }

    /// Batched forward pass returning normalized outputs and the backward cache.
    pub fn forward(&self, ids: &[usize]) -> Result<(Matrix<T>, TowerCache<T>)> {
        self.check_ids(ids)?;
        let e = self.spec.embed_dim;
        let mut x = Matrix::zeros(ids.len(), e);
        for (r, &id) in ids.iter().enumerate() {
            x.row_mut(r)
                .copy_from_slice(&self.embedding.values[id * e..(id + 1) * e]);
        }
        let mut layer_inputs = Vec::with_capacity(self.hidden.len() + 1);
        for layer in &self.hidden {
            let mut h = layer.forward(&x);
            self.spec.activation.apply(&mut h);
            layer_inputs.push(x);
            x = h;
        }
        let prenorm = self.output.forward(&x);
        layer_inputs.push(x);

        let mut out = prenorm.clone();
        let mut norms = Vec::with_capacity(ids.len());
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let n = super::dot(row, row).sqrt();
            norms.push(n);
            if n > 0.0 {
                let scale = T::from_f64(1.0 / (n + NORM_EPSILON));
                row.iter_mut().for_each(|v| *v = *v * scale);
            }
        }
        Ok((
            out,
            TowerCache {
                ids: ids.to_vec(),
                layer_inputs,
                prenorm,
                norms,
            },
        ))
    }

    /// Forward pass without keeping a cache.
    pub fn infer(&self, ids: &[usize]) -> Result<Matrix<T>> {
        self.forward(ids).map(|(out, _)| out)
    }

    pub fn forward_one(&self, id: usize) -> Result<Vec<T>> {
        Ok(self.infer(&[id])?.into_vec())
    }

    /// Accumulates (`+=`) gradients of all tensors given the gradient of the loss
    /// with respect to the normalized outputs.
    ///
    /// `prenorm_l2` adds the gradient of `prenorm_l2 * ||x||²` for every pre-normalization
    /// output `x` in the batch.
    pub fn backward(
        &mut self,
        cache: &TowerCache<T>,
        upstream: &Matrix<T>,
        prenorm_l2: f64,
    ) -> Result<()> {
        if upstream.rows() != cache.ids.len() || upstream.cols() != self.spec.out_dim {
            return Err(Error::Shape(format!(
                "upstream gradient {}x{} for batch {} of width {}",
                upstream.rows(),
                upstream.cols(),
                cache.ids.len(),
                self.spec.out_dim
            )));
        }
        let d = self.spec.out_dim;
        let mut grad = Matrix::zeros(upstream.rows(), d);
        for r in 0..upstream.rows() {
            let x = cache.prenorm.row(r);
            let g = upstream.row(r);
            let n = cache.norms[r];
            let out = grad.row_mut(r);
            if n > 0.0 {
                // d/dx [x / (n + eps)] = I/(n+eps) - x xᵀ / (n (n+eps)²)
                let ne = n + NORM_EPSILON;
                let xg = super::dot(x, g);
                let coef = xg / (n * ne * ne);
                for j in 0..d {
                    out[j] = T::from_f64(g[j].to_f64() / ne - x[j].to_f64() * coef);
                }
            } else {
                out.copy_from_slice(g);
            }
            if prenorm_l2 != 0.0 {
                for j in 0..d {
                    out[j] = out[j] + T::from_f64(2.0 * prenorm_l2 * x[j].to_f64());
                }
            }
        }

        let last = cache.layer_inputs.len() - 1;
        grad = self.output.backward(&cache.layer_inputs[last], &grad);
        for l in (0..self.hidden.len()).rev() {
            self.spec
                .activation
                .backward(&mut grad, &cache.layer_inputs[l + 1]);
            grad = self.hidden[l].backward(&cache.layer_inputs[l], &grad);
        }

        let e = self.spec.embed_dim;
        for (r, &id) in cache.ids.iter().enumerate() {
            let dst = &mut self.embedding.grad[id * e..(id + 1) * e];
            for (g, &v) in dst.iter_mut().zip(grad.row(r)) {
                *g = *g + v;
            }
        }
        Ok(())
    }

    /// Same tower in another precision (gradients cleared).
    pub fn cast<U: Scalar>(&self) -> Tower<U> {
        Tower {
            spec: self.spec.clone(),
            embedding: self.embedding.cast(),
            hidden: self
                .hidden
                .iter()
                .map(|l| Linear {
                    weight: l.weight.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
            output: Linear {
                weight: self.output.weight.cast(),
                bias: self.output.bias.cast(),
            },
        }
    }
}

fn check_shape<T>(t: &ParamTensor<T>, shape: &[usize]) -> Result<()> {
    if t.shape != shape {
        return Err(Error::Shape(format!(
            "`{}` has shape {:?}, expected {shape:?}",
            t.name, t.shape
        )));
    }
    Ok(())
}
