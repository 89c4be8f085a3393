use rand::Rng;

use super::{Matrix, Scalar};
use crate::error::{Error, Result};

/// A named parameter tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Scalar> ParamTensor<T> {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            values: vec![T::zero(); len],
            grad: vec![T::zero(); len],
        }
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], values: Vec<T>) -> Result<Self> {
        let name = name.into();
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::Shape(format!(
                "{name}: {} values for shape {shape:?}",
                values.len()
            )));
        }
        Ok(Self {
            name,
            shape: shape.to_vec(),
            grad: vec![T::zero(); len],
            values,
        })
    }

    pub fn uniform<R: Rng + ?Sized>(
        name: impl Into<String>,
        shape: &[usize],
        bound: f64,
        rng: &mut R,
    ) -> Self {
        let mut t = Self::zeros(name, shape);
        for v in &mut t.values {
            *v = T::from_f64(rng.gen_range(-bound..=bound));
        }
        t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("values of `{}`", self.name)))
        }
    }

    /// Copies values into a tensor of another precision, with a cleared gradient.
    pub fn cast<U: Scalar>(&self) -> ParamTensor<U> {
        ParamTensor {
            name: self.name.clone(),
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
            grad: vec![U::zero(); self.values.len()],
        }
    }
}

/// Fully connected layer `y = x · W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: ParamTensor<T>,
    pub bias: ParamTensor<T>,
}

impl<T: Scalar> Linear<T> {
    /// Scaled-uniform (Glorot) weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(prefix: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self {
            weight: ParamTensor::uniform(format!("{prefix}.weight"), &[fan_in, fan_out], bound, rng),
            bias: ParamTensor::zeros(format!("{prefix}.bias"), &[fan_out]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape[1]
    }

    fn weight_matrix(&self) -> Matrix<T> {
        Matrix::from_vec(self.in_dim(), self.out_dim(), self.weight.values.clone())
    }

    pub fn forward(&self, x: &Matrix<T>) -> Matrix<T> {
        assert_eq!(x.cols(), self.in_dim(), "{}: input width", self.weight.name);
        let (b, n) = (x.rows(), self.out_dim());
        let mut out = Matrix::zeros(b, n);
        for r in 0..b {
            out.row_mut(r).copy_from_slice(&self.bias.values);
        }
        T::gemm(
            b,
            self.in_dim(),
            n,
            T::one(),
            x.as_slice(),
            false,
            &self.weight.values,
            false,
            T::one(),
            out.as_mut_slice(),
        );
        out
    }

    /// Accumulates parameter gradients for upstream `grad_out` and returns the input gradient.
    pub fn backward(&mut self, x: &Matrix<T>, grad_out: &Matrix<T>) -> Matrix<T> {
        self.accumulate_param_grads(x, grad_out);
        grad_out.matmul(false, &self.weight_matrix(), true)
    }

    /// Parameter half of [`Self::backward`], for layers fed by constants.
    pub fn accumulate_param_grads(&mut self, x: &Matrix<T>, grad_out: &Matrix<T>) {
        let (b, k, n) = (x.rows(), self.in_dim(), self.out_dim());
        assert_eq!(grad_out.rows(), b);
        assert_eq!(grad_out.cols(), n);
        T::gemm(
            k,
            b,
            n,
            T::one(),
            x.as_slice(),
            true,
            grad_out.as_slice(),
            false,
            T::one(),
            &mut self.weight.grad,
        );
        for row in grad_out.iter_rows() {
            for (g, &v) in self.bias.grad.iter_mut().zip(row) {
                *g = *g + v;
            }
        }
    }

    pub fn params(&self) -> [&ParamTensor<T>; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

pub fn relu_in_place<T: Scalar>(m: &mut Matrix<T>) {
    for v in m.as_mut_slice() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes gradient entries where the forward ReLU output was not positive.
pub fn relu_mask<T: Scalar>(grad: &mut Matrix<T>, activated: &Matrix<T>) {
    for (g, &a) in grad.as_mut_slice().iter_mut().zip(activated.as_slice()) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}
