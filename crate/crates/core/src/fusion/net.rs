use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensornet::{relu_in_place, relu_mask, Linear, Matrix, ParamTensor, Scalar};
use crate::towers::{triplet_loss, triplet_loss_grad, LossKind};

/// Max-subtracted softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Per-channel representations of a batch of triplets: `users[r]` is `B x d` and holds
/// `g^(r)(u)` for every triplet, likewise `pos` and `neg`.
#[derive(Debug, Clone)]
pub struct ChannelBatch<T> {
    pub users: Vec<Matrix<T>>,
    pub pos: Vec<Matrix<T>>,
    pub neg: Vec<Matrix<T>>,
}

impl<T: Scalar> ChannelBatch<T> {
    pub fn len(&self) -> usize {
        self.users.first().map_or(0, Matrix::rows)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Forward quantities of one batch.
#[derive(Debug, Clone)]
pub struct BlendOutput<T> {
    /// `B x R` attention weights.
    pub weights: Vec<Vec<f64>>,
    pub user_blend: Matrix<T>,
    pub pos_blend: Matrix<T>,
    pub neg_blend: Matrix<T>,
    transformed_users: Vec<Matrix<T>>,
    transformed_pos: Vec<Matrix<T>>,
}

/// The trainable part of the attention: one `f^(r)(x) = ReLU(x W_r + b_r)` per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionNet<T> {
    pub transforms: Vec<Linear<T>>,
}

impl<T: Scalar> AttentionNet<T> {
    pub fn new(channels: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            transforms: (0..channels)
                .map(|r| Linear::glorot(&format!("attn{r}"), dim, dim, &mut rng))
                .collect(),
        }
    }

    pub fn channel_count(&self) -> usize {
        self.transforms.len()
    }

    pub fn dim(&self) -> usize {
        self.transforms.first().map_or(0, Linear::out_dim)
    }

    pub fn params(&self) -> Vec<&ParamTensor<T>> {
        self.transforms.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        self.transforms.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn cast<U: Scalar>(&self) -> AttentionNet<U> {
        AttentionNet {
            transforms: self
                .transforms
                .iter()
                .map(|l| Linear {
                    weight: l.weight.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
        }
    }

    /// `f^(r)` applied to every row of `x`.
    pub fn transform_rows(&self, r: usize, x: &Matrix<T>) -> Result<Matrix<T>> {
        let layer = self
            .transforms
            .get(r)
            .ok_or(Error::OutOfRange { index: r, size: self.channel_count() })?;
        if x.cols() != layer.in_dim() {
            return Err(Error::Shape(format!(
                "channel {r} expects width {}, got {}",
                layer.in_dim(),
                x.cols()
            )));
        }
        let mut y = layer.forward(x);
        relu_in_place(&mut y);
        Ok(y)
    }

    pub fn transform(&self, r: usize, x: &[T]) -> Result<Vec<T>> {
        Ok(self.transform_rows(r, &Matrix::from_vec(1, x.len(), x.to_vec()))?.into_vec())
    }

    fn check(&self, batch: &ChannelBatch<T>) -> Result<()> {
        let r = self.channel_count();
        if batch.users.len() != r || batch.pos.len() != r || batch.neg.len() != r {
            return Err(Error::Shape(format!("batch has the wrong number of channels (expected {r})")));
        }
        let (b, d) = (batch.len(), self.dim());
        for m in batch.users.iter().chain(&batch.pos).chain(&batch.neg) {
            if m.rows() != b || m.cols() != d {
                return Err(Error::Shape(format!("channel block is {}x{}, expected {b}x{d}", m.rows(), m.cols())));
            }
        }
        Ok(())
    }

    /// Weights from `(user, positive)` compatibilities; the same weights blend all three
    /// slots.
    pub fn forward(&self, batch: &ChannelBatch<T>) -> Result<BlendOutput<T>> {
        self.check(batch)?;
        let (b, d, rc) = (batch.len(), self.dim(), self.channel_count());
        let mut tu = Vec::with_capacity(rc);
        let mut tp = Vec::with_capacity(rc);
        for r in 0..rc {
            tu.push(self.transform_rows(r, &batch.users[r])?);
            tp.push(self.transform_rows(r, &batch.pos[r])?);
        }
        let mut weights = Vec::with_capacity(b);
        let mut ub = Matrix::zeros(b, d);
        let mut pb = Matrix::zeros(b, d);
        let mut nb = Matrix::zeros(b, d);
        let mut acc = vec![0.0f64; 3 * d];
        for row in 0..b {
            let compat: Vec<f64> = (0..rc)
                .map(|r| crate::tensornet::dot(tu[r].row(row), tp[r].row(row)))
                .collect();
            let alpha = softmax(&compat);
            acc.iter_mut().for_each(|v| *v = 0.0);
            for (r, &a) in alpha.iter().enumerate() {
                let (u, p, n) = (batch.users[r].row(row), batch.pos[r].row(row), batch.neg[r].row(row));
                for j in 0..d {
                    acc[j] += a * u[j].to_f64();
                    acc[d + j] += a * p[j].to_f64();
                    acc[2 * d + j] += a * n[j].to_f64();
                }
            }
            for j in 0..d {
                ub.row_mut(row)[j] = T::from_f64(acc[j]);
                pb.row_mut(row)[j] = T::from_f64(acc[d + j]);
                nb.row_mut(row)[j] = T::from_f64(acc[2 * d + j]);
            }
            weights.push(alpha);
        }
        Ok(BlendOutput {
            weights,
            user_blend: ub,
            pos_blend: pb,
            neg_blend: nb,
            transformed_users: tu,
            transformed_pos: tp,
        })
    }

    /// Mean triplet loss of the blended representations.
    pub fn objective(&self, batch: &ChannelBatch<T>, kind: LossKind, margin: f64) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let out = self.forward(batch)?;
        let total: f64 = (0..batch.len())
            .map(|r| triplet_loss(kind, margin, out.user_blend.row(r), out.pos_blend.row(r), out.neg_blend.row(r)))
            .sum();
        Ok(total / batch.len() as f64)
    }

    /// Accumulates gradients of [`Self::objective`] into the transform tensors and
    /// returns the objective.
    pub fn accumulate(&mut self, batch: &ChannelBatch<T>, kind: LossKind, margin: f64) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let out = self.forward(batch)?;
        let (b, d, rc) = (batch.len(), self.dim(), self.channel_count());
        let scale = 1.0 / b as f64;
        let mut gu = vec![T::zero(); d];
        let mut gp = vec![T::zero(); d];
        let mut gn = vec![T::zero(); d];
        let mut grad_tu: Vec<Matrix<T>> = (0..rc).map(|_| Matrix::zeros(b, d)).collect();
        let mut grad_tp: Vec<Matrix<T>> = (0..rc).map(|_| Matrix::zeros(b, d)).collect();
        let mut total = 0.0;
        for row in 0..b {
            total += triplet_loss_grad(
                kind,
                margin,
                out.user_blend.row(row),
                out.pos_blend.row(row),
                out.neg_blend.row(row),
                scale,
                &mut gu,
                &mut gp,
                &mut gn,
            );
            let alpha = &out.weights[row];
            // dℓ/dα_r through the three blends
            let dalpha: Vec<f64> = (0..rc)
                .map(|r| {
                    crate::tensornet::dot(&gu, batch.users[r].row(row))
                        + crate::tensornet::dot(&gp, batch.pos[r].row(row))
                        + crate::tensornet::dot(&gn, batch.neg[r].row(row))
                })
                .collect();
            let mean: f64 = alpha.iter().zip(&dalpha).map(|(a, g)| a * g).sum();
            for r in 0..rc {
                let dc = alpha[r] * (dalpha[r] - mean);
                if dc == 0.0 {
                    continue;
                }
                let (tu, tp) = (out.transformed_users[r].row(row), out.transformed_pos[r].row(row));
                let gtu = grad_tu[r].row_mut(row);
                for j in 0..d {
                    gtu[j] = T::from_f64(dc * tp[j].to_f64());
                }
                let gtp = grad_tp[r].row_mut(row);
                for j in 0..d {
                    gtp[j] = T::from_f64(dc * tu[j].to_f64());
                }
            }
        }
        for r in 0..rc {
            relu_mask(&mut grad_tu[r], &out.transformed_users[r]);
            relu_mask(&mut grad_tp[r], &out.transformed_pos[r]);
            self.transforms[r].accumulate_param_grads(&batch.users[r], &grad_tu[r]);
            self.transforms[r].accumulate_param_grads(&batch.pos[r], &grad_tp[r]);
        }
        Ok(total * scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_basics() {
        let w = softmax(&[3.0; 4]);
        assert!(w.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let w = softmax(&[1.0, -39.0, -39.0, -39.0]);
        assert!(w[0] > 1.0 - 1e-15);
        let w = softmax(&[1e4, 0.0]);
        assert!(w.iter().all(|v| v.is_finite()));
    }

    fn random_batch(rc: usize, b: usize, d: usize, seed: u64) -> ChannelBatch<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut block = || Matrix::from_vec(b, d, (0..b * d).map(|_| rng.gen_range(-1.0..1.0)).collect());
        ChannelBatch {
            users: (0..rc).map(|_| block()).collect(),
            pos: (0..rc).map(|_| block()).collect(),
            neg: (0..rc).map(|_| block()).collect(),
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in [LossKind::Product, LossKind::Distance] {
            let batch = random_batch(2, 6, 8, 3);
            let mut net = AttentionNet::<f64>::new(2, 8, 11);
            // Larger weights make the softmax non-trivial.
            for p in net.params_mut() {
                p.values.iter_mut().for_each(|v| *v *= 3.0);
            }
            net.accumulate(&batch, kind, 0.5).unwrap();
            let h = 1e-6;
            let n_params = net.params().len();
            for t in 0..n_params {
                for k in 0..net.params()[t].values.len() {
                    let analytic = net.params()[t].grad[k];
                    let mut plus = net.clone();
                    plus.params_mut()[t].values[k] += h;
                    let mut minus = net.clone();
                    minus.params_mut()[t].values[k] -= h;
                    let numeric =
                        (plus.objective(&batch, kind, 0.5).unwrap() - minus.objective(&batch, kind, 0.5).unwrap()) / (2.0 * h);
                    assert!(
                        (analytic - numeric).abs() <= 1e-6 * (1.0 + numeric.abs()),
                        "{kind:?} tensor {t} entry {k}: {analytic} vs {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn identity_and_zero_transforms() {
        let mut net = AttentionNet::<f64>::new(2, 3, 0);
        let l = &mut net.transforms[0];
        l.weight.values = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        l.bias.values = vec![0.0; 3];
        assert_eq!(net.transform(0, &[0.5, 0.0, 2.0]).unwrap(), vec![0.5, 0.0, 2.0]);
        let l = &mut net.transforms[1];
        l.weight.values = vec![0.0; 9];
        l.bias.values = vec![-1.0, 0.5, 2.0];
        assert_eq!(net.transform(1, &[7.0, 8.0, 9.0]).unwrap(), vec![0.0, 0.5, 2.0]);
        assert!(net.transform(2, &[0.0; 3]).is_err());
        assert!(net.transform(0, &[0.0; 2]).is_err());
    }
}
