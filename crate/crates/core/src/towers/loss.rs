use serde::{Deserialize, Serialize};

use crate::tensornet::{dot, squared_distance, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `-ln σ(<u,i+> - <u,i->)`
    Product,
    /// `max(0, |u-i+|² - |u-i-|² + margin)`
    Distance,
}

impl LossKind {
    pub fn letter(self) -> char {
        match self {
            LossKind::Product => 'P',
            LossKind::Distance => 'D',
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Product => "product",
            LossKind::Distance => "distance",
        })
    }
}

impl std::str::FromStr for LossKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "product" => Ok(LossKind::Product),
            "distance" => Ok(LossKind::Distance),
            other => Err(crate::Error::Format(format!("unknown loss kind `{other}`"))),
        }
    }
}

/// `ln(1 + e^{-x})` without overflow.
pub fn softplus_neg(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn product_loss<T: Scalar>(u: &[T], pos: &[T], neg: &[T]) -> f64 {
    softplus_neg(dot(u, pos) - dot(u, neg))
}

pub fn distance_loss<T: Scalar>(u: &[T], pos: &[T], neg: &[T], margin: f64) -> f64 {
    (squared_distance(u, pos) - squared_distance(u, neg) + margin).max(0.0)
}

pub fn triplet_loss<T: Scalar>(kind: LossKind, margin: f64, u: &[T], pos: &[T], neg: &[T]) -> f64 {
    match kind {
        LossKind::Product => product_loss(u, pos, neg),
        LossKind::Distance => distance_loss(u, pos, neg, margin),
    }
}

/// Loss value; writes `scale * dℓ/d(·)` into the three gradient slices (overwriting).
#[allow(clippy::too_many_arguments)]
pub fn triplet_loss_grad<T: Scalar>(
    kind: LossKind,
    margin: f64,
    u: &[T],
    pos: &[T],
    neg: &[T],
    scale: f64,
    grad_u: &mut [T],
    grad_pos: &mut [T],
    grad_neg: &mut [T],
) -> f64 {
    match kind {
        LossKind::Product => {
            let x = dot(u, pos) - dot(u, neg);
            // dℓ/dx = -σ(-x)
            let c = -sigmoid(-x) * scale;
            for j in 0..u.len() {
                let (uj, pj, nj) = (u[j].to_f64(), pos[j].to_f64(), neg[j].to_f64());
                grad_u[j] = T::from_f64(c * (pj - nj));
                grad_pos[j] = T::from_f64(c * uj);
                grad_neg[j] = T::from_f64(-c * uj);
            }
            softplus_neg(x)
        }
        LossKind::Distance => {
            let z = squared_distance(u, pos) - squared_distance(u, neg) + margin;
            if z > 0.0 {
                let c = 2.0 * scale;
                for j in 0..u.len() {
                    let (uj, pj, nj) = (u[j].to_f64(), pos[j].to_f64(), neg[j].to_f64());
                    grad_u[j] = T::from_f64(c * (nj - pj));
                    grad_pos[j] = T::from_f64(-c * (uj - pj));
                    grad_neg[j] = T::from_f64(c * (uj - nj));
                }
                z
            } else {
                for g in grad_u.iter_mut().chain(grad_pos.iter_mut()).chain(grad_neg.iter_mut()) {
                    *g = T::zero();
                }
                0.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_loss_examples() {
        let u = [1.0f64, 0.0];
        let a = [0.3f64, 0.7];
        assert!((product_loss(&u, &a, &a) - std::f64::consts::LN_2).abs() < 1e-12);
        // margin of +20 between the two dot products
        let p = [20.0f64, 0.0];
        let n = [0.0f64, 0.0];
        let l = product_loss(&u, &p, &n);
        // ln(1 + e) = e - e²/2 + O(e³)
        let e = (-20.0f64).exp();
        let oracle = e - e * e / 2.0;
        assert!((l - oracle).abs() / oracle < 1e-12, "{l}");
        assert!((l - 2.06e-9).abs() < 0.01e-9);
        // very negative margin does not overflow
        assert!((product_loss(&u, &n, &[800.0, 0.0]) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn distance_loss_examples() {
        let u = [0.0f64, 0.0];
        let a = [1.0f64, 0.0];
        let b = [0.0f64, 1.0];
        assert_eq!(distance_loss(&u, &a, &b, 0.5), 0.5);
        let l = distance_loss(&[1.0f64, 0.0], &[0.0, 1.0], &[-1.0, 0.0], 0.5);
        assert_eq!(l, 0.0);
    }

    #[test]
    fn inactive_hinge_has_exactly_zero_gradient() {
        let (u, p, n) = ([1.0f64, 0.0], [0.0f64, 1.0], [-1.0f64, 0.0]);
        let mut g = [[9.0f64; 2]; 3];
        let [gu, gp, gn] = &mut g;
        let l = triplet_loss_grad(LossKind::Distance, 0.5, &u, &p, &n, 1.0, gu, gp, gn);
        assert_eq!(l, 0.0);
        assert!(g.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let u = [0.3f64, -0.2, 0.9, 0.1];
        let p = [0.5f64, 0.1, -0.4, 0.2];
        let n = [-0.1f64, 0.6, 0.3, -0.7];
        for kind in [LossKind::Product, LossKind::Distance] {
            let mut g = [[0.0f64; 4]; 3];
            {
                let [gu, gp, gn] = &mut g;
                triplet_loss_grad(kind, 0.5, &u, &p, &n, 1.0, gu, gp, gn);
            }
            let h = 1e-4;
            for which in 0..3 {
                for j in 0..4 {
                    let mut vs = [u, p, n];
                    vs[which][j] += h;
                    let up = triplet_loss(kind, 0.5, &vs[0], &vs[1], &vs[2]);
                    vs[which][j] -= 2.0 * h;
                    let dn = triplet_loss(kind, 0.5, &vs[0], &vs[1], &vs[2]);
                    let fd = (up - dn) / (2.0 * h);
                    let an = g[which][j];
                    let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                    assert!(rel < 1e-4, "{kind} arg {which} coord {j}: {an} vs {fd}");
                }
            }
        }
    }
}
