//! Adam with bias-corrected moment estimates.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::tensor::Tensor;

pub const DEFAULT_LR: f64 = 1e-3;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
        }
    }
}

/// Optimizer state for an ordered list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    /// Number of completed steps.
    pub t: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    /// Zeroed moments shaped like `params`.
    pub fn new<'a>(hyper: AdamHyper, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let (m, v) = params
            .into_iter()
            .map(|p| (Tensor::zeros(p.shape()), Tensor::zeros(p.shape())))
            .unzip();
        Self { hyper, t: 0, m, v }
    }

    pub fn with_lr<'a>(lr: f64, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        Self::new(
            AdamHyper {
                lr,
                ..AdamHyper::default()
            },
            params,
        )
    }

    /// One update of every parameter. `t` is incremented before the bias
    /// correction, so the first call uses `t = 1`.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            bail!(
                InvalidShape,
                "adam tracks {} parameters, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            );
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                bail!(
                    InvalidShape,
                    "parameter {:?}, gradient {:?}, moment {:?} disagree",
                    p.shape(),
                    g.shape(),
                    m.shape()
                );
            }
        }
        self.t += 1;
        let AdamHyper { lr, beta1, beta2, eps } = self.hyper;
        let t = self.t as f64;
        let c1 = 1.0 - libm::pow(beta1, t);
        let c2 = 1.0 - libm::pow(beta2, t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn first_step_closed_form() {
        let mut p = vec![Tensor::scalar(0.0)];
        let mut adam = AdamState::new(AdamHyper::default(), &p);
        adam.step(&mut p, &[Tensor::scalar(1.0)]).unwrap();
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p[0].data()[0] - expected).abs() < 1e-15);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn zero_gradient_is_noop() {
        let init = Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap();
        let mut p = vec![init.clone()];
        let mut adam = AdamState::new(AdamHyper::default(), &p);
        for _ in 0..5 {
            adam.step(&mut p, &[Tensor::zeros(&[3])]).unwrap();
        }
        assert_eq!(p[0], init);
    }

    #[test]
    fn two_steps_match_scalar_recurrence() {
        // Hand-rolled recurrence with g = 1 on both steps.
        let (lr, b1, b2, eps) = (1e-3, 0.9, 0.999, 1e-8);
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.25f64);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1);
            v = b2 * v + (1.0 - b2);
            let mh = m / (1.0 - libm::pow(b1, t as f64));
            let vh = v / (1.0 - libm::pow(b2, t as f64));
            x -= lr * mh / (libm::sqrt(vh) + eps);
        }
        let mut p = vec![Tensor::scalar(0.25)];
        let mut adam = AdamState::new(AdamHyper::default(), &p);
        adam.step(&mut p, &[Tensor::scalar(1.0)]).unwrap();
        adam.step(&mut p, &[Tensor::scalar(1.0)]).unwrap();
        assert!((p[0].data()[0] - x).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![Tensor::zeros(&[2])];
        let mut adam = AdamState::new(AdamHyper::default(), &p);
        assert!(adam.step(&mut p, &[Tensor::zeros(&[3])]).is_err());
        assert_eq!(adam.t, 0);
    }
}
