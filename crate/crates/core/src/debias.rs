//! Online doubly-debiasing update: keeps the running average of the one-step
//! surrogates `M_tilde_{i,t} = M_sgd_{i,t-1} + w_i * (y - <M_sgd_{i,t-1}, X>) X`
//! for both arms. The surrogate removes both the low-rank truncation bias and
//! the adaptive-sampling bias; the average is unbiased but full-rank.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::frob_inner;
use crate::sgd::inverse_weight;

/// Running unbiased-estimator state per arm, after `t` averaged steps.
#[derive(Debug, Clone)]
pub struct UnbiasedState {
    m: [Array2<f64>; 2],
    t: usize,
}

impl UnbiasedState {
    /// Start from the initialization estimates; the first averaged step
    /// replaces them entirely (the average starts at t = 1).
    pub fn new(init: [Array2<f64>; 2]) -> Self {
        Self { m: init, t: 0 }
    }

    pub fn step_count(&self) -> usize {
        self.t
    }

    pub fn estimate(&self, arm: usize) -> &Array2<f64> {
        &self.m[arm]
    }

    /// One debiasing step using the SGD estimates from *before* this step's
    /// SGD update (time t-1). `inner` carries the precomputed inner products
    /// `<M_sgd_{i,t-1}, X>`.
    pub fn step_with_inner(
        &mut self,
        m_sgd_prev: &[Array2<f64>; 2],
        inner: [f64; 2],
        x: &Array2<f64>,
        y: f64,
        a: usize,
        pi: f64,
    ) -> Result<()> {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::PropensityOutOfRange(pi));
        }
        let t_new = (self.t + 1) as f64;
        let prev_weight = self.t as f64 / t_new;
        for i in 0..2 {
            if i == a {
                let w = inverse_weight(i, pi)?;
                let coeff = w * (y - inner[i]) / t_new;
                // m <- (t*m + m_sgd_prev + w*(y - <m_sgd_prev, X>) X) / (t+1)
                ndarray::Zip::from(&mut self.m[i])
                    .and(&m_sgd_prev[i])
                    .and(x)
                    .for_each(|m, &sgd, &xe| {
                        *m = prev_weight * *m + sgd / t_new + coeff * xe;
                    });
            } else {
                // Indicator is zero: the surrogate is just the biased estimate.
                ndarray::Zip::from(&mut self.m[i])
                    .and(&m_sgd_prev[i])
                    .for_each(|m, &sgd| {
                        *m = prev_weight * *m + sgd / t_new;
                    });
            }
        }
        self.t += 1;
        Ok(())
    }
}

/// One-step online debiasing update (computes the context inner products
/// itself; the harness uses [`UnbiasedState::step_with_inner`] to reuse them).
pub fn debias_step(
    state: &mut UnbiasedState,
    m_sgd_prev: &[Array2<f64>; 2],
    x: &Array2<f64>,
    y: f64,
    a: usize,
    pi: f64,
) -> Result<()> {
    let inner = [
        frob_inner(&m_sgd_prev[0].view(), &x.view()),
        frob_inner(&m_sgd_prev[1].view(), &x.view()),
    ];
    state.step_with_inner(m_sgd_prev, inner, x, y, a, pi)
}

/// Plain arithmetic mean of surrogates; oracle for the streaming average.
pub fn batch_average_oracle(surrogates: &[Array2<f64>]) -> Result<Array2<f64>> {
    let first = surrogates.first().ok_or(Error::EmptyBatch)?;
    let mut sum = Array2::<f64>::zeros(first.dim());
    for m in surrogates {
        sum += m;
    }
    Ok(sum / surrogates.len() as f64)
}
