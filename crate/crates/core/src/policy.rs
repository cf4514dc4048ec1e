//! Epsilon-greedy action selection.
//!
//! The propensity of arm 1 is `(1 - eps) * 1{<M1_hat - M0_hat, X> > 0} + eps/2`,
//! so it only ever takes the two values `eps/2` and `1 - eps/2`. Ties break to
//! the indicator being 0 (strict `>`).

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::frob_inner;

/// Exploration parameter for the epsilon-greedy rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub epsilon: f64,
}

impl PolicyConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie strictly in (0, 1), got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }
}

/// Propensity of arm 1 from the decision score `<M1_hat - M0_hat, X>`.
pub fn propensity_from_score(score: f64, epsilon: f64) -> Result<f64> {
    if !score.is_finite() {
        return Err(Error::NonFiniteScore);
    }
    Ok(if score > 0.0 {
        1.0 - epsilon / 2.0
    } else {
        epsilon / 2.0
    })
}

/// Propensity of arm 1 given dense estimates from the previous step.
pub fn propensity(
    m1_hat: &Array2<f64>,
    m0_hat: &Array2<f64>,
    x: &Array2<f64>,
    epsilon: f64,
) -> Result<f64> {
    let score = frob_inner(&m1_hat.view(), &x.view()) - frob_inner(&m0_hat.view(), &x.view());
    propensity_from_score(score, epsilon)
}

/// Draw the action: 1 with probability `pi`.
pub fn draw_action<R: Rng>(pi: f64, rng: &mut R) -> Result<usize> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(Error::InvalidParameter(format!(
            "propensity must lie in [0, 1], got {pi}"
        )));
    }
    Ok(usize::from(rng.random::<f64>() < pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn propensity_takes_exactly_two_values() {
        assert_eq!(propensity_from_score(2.0, 0.1).unwrap(), 0.95);
        assert_eq!(propensity_from_score(-1.0, 0.1).unwrap(), 0.05);
        // Tie breaks to the exploration value.
        assert_eq!(propensity_from_score(0.0, 0.3).unwrap(), 0.15);
        assert!(propensity_from_score(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn propensity_matches_dense_form_and_is_scale_invariant() {
        let m1 = array![[1.0, 0.0], [0.0, 1.0]];
        let m0 = array![[0.5, 0.0], [0.0, 0.5]];
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let p = propensity(&m1, &m0, &x, 0.1).unwrap();
        assert_eq!(p, 0.95);
        let scaled = &x * 17.0;
        assert_eq!(propensity(&m1, &m0, &scaled, 0.1).unwrap(), p);
    }

    #[test]
    fn degenerate_propensities_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(draw_action(1.0, &mut rng).unwrap(), 1);
            assert_eq!(draw_action(0.0, &mut rng).unwrap(), 0);
        }
        assert!(draw_action(1.5, &mut rng).is_err());
        assert!(draw_action(-0.1, &mut rng).is_err());
    }

    #[test]
    fn draw_frequency_matches_propensity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let ones: usize = (0..n)
            .map(|_| draw_action(0.95, &mut rng).unwrap())
            .sum();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.95).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn config_bounds() {
        assert!(PolicyConfig::new(0.0).is_err());
        assert!(PolicyConfig::new(1.0).is_err());
        assert!(PolicyConfig::new(0.1).is_ok());
    }
}
