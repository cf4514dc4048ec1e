//! Synthetic two-arm environment: low-rank ground-truth parameters, Gaussian
//! matrix contexts, and noisy linear rewards.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{frob_inner, frob_norm, thin_qr_positive};

/// Parameters of one arm: an orthonormal factor pair, its singular values,
/// the per-arm noise level, and the assembled dense matrix.
#[derive(Debug, Clone)]
pub struct ArmTruth {
    /// d1 x r, orthonormal columns.
    pub u: Array2<f64>,
    /// d2 x r, orthonormal columns.
    pub v: Array2<f64>,
    /// Singular values, positive and descending.
    pub lambda: Array1<f64>,
    /// Noise standard deviation for rewards of this arm.
    pub sigma: f64,
    /// Cached dense parameter `u * diag(lambda) * v^T`.
    pub m: Array2<f64>,
}

/// True model parameters for both arms. Immutable after construction and
/// safe to share across trial workers.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub d1: usize,
    pub d2: usize,
    pub r: usize,
    pub arms: [ArmTruth; 2],
}

fn assemble(u: &Array2<f64>, lambda: &Array1<f64>, v: &Array2<f64>) -> Array2<f64> {
    let scaled = {
        let mut s = u.clone();
        for (mut col, &l) in s.columns_mut().into_iter().zip(lambda.iter()) {
            col.mapv_inplace(|x| x * l);
        }
        s
    };
    scaled.dot(&v.t())
}

fn gaussian_matrix<R: Rng>(d1: usize, d2: usize, rng: &mut R) -> Array2<f64> {
    let data: Vec<f64> = (0..d1 * d2)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Array2::from_shape_vec((d1, d2), data).expect("shape matches data length")
}

fn orthonormal_factor<R: Rng>(d: usize, r: usize, rng: &mut R) -> Result<Array2<f64>> {
    let g = gaussian_matrix(d, r, rng);
    let (q, _) = thin_qr_positive(&g.view())?;
    Ok(q)
}

fn validate_singular_values(sv: &[f64], r: usize, arm: usize) -> Result<()> {
    if sv.len() != r {
        return Err(Error::InvalidParameter(format!(
            "arm {arm}: expected {r} singular values, got {}",
            sv.len()
        )));
    }
    for w in sv.windows(2) {
        if w[0] < w[1] {
            return Err(Error::InvalidParameter(format!(
                "arm {arm}: singular values must be descending"
            )));
        }
    }
    if sv.last().is_some_and(|&x| x <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "arm {arm}: singular values must be positive"
        )));
    }
    Ok(())
}

/// Generate ground truth with per-arm singular spectra. The singular spaces
/// come from the QR of independent standard Gaussian matrices, so the two
/// arms have independent subspaces.
pub fn generate_ground_truth<R: Rng>(
    d1: usize,
    d2: usize,
    r: usize,
    singular_values_0: &[f64],
    singular_values_1: &[f64],
    sigma_0: f64,
    sigma_1: f64,
    rng: &mut R,
) -> Result<GroundTruth> {
    if r == 0 || r > d1.min(d2) {
        return Err(Error::InvalidDimensions(format!(
            "rank {r} incompatible with {d1} x {d2}"
        )));
    }
    validate_singular_values(singular_values_0, r, 0)?;
    validate_singular_values(singular_values_1, r, 1)?;
    if sigma_0 < 0.0 || sigma_1 < 0.0 {
        return Err(Error::InvalidParameter("noise sigma must be >= 0".into()));
    }

    let lambda0 = Array1::from_vec(singular_values_0.to_vec());
    let lambda1 = Array1::from_vec(singular_values_1.to_vec());

    let u0 = orthonormal_factor(d1, r, rng)?;
    let mut v0 = orthonormal_factor(d2, r, rng)?;
    let u1 = orthonormal_factor(d1, r, rng)?;
    let v1 = orthonormal_factor(d2, r, rng)?;

    let m1 = assemble(&u1, &lambda1, &v1);
    let mut m0 = assemble(&u0, &lambda0, &v0);
    // The arms must differ; a collision is a probability-zero event but the
    // continuous-mapping argument behind the variance formula needs M0 != M1.
    while {
        let diff = &m0 - &m1;
        frob_norm(&diff.view()) == 0.0
    } {
        v0 = orthonormal_factor(d2, r, rng)?;
        m0 = assemble(&u0, &lambda0, &v0);
    }

    Ok(GroundTruth {
        d1,
        d2,
        r,
        arms: [
            ArmTruth {
                u: u0,
                v: v0,
                lambda: lambda0,
                sigma: sigma_0,
                m: m0,
            },
            ArmTruth {
                u: u1,
                v: v1,
                lambda: lambda1,
                sigma: sigma_1,
                m: m1,
            },
        ],
    })
}

impl GroundTruth {
    /// Mean reward `<M_a, X>` of arm `a` for context `x`.
    pub fn mean_reward(&self, a: usize, x: &Array2<f64>) -> f64 {
        frob_inner(&self.arms[a].m.view(), &x.view())
    }

    /// True linear form `<M_i, T>` for a dense contrast matrix.
    pub fn linear_form(&self, arm: usize, t: &Array2<f64>) -> f64 {
        frob_inner(&self.arms[arm].m.view(), &t.view())
    }
}

/// One observed interaction of the bandit loop.
#[derive(Debug, Clone)]
pub struct Observation {
    /// 1-based step index.
    pub t: usize,
    pub x: Array2<f64>,
    /// Propensity of choosing arm 1 given the context.
    pub pi: f64,
    /// Chosen arm, 0 or 1.
    pub a: usize,
    /// Observed reward.
    pub y: f64,
}

/// Context matrix with i.i.d. standard Gaussian entries.
pub fn sample_context<R: Rng>(d1: usize, d2: usize, rng: &mut R) -> Array2<f64> {
    gaussian_matrix(d1, d2, rng)
}

/// Realized reward for arm `a`: `y = <M_a, X> + xi` with `xi ~ N(0, sigma_a^2)`
/// drawn after the action. Returns `(y, xi)`.
pub fn realize_reward<R: Rng>(
    truth: &GroundTruth,
    x: &Array2<f64>,
    a: usize,
    rng: &mut R,
) -> (f64, f64) {
    debug_assert!(a < 2);
    let z: f64 = StandardNormal.sample(rng);
    let xi = truth.arms[a].sigma * z;
    (truth.mean_reward(a, x) + xi, xi)
}
