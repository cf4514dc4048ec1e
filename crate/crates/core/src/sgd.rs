//! Online low-rank estimation: a factored SGD update with inverse propensity
//! weighting, renormalized each step through r x r SVDs of the factor Gram
//! matrices. The naive reference update (renormalize the iterate through a
//! full d1 x d2 SVD, then take the plain weighted gradient step) is kept as a
//! test oracle: both routes produce the same product trajectory.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{frob_inner, svd_jacobi, sym_eig_jacobi};

/// Relative floor under which a Gram eigenvalue counts as degenerate.
const GRAM_FLOOR: f64 = 1e-12;

/// Step-size schedule `eta_t = c * max(t, t_star)^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizeSchedule {
    pub c: f64,
    pub alpha: f64,
    pub t_star: usize,
}

impl StepSizeSchedule {
    pub fn new(c: f64, alpha: f64, t_star: usize) -> Result<Self> {
        if c <= 0.0 {
            return Err(Error::InvalidParameter(format!("step c must be > 0, got {c}")));
        }
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "step alpha must lie in (0.5, 1], got {alpha}"
            )));
        }
        if t_star == 0 {
            return Err(Error::InvalidParameter("t_star must be >= 1".into()));
        }
        Ok(Self { c, alpha, t_star })
    }

    /// Step size at 1-based time `t`.
    pub fn step_size(&self, t: usize) -> f64 {
        let t_eff = t.max(self.t_star) as f64;
        self.c * t_eff.powf(-self.alpha)
    }
}

/// Per-arm factor state; the current low-rank estimate is `u * v^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    /// d1 x r.
    pub u: Array2<f64>,
    /// d2 x r.
    pub v: Array2<f64>,
}

impl FactorPair {
    pub fn new(u: Array2<f64>, v: Array2<f64>) -> Result<Self> {
        if u.ncols() != v.ncols() {
            return Err(Error::InvalidDimensions(format!(
                "factor ranks differ: {} vs {}",
                u.ncols(),
                v.ncols()
            )));
        }
        Ok(Self { u, v })
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// Dense current estimate `u * v^T`.
    pub fn product(&self) -> Array2<f64> {
        self.u.dot(&self.v.t())
    }
}

/// Dense current estimate of a factor pair (`M_hat_sgd = U V^T`).
pub fn current_estimate(pair: &FactorPair) -> Array2<f64> {
    pair.product()
}

/// Renormalization byproducts of one step: eigenfactors of the two Gram
/// matrices and the singular factors of `D_u^{1/2} R_u^T R_v D_v^{1/2}`.
#[derive(Debug, Clone)]
pub struct SvdByproducts {
    pub r_u: Array2<f64>,
    pub d_u: Array1<f64>,
    pub r_v: Array2<f64>,
    pub d_v: Array1<f64>,
    pub q_u: Array2<f64>,
    pub q_v: Array2<f64>,
}

fn scale_columns(m: &Array2<f64>, s: &Array1<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for (mut col, &f) in out.columns_mut().into_iter().zip(s.iter()) {
        col.mapv_inplace(|x| x * f);
    }
    out
}

impl SvdByproducts {
    /// Decompose the Gram matrices of `pair` (the factors at time t-1).
    pub fn compute(pair: &FactorPair) -> Result<Self> {
        let gram_u = pair.u.t().dot(&pair.u);
        let gram_v = pair.v.t().dot(&pair.v);
        let (d_u, r_u) = sym_eig_jacobi(&gram_u.view())?;
        let (d_v, r_v) = sym_eig_jacobi(&gram_v.view())?;
        for (label, d) in [("U", &d_u), ("V", &d_v)] {
            let max = d[0].max(0.0);
            if max <= 0.0 || d.iter().any(|&x| x < GRAM_FLOOR * max) {
                return Err(Error::DegenerateFactor(format!(
                    "Gram matrix of {label} has an eigenvalue below the floor"
                )));
            }
        }
        let sqrt_u = d_u.mapv(f64::sqrt);
        let sqrt_v = d_v.mapv(f64::sqrt);
        // b = D_u^{1/2} R_u^T R_v D_v^{1/2}
        let mut b = r_u.t().dot(&r_v);
        for ((i, j), val) in b.indexed_iter_mut() {
            *val *= sqrt_u[i] * sqrt_v[j];
        }
        let svd = svd_jacobi(&b.view())?;
        Ok(Self {
            r_u,
            d_u,
            r_v,
            d_v,
            q_u: svd.u,
            q_v: svd.vt.t().to_owned(),
        })
    }

    /// Sandwich applied to the U-gradient:
    /// `R_v D_v^{-1/2} Q_v Q_u^T D_u^{1/2} R_u^T`.
    pub fn sandwich_u(&self) -> Array2<f64> {
        let left = scale_columns(&self.r_v, &self.d_v.mapv(|x| x.sqrt().recip()));
        let right = scale_columns(&self.r_u, &self.d_u.mapv(f64::sqrt));
        left.dot(&self.q_v).dot(&self.q_u.t()).dot(&right.t())
    }

    /// Sandwich applied to the V-gradient:
    /// `R_u D_u^{-1/2} Q_u Q_v^T D_v^{1/2} R_v^T`.
    pub fn sandwich_v(&self) -> Array2<f64> {
        let left = scale_columns(&self.r_u, &self.d_u.mapv(|x| x.sqrt().recip()));
        let right = scale_columns(&self.r_v, &self.d_v.mapv(f64::sqrt));
        left.dot(&self.q_u).dot(&self.q_v.t()).dot(&right.t())
    }

    /// Orthonormal basis `g` of the column space of `u` (so `g g^T` is the
    /// left projection): `g = u R_u D_u^{-1/2}`.
    pub fn basis_u(&self, pair: &FactorPair) -> Array2<f64> {
        pair.u.dot(&scale_columns(&self.r_u, &self.d_u.mapv(|x| x.sqrt().recip())))
    }

    /// Orthonormal basis of the column space of `v`.
    pub fn basis_v(&self, pair: &FactorPair) -> Array2<f64> {
        pair.v.dot(&scale_columns(&self.r_v, &self.d_v.mapv(|x| x.sqrt().recip())))
    }
}

/// Inverse propensity weight for arm `i`: `1 / (i*pi + (1-i)*(1-pi))`.
pub fn inverse_weight(arm: usize, pi: f64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::PropensityOutOfRange(pi));
    }
    Ok(if arm == 1 { pi.recip() } else { (1.0 - pi).recip() })
}

/// Dense projections `(P_u, P_v)` onto the column spaces of the factors at
/// time t-1, assembled from the step byproducts as
/// `P_u = u (R_u D_u^{-1} R_u^T) u^T` (and the V analogue). Equal to the
/// top-r singular-space projections of `u v^T` when both factors have full
/// column rank.
pub fn projections_from_byproducts(
    pair: &FactorPair,
    byproducts: &SvdByproducts,
) -> (Array2<f64>, Array2<f64>) {
    let gu = byproducts.basis_u(pair);
    let gv = byproducts.basis_v(pair);
    (gu.dot(&gu.t()), gv.dot(&gv.t()))
}

/// Apply the factored one-step update to the chosen arm's pair, given the
/// byproducts computed from the same (pre-update) pair.
pub fn apply_factored_update(
    pair: &mut FactorPair,
    byproducts: &SvdByproducts,
    x: &Array2<f64>,
    y: f64,
    arm: usize,
    pi: f64,
    eta: f64,
) -> Result<()> {
    let w = inverse_weight(arm, pi)?;
    let xv = x.dot(&pair.v);
    let resid = frob_inner(&pair.u.view(), &xv.view()) - y;
    let xu = x.t().dot(&pair.u);
    let coeff = eta * w * resid;
    let grad_u = xv.dot(&byproducts.sandwich_u());
    let grad_v = xu.dot(&byproducts.sandwich_v());
    pair.u.zip_mut_with(&grad_u, |u, g| *u -= coeff * g);
    pair.v.zip_mut_with(&grad_v, |v, g| *v -= coeff * g);
    Ok(())
}

/// One-step SGD update at time t. Only the chosen arm's factors change; the
/// returned byproducts describe that arm's factors at time t-1 and are reused
/// by the inference accumulators.
pub fn sgd_update(
    states: &mut [FactorPair; 2],
    x: &Array2<f64>,
    y: f64,
    a: usize,
    pi: f64,
    eta: f64,
) -> Result<SvdByproducts> {
    let byproducts = SvdByproducts::compute(&states[a])?;
    apply_factored_update(&mut states[a], &byproducts, x, y, a, pi, eta)?;
    Ok(byproducts)
}

/// Reference update: renormalize the chosen arm's iterate through a top-r SVD
/// of the dense product, then take the inverse-weighted gradient step on the
/// renormalized factors. Test oracle for the factored route.
pub fn naive_renormalized_update(
    states: &mut [FactorPair; 2],
    x: &Array2<f64>,
    y: f64,
    a: usize,
    pi: f64,
    eta: f64,
) -> Result<()> {
    let w = inverse_weight(a, pi)?;
    let r = states[a].rank();
    let product = states[a].product();
    let svd = svd_jacobi(&product.view())?;
    let sqrt_s = Array1::from_iter(svd.s.iter().take(r).map(|&s| s.max(0.0).sqrt()));
    let u_tilde = scale_columns(&svd.u.slice(ndarray::s![.., ..r]).to_owned(), &sqrt_s);
    let v_tilde = scale_columns(&svd.vt.slice(ndarray::s![..r, ..]).t().to_owned(), &sqrt_s);

    let resid = frob_inner(&u_tilde.dot(&v_tilde.t()).view(), &x.view()) - y;
    let coeff = eta * w * resid;
    let u_new = &u_tilde - &(x.dot(&v_tilde) * coeff);
    let v_new = &v_tilde - &(x.t().dot(&u_tilde) * coeff);
    states[a] = FactorPair::new(u_new, v_new)?;
    Ok(())
}
