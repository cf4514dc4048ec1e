//! Offline random-exploration phase and the nuclear-norm-penalized
//! initializer: proximal gradient on the least-squares loss with
//! singular-value soft-thresholding, then a balanced square-root split of the
//! top-r SVD into starting factors.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::svd_jacobi;
use crate::model::{realize_reward, sample_context, GroundTruth};
use crate::sgd::FactorPair;

/// Offline data gathered under uniform-random actions, routed per arm.
#[derive(Debug, Clone)]
pub struct OfflineBatch {
    pub per_arm: [Vec<(Array2<f64>, f64)>; 2],
}

impl OfflineBatch {
    pub fn count(&self, arm: usize) -> usize {
        self.per_arm[arm].len()
    }
}

/// Pure exploration: `n0` steps with `a ~ Ber(1/2)` independent of the context.
pub fn collect_offline<R: Rng>(truth: &GroundTruth, n0: usize, rng: &mut R) -> Result<OfflineBatch> {
    if n0 == 0 {
        return Err(Error::InvalidParameter("offline phase needs n0 >= 1".into()));
    }
    let mut per_arm: [Vec<(Array2<f64>, f64)>; 2] = [Vec::new(), Vec::new()];
    for _ in 0..n0 {
        let x = sample_context(truth.d1, truth.d2, rng);
        let a = usize::from(rng.random::<f64>() < 0.5);
        let (y, _) = realize_reward(truth, &x, a, rng);
        per_arm[a].push((x, y));
    }
    Ok(OfflineBatch { per_arm })
}

/// Result of the nuclear-norm fit.
#[derive(Debug, Clone)]
pub struct NuclearNormFit {
    pub matrix: Array2<f64>,
    pub iterations: usize,
    /// False when the successive-iterate tolerance was not reached within
    /// `max_iter`; the estimate is still usable.
    pub converged: bool,
    /// Objective value at each iterate (data term plus penalty), starting
    /// from the zero initializer. Non-increasing for a valid step size.
    pub objectives: Vec<f64>,
}

/// Flattened design: rows are vectorized contexts, stored contiguously so
/// the gradient is a single streaming pass (the forward product and the
/// transposed accumulation touch each row while it is still in cache).
struct Design {
    rows: Vec<f64>,
    y: Vec<f64>,
    dim: usize,
}

impl Design {
    fn from_batch(batch: &[(Array2<f64>, f64)], d1: usize, d2: usize) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let dim = d1 * d2;
        let mut rows = Vec::with_capacity(batch.len() * dim);
        let mut y = Vec::with_capacity(batch.len());
        for (k, (x, yk)) in batch.iter().enumerate() {
            if x.dim() != (d1, d2) {
                return Err(Error::InvalidDimensions(format!(
                    "context {k} has shape {:?}, expected ({d1}, {d2})",
                    x.dim()
                )));
            }
            rows.extend(x.iter());
            y.push(*yk);
        }
        Ok(Self { rows, y, dim })
    }

    fn n(&self) -> f64 {
        self.y.len() as f64
    }

    /// One pass: writes the unnormalized gradient `sum r_k X_k` into `grad`
    /// and returns the residual sum of squares at `m`.
    fn gradient_pass(&self, m: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut sse = 0.0;
        for (k, row) in self.rows.chunks_exact(self.dim).enumerate() {
            let mut p = 0.0;
            for (a, b) in row.iter().zip(m.iter()) {
                p += a * b;
            }
            let r = p - self.y[k];
            sse += r * r;
            for (g, a) in grad.iter_mut().zip(row.iter()) {
                *g += r * a;
            }
        }
        sse
    }

    /// Hessian-vector product `(1/n) sum <X_k, v> X_k` of the quadratic loss.
    fn hessian_apply(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for row in self.rows.chunks_exact(self.dim) {
            let mut p = 0.0;
            for (a, b) in row.iter().zip(v.iter()) {
                p += a * b;
            }
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += p * a;
            }
        }
        let n = self.n();
        for o in out.iter_mut() {
            *o /= n;
        }
    }

    /// Largest Hessian eigenvalue by power iteration, with a safety factor so
    /// the fixed step `1/L` stays conservative.
    fn lipschitz(&self) -> f64 {
        let mut v = vec![0.0; self.dim];
        for (k, row) in self.rows.chunks_exact(self.dim).enumerate() {
            for (dst, a) in v.iter_mut().zip(row.iter()) {
                *dst += self.y[k] * a;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v.fill(1.0);
        }
        let mut hv = vec![0.0; self.dim];
        let mut lambda = 1.0;
        for _ in 0..40 {
            self.hessian_apply(&v, &mut hv);
            lambda = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if lambda == 0.0 {
                return 1.0;
            }
            for (dst, src) in v.iter_mut().zip(hv.iter()) {
                *dst = src / lambda;
            }
        }
        lambda * 1.05
    }
}

/// Singular-value soft-thresholding: shrink every singular value by `tau`,
/// flooring at zero.
pub fn soft_threshold_singular_values(m: &Array2<f64>, tau: f64) -> Result<Array2<f64>> {
    let svd = svd_jacobi(&m.view())?;
    let k = svd.s.len();
    let mut out = Array2::<f64>::zeros(m.dim());
    for j in 0..k {
        let s = svd.s[j] - tau;
        if s <= 0.0 {
            continue;
        }
        for row in 0..m.nrows() {
            let c = s * svd.u[[row, j]];
            for col in 0..m.ncols() {
                out[[row, col]] += c * svd.vt[[j, col]];
            }
        }
    }
    Ok(out)
}

/// Approximate minimizer of
/// `(1/(2 n0)) sum (y_k - <M, X_k>)^2 + lambda |M|_*`
/// by proximal gradient with a fixed step `1/L`, stopping when the
/// successive-iterate Frobenius change drops below `tol`.
pub fn nuclear_norm_estimate(
    batch_arm: &[(Array2<f64>, f64)],
    d1: usize,
    d2: usize,
    lambda_reg: f64,
    max_iter: usize,
    tol: f64,
) -> Result<NuclearNormFit> {
    if lambda_reg < 0.0 {
        return Err(Error::InvalidParameter("lambda must be >= 0".into()));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
    }
    let design = Design::from_batch(batch_arm, d1, d2)?;
    let step = design.lipschitz().recip();
    let n = design.n();

    let mut m_flat = vec![0.0; d1 * d2];
    let mut grad = vec![0.0; d1 * d2];
    let mut nuclear = 0.0;
    let mut objectives = Vec::with_capacity(max_iter + 1);
    let mut iterations = 0;
    let mut converged = false;
    // Right singular basis from the previous iterate; successive proximal
    // iterates are close, so the warm-started SVD converges in a sweep or two.
    let mut warm: Option<Array2<f64>> = None;

    for _ in 0..max_iter {
        let sse = design.gradient_pass(&m_flat, &mut grad);
        objectives.push(sse / (2.0 * n) + lambda_reg * nuclear);
        let z = Array2::from_shape_vec(
            (d1, d2),
            m_flat
                .iter()
                .zip(grad.iter())
                .map(|(m, g)| m - step * g / n)
                .collect(),
        )
        .expect("shape matches length");
        let svd = if d1 >= d2 {
            let out = crate::linalg::svd_jacobi_warm(&z.view(), warm.as_ref())?;
            warm = Some(out.vt.t().to_owned());
            out
        } else {
            svd_jacobi(&z.view())?
        };
        let shrunk: Vec<f64> = svd.s.iter().map(|&s| (s - lambda_reg * step).max(0.0)).collect();
        nuclear = shrunk.iter().sum();
        let mut next = Array2::<f64>::zeros((d1, d2));
        for (j, &s) in shrunk.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for row in 0..d1 {
                let c = s * svd.u[[row, j]];
                for col in 0..d2 {
                    next[[row, col]] += c * svd.vt[[j, col]];
                }
            }
        }
        let mut change = 0.0;
        for (dst, src) in m_flat.iter_mut().zip(next.iter()) {
            change += (*src - *dst) * (*src - *dst);
            *dst = *src;
        }
        iterations += 1;
        if change.sqrt() < tol {
            converged = true;
            break;
        }
    }
    let sse = design.gradient_pass(&m_flat, &mut grad);
    objectives.push(sse / (2.0 * n) + lambda_reg * nuclear);

    Ok(NuclearNormFit {
        matrix: Array2::from_shape_vec((d1, d2), m_flat).expect("shape matches length"),
        iterations,
        converged,
        objectives,
    })
}

/// Balanced factorization of the initializer: top-r SVD, then
/// `U0 = W_u D^{1/2}`, `V0 = W_v D^{1/2}`.
pub fn factorize_init(m_init: &Array2<f64>, r: usize) -> Result<FactorPair> {
    if r == 0 || r > m_init.nrows().min(m_init.ncols()) {
        return Err(Error::InvalidDimensions(format!(
            "rank {r} incompatible with {} x {}",
            m_init.nrows(),
            m_init.ncols()
        )));
    }
    let svd = svd_jacobi(&m_init.view())?;
    if svd.s[r - 1] <= svd.s[0].max(f64::MIN_POSITIVE) * 1e-14 {
        return Err(Error::DegenerateFactor(format!(
            "initializer has fewer than {r} nonzero singular values"
        )));
    }
    let mut u = Array2::<f64>::zeros((m_init.nrows(), r));
    let mut v = Array2::<f64>::zeros((m_init.ncols(), r));
    for k in 0..r {
        let root = svd.s[k].sqrt();
        for i in 0..m_init.nrows() {
            u[[i, k]] = root * svd.u[[i, k]];
        }
        for j in 0..m_init.ncols() {
            v[[j, k]] = root * svd.vt[[k, j]];
        }
    }
    FactorPair::new(u, v)
}

/// Rate-based default penalty `sigma sqrt(d / n0_arm)` with `d = max(d1, d2)`.
pub fn default_lambda(sigma: f64, d1: usize, d2: usize, n0_arm: usize) -> f64 {
    sigma * ((d1.max(d2)) as f64 / n0_arm.max(1) as f64).sqrt()
}
