//! Dense linear-algebra kernels for small matrices.
//!
//! Everything in the pipeline is either r x r (per-step renormalization) or
//! d x d with d around 50 (initialization, final projection), so plain Jacobi
//! iterations are fast enough and keep results deterministic: no threaded BLAS,
//! no platform-dependent reduction orders.
//!
//! Sign conventions (needed so that stored factors are reproducible):
//! - thin QR forces the diagonal of R positive;
//! - eigenvectors have their first nonzero entry positive;
//! - SVD pairs (u_k, v_k) are flipped together so that the first nonzero
//!   entry of u_k is positive.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 64;

/// Frobenius inner product `<a, b> = tr(a^T b)`.
pub fn frob_inner(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Frobenius norm.
pub fn frob_norm(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative Frobenius distance `|a - b|_F / max(|b|_F, 1)`.
pub fn rel_frob_dist(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    let mut diff = 0.0;
    let mut scale = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        diff += (x - y) * (x - y);
        scale += y * y;
    }
    diff.sqrt() / scale.sqrt().max(1.0)
}

fn first_nonzero_sign(col: &[f64]) -> f64 {
    for &x in col {
        if x != 0.0 {
            return if x > 0.0 { 1.0 } else { -1.0 };
        }
    }
    1.0
}

/// Thin QR of an n x k matrix (n >= k) by modified Gram-Schmidt with one
/// re-orthogonalization pass. The diagonal of R is forced positive, which
/// pins the factorization uniquely for full-column-rank input.
pub fn thin_qr_positive(a: &ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let (n, k) = a.dim();
    if n < k {
        return Err(Error::InvalidDimensions(format!(
            "thin QR needs n >= k, got {n} x {k}"
        )));
    }
    let mut q = a.to_owned();
    let mut r = Array2::<f64>::zeros((k, k));
    for j in 0..k {
        // Two orthogonalization passes keep Q orthonormal to machine precision.
        for _ in 0..2 {
            for i in 0..j {
                let mut c = 0.0;
                for row in 0..n {
                    c += q[[row, i]] * q[[row, j]];
                }
                r[[i, j]] += c;
                for row in 0..n {
                    q[[row, j]] -= c * q[[row, i]];
                }
            }
        }
        let norm = (0..n).map(|row| q[[row, j]] * q[[row, j]]).sum::<f64>().sqrt();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::Numerical(format!(
                "rank-deficient input to thin QR at column {j}"
            )));
        }
        r[[j, j]] = norm;
        for row in 0..n {
            q[[row, j]] /= norm;
        }
    }
    Ok((q, r))
}

/// Eigendecomposition of a small symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(values, vectors)` with eigenvalues sorted descending and
/// eigenvectors in the columns (sign-fixed). `a` is assumed symmetric; only
/// the stated tolerance of symmetry is relied upon.
pub fn sym_eig_jacobi(a: &ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::InvalidDimensions(format!(
            "symmetric eigendecomposition needs a square matrix, got {n} x {m}"
        )));
    }
    let mut b = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let scale = frob_norm(&b.view()).max(f64::MIN_POSITIVE);

    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += b[[p, q]] * b[[p, q]];
            }
        }
        if off.sqrt() <= JACOBI_TOL * scale {
            let vals = Array1::from_iter((0..n).map(|i| b[[i, i]]));
            return Ok(sort_eig_descending(vals, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = b[[p, q]];
                if apq.abs() <= JACOBI_TOL * scale * 1e-2 {
                    continue;
                }
                let app = b[[p, p]];
                let aqq = b[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let bip = b[[i, p]];
                    let biq = b[[i, q]];
                    b[[i, p]] = c * bip - s * biq;
                    b[[i, q]] = s * bip + c * biq;
                }
                for i in 0..n {
                    let bpi = b[[p, i]];
                    let bqi = b[[q, i]];
                    b[[p, i]] = c * bpi - s * bqi;
                    b[[q, i]] = s * bpi + c * bqi;
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
    }
    Err(Error::Numerical(
        "Jacobi eigendecomposition did not converge".into(),
    ))
}

fn sort_eig_descending(vals: Array1<f64>, vecs: Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap());
    let sorted_vals = Array1::from_iter(order.iter().map(|&i| vals[i]));
    let mut sorted_vecs = Array2::<f64>::zeros(vecs.dim());
    for (dst, &src) in order.iter().enumerate() {
        let col: Vec<f64> = vecs.column(src).to_vec();
        let sign = first_nonzero_sign(&col);
        for row in 0..vecs.nrows() {
            sorted_vecs[[row, dst]] = sign * vecs[[row, src]];
        }
    }
    (sorted_vals, sorted_vecs)
}

/// Singular value decomposition `a = u * diag(s) * vt`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// m x k left singular vectors (k = min(m, n)).
    pub u: Array2<f64>,
    /// Singular values, descending, length k.
    pub s: Array1<f64>,
    /// k x n right singular vectors, transposed.
    pub vt: Array2<f64>,
}

impl Svd {
    /// Reconstruct the rank-`r` truncation `sum_{k<r} s_k u_k v_k^T`.
    pub fn truncated(&self, r: usize) -> Array2<f64> {
        let m = self.u.nrows();
        let n = self.vt.ncols();
        let r = r.min(self.s.len());
        let mut out = Array2::<f64>::zeros((m, n));
        for k in 0..r {
            let sk = self.s[k];
            if sk == 0.0 {
                continue;
            }
            for i in 0..m {
                let uik = sk * self.u[[i, k]];
                for j in 0..n {
                    out[[i, j]] += uik * self.vt[[k, j]];
                }
            }
        }
        out
    }
}

/// Full SVD by one-sided Jacobi. Accurate for the small dense matrices used
/// here; singular values come out descending and sign-fixed as documented in
/// the module header. Columns with a vanishing singular value get a zero left
/// singular vector.
pub fn svd_jacobi(a: &ArrayView2<f64>) -> Result<Svd> {
    svd_jacobi_warm(a, None)
}

/// One-sided Jacobi with an optional warm start: `v0` (n x n, orthogonal,
/// e.g. the right factor from a nearby matrix) pre-rotates the columns so
/// the sweep loop starts close to convergence. The result is the SVD of `a`
/// itself, identical to the cold version up to floating-point rotation
/// order.
pub fn svd_jacobi_warm(a: &ArrayView2<f64>, v0: Option<&Array2<f64>>) -> Result<Svd> {
    let (m, n) = a.dim();
    if m < n {
        if v0.is_some() {
            return Err(Error::InvalidDimensions(
                "warm start expects m >= n".into(),
            ));
        }
        let t = a.t().to_owned();
        let svd = svd_jacobi(&t.view())?;
        // (A^T = U S V^T) => (A = V S U^T); re-apply the sign convention so
        // it is keyed on the left factor of A, not of A^T.
        let mut u = svd.vt.t().to_owned();
        let mut vt = svd.u.t().to_owned();
        for k in 0..svd.s.len() {
            let col: Vec<f64> = (0..u.nrows()).map(|i| u[[i, k]]).collect();
            let sign = first_nonzero_sign(&col);
            if sign < 0.0 {
                for i in 0..u.nrows() {
                    u[[i, k]] = -u[[i, k]];
                }
                for j in 0..vt.ncols() {
                    vt[[k, j]] = -vt[[k, j]];
                }
            }
        }
        return Ok(Svd { u, s: svd.s, vt });
    }

    // Work on rows of w = a^T so column rotations touch contiguous memory.
    // With a warm start, w = (a v0)^T and the rotation log begins at v0^T.
    let (mut w, mut v) = match v0 {
        Some(v0) => {
            if v0.dim() != (n, n) {
                return Err(Error::InvalidDimensions(format!(
                    "warm start must be {n} x {n}, got {:?}",
                    v0.dim()
                )));
            }
            (
                v0.t().dot(&a.t()).as_standard_layout().to_owned(),
                v0.t().as_standard_layout().to_owned(),
            )
        }
        None => (
            a.t().to_owned().as_standard_layout().to_owned(),
            Array2::<f64>::eye(n),
        ),
    };
    let scale = frob_norm(a).max(f64::MIN_POSITIVE);

    let mut converged = false;
    let mut norms = vec![0.0f64; n];
    for _sweep in 0..MAX_SWEEPS {
        for (j, norm) in norms.iter_mut().enumerate() {
            *norm = w.row(j).iter().map(|x| x * x).sum();
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut apq = 0.0;
                {
                    let (wp, wq) = row_pair(&mut w, p, q);
                    for i in 0..m {
                        apq += wp[i] * wq[i];
                    }
                }
                let (app, aqq) = (norms[p], norms[q]);
                if apq == 0.0 || apq * apq <= JACOBI_TOL * JACOBI_TOL * app * aqq {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                {
                    let (wp, wq) = row_pair(&mut w, p, q);
                    for i in 0..m {
                        let xp = wp[i];
                        let xq = wq[i];
                        wp[i] = c * xp - s * xq;
                        wq[i] = s * xp + c * xq;
                    }
                }
                {
                    let (vp, vq) = row_pair(&mut v, p, q);
                    for i in 0..n {
                        let xp = vp[i];
                        let xq = vq[i];
                        vp[i] = c * xp - s * xq;
                        vq[i] = s * xp + c * xq;
                    }
                }
                let t2 = t * apq;
                norms[p] = (app - t2).max(0.0);
                norms[q] = (aqq + t2).max(0.0);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD did not converge".into()));
    }

    let mut entries: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let norm = w.row(j).iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm, j)
        })
        .collect();
    entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut u = Array2::<f64>::zeros((m, n));
    let mut s = Array1::<f64>::zeros(n);
    let mut vt = Array2::<f64>::zeros((n, n));
    let tiny = scale * 1e-14;
    for (dst, &(norm, src)) in entries.iter().enumerate() {
        s[dst] = norm;
        if norm > tiny {
            let row = w.row(src);
            let sign = first_nonzero_sign(row.as_slice().unwrap());
            for i in 0..m {
                u[[i, dst]] = sign * row[i] / norm;
            }
            for j in 0..n {
                vt[[dst, j]] = sign * v[[src, j]];
            }
        } else {
            s[dst] = 0.0;
            for j in 0..n {
                vt[[dst, j]] = v[[src, j]];
            }
        }
    }
    Ok(Svd { u, s, vt })
}

fn row_pair<'a>(m: &'a mut Array2<f64>, p: usize, q: usize) -> (&'a mut [f64], &'a mut [f64]) {
    debug_assert!(p < q);
    let ncols = m.ncols();
    let slice = m.as_slice_mut().expect("standard layout");
    let (head, tail) = slice.split_at_mut(q * ncols);
    (&mut head[p * ncols..p * ncols + ncols], &mut tail[..ncols])
}
