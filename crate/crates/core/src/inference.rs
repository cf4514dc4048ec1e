//! Inference on linear forms `m_T = <M_i, T>`: the final low-rank projection
//! of the debiased average, fully-online plug-in variance estimators, normal
//! confidence intervals, the two-arm difference statistic, and a Monte Carlo
//! oracle for the true asymptotic variance.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{frob_inner, svd_jacobi};
use crate::model::{sample_context, GroundTruth};

/// A contrast matrix `T` given as a sparse list of `(row, col, weight)`
/// entries (0-based), defining the scalar functional `m_T = <M, T>`.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceTarget {
    pub label: String,
    pub entries: Vec<(usize, usize, f64)>,
    d1: usize,
    d2: usize,
}

impl InferenceTarget {
    pub fn from_entries(
        label: impl Into<String>,
        entries: Vec<(usize, usize, f64)>,
        d1: usize,
        d2: usize,
    ) -> Result<Self> {
        let label = label.into();
        if entries.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "target {label}: needs at least one entry"
            )));
        }
        for &(j1, j2, _) in &entries {
            if j1 >= d1 || j2 >= d2 {
                return Err(Error::InvalidParameter(format!(
                    "target {label}: entry ({j1}, {j2}) outside {d1} x {d2}"
                )));
            }
        }
        let target = Self { label, entries, d1, d2 };
        if crate::linalg::frob_norm(&target.dense().view()) == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "target {}: |T|_F must be positive",
                target.label
            )));
        }
        Ok(target)
    }

    /// Single-entry target `T = e_j1 e_j2^T` (0-based indices).
    pub fn entry(label: impl Into<String>, j1: usize, j2: usize, d1: usize, d2: usize) -> Result<Self> {
        Self::from_entries(label, vec![(j1, j2, 1.0)], d1, d2)
    }

    pub fn dense(&self) -> Array2<f64> {
        let mut t = Array2::<f64>::zeros((self.d1, self.d2));
        for &(j1, j2, w) in &self.entries {
            t[[j1, j2]] += w;
        }
        t
    }

    /// `<M, T>` for a dense matrix.
    pub fn linear_form(&self, m: &Array2<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(j1, j2, w)| w * m[[j1, j2]])
            .sum()
    }
}

/// Standard normal quantile by Wichura's rational approximation; relative
/// accuracy far below the 1e-9 the interval construction needs.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile probability must lie in (0, 1), got {p}"
        )));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return Ok(num / den);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_3e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    Ok(if q < 0.0 { -val } else { val })
}

/// Two-sided critical value `z` such that `P(|N(0,1)| <= z) = level`.
pub fn z_two_sided(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    normal_quantile(0.5 + level / 2.0)
}

/// Fully-online accumulators for `sigma_hat^2` (per arm) and `S_hat^2`
/// (per arm and target). Dividing the sums by the step count yields the
/// plug-in estimates.
#[derive(Debug, Clone)]
pub struct VarianceAccumulators {
    n: usize,
    sigma2_sum: [f64; 2],
    s2_sum: Vec<[f64; 2]>,
}

impl VarianceAccumulators {
    pub fn new(n_targets: usize) -> Self {
        Self {
            n: 0,
            sigma2_sum: [0.0; 2],
            s2_sum: vec![[0.0; 2]; n_targets],
        }
    }

    /// Count one completed step. Call exactly once per bandit iteration.
    pub fn advance_step(&mut self) {
        self.n += 1;
    }

    pub fn step_count(&self) -> usize {
        self.n
    }

    /// Add the chosen arm's squared-residual term, with the residual
    /// `y - <M_sgd_{a,t-1}, X>` already computed.
    pub fn accumulate_sigma2_residual(&mut self, resid: f64, a: usize, pi: f64) -> Result<()> {
        let w = crate::sgd::inverse_weight(a, pi)?;
        self.sigma2_sum[a] += w * resid * resid;
        Ok(())
    }

    /// Add one step's contribution to both arms' `sigma_hat^2` sums. Only the
    /// chosen arm contributes (the other arm's indicator is zero).
    pub fn accumulate_sigma2(
        &mut self,
        y: f64,
        m_sgd_prev: &[Array2<f64>; 2],
        x: &Array2<f64>,
        a: usize,
        pi: f64,
    ) -> Result<()> {
        let resid = y - frob_inner(&m_sgd_prev[a].view(), &x.view());
        self.accumulate_sigma2_residual(resid, a, pi)
    }

    /// Add one step's contribution to `S_hat^2` for every target, given the
    /// chosen arm's dense projections at time t-1. Complements are `I - P`.
    pub fn accumulate_s2(
        &mut self,
        x: &Array2<f64>,
        p_u: &Array2<f64>,
        p_v: &Array2<f64>,
        a: usize,
        pi: f64,
        targets: &[InferenceTarget],
    ) -> Result<()> {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::PropensityOutOfRange(pi));
        }
        let px = p_u.dot(x);
        let xp = x.dot(p_v);
        let pxp = px.dot(p_v);
        // (I - P_u) X P_v + P_u X (I - P_v) = X P_v + P_u X - 2 P_u X P_v
        let combo = &xp + &px - &(&pxp * 2.0);
        let denom = if a == 1 {
            pi * pi
        } else {
            (1.0 - pi) * (1.0 - pi)
        };
        for (idx, t) in targets.iter().enumerate() {
            let val = t.linear_form(&combo);
            self.s2_sum[idx][a] += val * val / denom;
        }
        Ok(())
    }

    /// Same contribution computed from orthonormal bases `g_u g_u^T = P_u`,
    /// `g_v g_v^T = P_v`, touching only the targets' entries. Used in the
    /// per-step hot loop.
    pub fn accumulate_s2_with_bases(
        &mut self,
        x: &Array2<f64>,
        g_u: &Array2<f64>,
        g_v: &Array2<f64>,
        a: usize,
        pi: f64,
        targets: &[InferenceTarget],
    ) -> Result<()> {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::PropensityOutOfRange(pi));
        }
        let r = g_u.ncols();
        let c = g_u.t().dot(x); // r x d2
        let w = x.dot(g_v); // d1 x r
        let z = c.dot(g_v); // r x r
        let denom = if a == 1 {
            pi * pi
        } else {
            (1.0 - pi) * (1.0 - pi)
        };
        for (idx, t) in targets.iter().enumerate() {
            let mut val = 0.0;
            for &(j1, j2, wt) in &t.entries {
                let mut xpv = 0.0;
                let mut pux = 0.0;
                let mut puxpv = 0.0;
                for k in 0..r {
                    xpv += w[[j1, k]] * g_v[[j2, k]];
                    pux += g_u[[j1, k]] * c[[k, j2]];
                    let mut zk = 0.0;
                    for l in 0..r {
                        zk += z[[k, l]] * g_v[[j2, l]];
                    }
                    puxpv += g_u[[j1, k]] * zk;
                }
                val += wt * (xpv + pux - 2.0 * puxpv);
            }
            self.s2_sum[idx][a] += val * val / denom;
        }
        Ok(())
    }

    pub fn sigma2(&self, arm: usize) -> f64 {
        self.sigma2_sum[arm] / self.n.max(1) as f64
    }

    pub fn s2(&self, arm: usize, target_idx: usize) -> f64 {
        self.s2_sum[target_idx][arm] / self.n.max(1) as f64
    }

    /// Plug-in standard-deviation product `sigma_hat * S_hat`.
    pub fn sigma_s(&self, arm: usize, target_idx: usize) -> f64 {
        (self.sigma2(arm) * self.s2(arm, target_idx)).sqrt()
    }
}

/// Project onto rank `r`: `M_proj = U_hat U_hat^T M V_hat V_hat^T` with the
/// top-r singular vectors of `M` itself, i.e. the rank-r truncated SVD.
pub fn project_topr(m: &Array2<f64>, r: usize) -> Result<Array2<f64>> {
    if r > m.nrows().min(m.ncols()) {
        return Err(Error::InvalidDimensions(format!(
            "rank {r} exceeds min dimension of {} x {}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(svd_jacobi(&m.view())?.truncated(r))
}

/// Point estimate `m_hat_T = <M_proj, T>`.
pub fn point_estimate(m_proj: &Array2<f64>, target: &InferenceTarget) -> f64 {
    target.linear_form(m_proj)
}

/// A symmetric normal confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntervalEstimate {
    pub point: f64,
    pub half_width: f64,
    pub level: f64,
    /// For per-arm intervals: sigma_hat. For difference intervals: the
    /// combined standard deviation, with `s_hat` set to 1.
    pub sigma_hat: f64,
    pub s_hat: f64,
    pub n: usize,
}

impl IntervalEstimate {
    pub fn lower(&self) -> f64 {
        self.point - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.point + self.half_width
    }

    pub fn covers(&self, truth: f64) -> bool {
        truth >= self.lower() && truth <= self.upper()
    }
}

/// Per-arm confidence interval `m_hat +- z * sigma_hat * S_hat / sqrt(n)`.
pub fn confidence_interval(
    m_hat: f64,
    sigma_hat: f64,
    s_hat: f64,
    n: usize,
    level: f64,
) -> Result<IntervalEstimate> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "confidence interval needs n >= 1".into(),
        ));
    }
    if !(sigma_hat > 0.0 && s_hat > 0.0) {
        return Err(Error::NonPositiveVariance { sigma_hat, s_hat });
    }
    let z = z_two_sided(level)?;
    Ok(IntervalEstimate {
        point: m_hat,
        half_width: z * sigma_hat * s_hat / (n as f64).sqrt(),
        level,
        sigma_hat,
        s_hat,
        n,
    })
}

/// Interval for the arm difference `m_T^(1) - m_T^(0)` with variance
/// `(sigma0^2 S0^2 + sigma1^2 S1^2) / n`.
pub fn difference_statistic(
    m_hat_1: f64,
    m_hat_0: f64,
    acc: &VarianceAccumulators,
    target_idx: usize,
    level: f64,
) -> Result<IntervalEstimate> {
    let n = acc.step_count();
    if n == 0 {
        return Err(Error::InvalidParameter(
            "difference interval needs n >= 1".into(),
        ));
    }
    let var0 = acc.sigma2(0) * acc.s2(0, target_idx);
    let var1 = acc.sigma2(1) * acc.s2(1, target_idx);
    let combined = (var0 + var1).sqrt();
    if combined <= 0.0 {
        return Err(Error::NonPositiveVariance {
            sigma_hat: combined,
            s_hat: 1.0,
        });
    }
    let z = z_two_sided(level)?;
    Ok(IntervalEstimate {
        point: m_hat_1 - m_hat_0,
        half_width: z * combined / (n as f64).sqrt(),
        level,
        sigma_hat: combined,
        s_hat: 1.0,
        n,
    })
}

/// Monte Carlo estimate of the true asymptotic variance `S_i^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S2Estimate {
    pub s2: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl S2Estimate {
    pub fn s(&self) -> f64 {
        self.s2.max(0.0).sqrt()
    }
}

/// True-variance oracle: averages the Theorem-variance integrand
/// `<(I-P_u) X P_v + P_u X (I-P_v), T>^2 / ((1-eps) 1{<M_i - M_{1-i}, X> > 0} + eps/2)`
/// over contexts with i.i.d. standard Gaussian entries, using the arm's true
/// singular spaces. Deterministic for a given seed, independent of thread
/// count (fixed-size chunks with per-chunk RNG streams).
pub fn true_s2_oracle(
    truth: &GroundTruth,
    target: &InferenceTarget,
    arm: usize,
    epsilon: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<S2Estimate> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    if mc_samples == 0 {
        return Err(Error::InvalidParameter("mc_samples must be >= 1".into()));
    }
    let (d1, d2) = (truth.d1, truth.d2);
    let u = &truth.arms[arm].u;
    let v = &truth.arms[arm].v;
    let t_dense = target.dense();

    // <(I-P_u) X P_v + P_u X (I-P_v), T> = <X, B> with
    // B = (I-P_u) T P_v + P_u T (I-P_v) = T P_v + P_u T - 2 P_u T P_v.
    let tv = t_dense.dot(v); // d1 x r
    let ut = u.t().dot(&t_dense); // r x d2
    let utv = u.t().dot(&tv); // r x r
    let b = &tv.dot(&v.t()) + &u.dot(&ut) - &(u.dot(&utv).dot(&v.t()) * 2.0);

    let diff = &truth.arms[arm].m - &truth.arms[1 - arm].m;

    const CHUNK: usize = 4096;
    let n_chunks = mc_samples.div_ceil(CHUNK);
    let partials: Vec<(f64, f64, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64 + 1);
            let count = CHUNK.min(mc_samples - chunk * CHUNK);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                let x = sample_context(d1, d2, &mut rng);
                let num = frob_inner(&x.view(), &b.view());
                let score = frob_inner(&diff.view(), &x.view());
                let w = if score > 0.0 {
                    1.0 - epsilon / 2.0
                } else {
                    epsilon / 2.0
                };
                let val = num * num / w;
                sum += val;
                sum_sq += val * val;
            }
            (sum, sum_sq, count)
        })
        .collect();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (s, sq, _) in &partials {
        sum += s;
        sum_sq += sq;
    }
    let n = mc_samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
    Ok(S2Estimate {
        s2: mean,
        std_err: (var / n).sqrt(),
        samples: mc_samples,
    })
}
