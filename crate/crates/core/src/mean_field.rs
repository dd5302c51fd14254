//! Moments of Gaussian interaction fields and the limit law μ_e.
//!
//! Under a Gaussian law for the transformed increments v = Ψ(u), the potential
//! u_{t-1} = Ψ⁻¹(v)_{t-1} is an affine functional of (v_0, ..., v_{t-1}). Every
//! moment c_t = J̄ E f(u_{t-1}) and M^l_{st} = E f(u^0_{s-1}) f(u^l_{t-1}) is
//! therefore an integral against a two-dimensional Gaussian whose covariance is
//! obtained by pushing the block covariance through those functionals.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::model::{InitialLaw, LambdaSpec, ModelParams, TOL_PSD_REL};
use crate::quadrature::GaussHermite;
use crate::simulation::{geometric_sum, EmpiricalMoments};
use crate::spectral::{
    eigen_range, inverse_fourier_blocks, resolvent_transform, CMat, FourierBlocks, MatrixSeq,
    Resolvent, RMat, SpectralDensity,
};

/// c_t for t = 1..T (index t-1) and M^l for |l| <= d, entry (s-1, t-1).
#[derive(Clone, Debug, PartialEq)]
pub struct MomentData {
    pub c: DVector<f64>,
    pub m: MatrixSeq,
}

impl MomentData {
    pub fn zeros(horizon: usize, radius: usize) -> Self {
        MomentData {
            c: DVector::zeros(horizon),
            m: MatrixSeq::zeros(horizon, radius),
        }
    }

    pub fn horizon(&self) -> usize {
        self.c.len()
    }

    pub fn radius(&self) -> usize {
        self.m.radius()
    }

    pub fn validate(&self, j_bar: f64) -> Result<()> {
        let t = self.horizon();
        if self.m.block_size() != t {
            return Err(Error::Shape(format!(
                "c has {t} entries but M blocks are {}x{}",
                self.m.block_size(),
                self.m.block_size()
            )));
        }
        let defect = self.m.symmetry_defect();
        if defect > 1e-12 {
            return Err(Error::Shape(format!("M^-l != transpose(M^l) (defect {defect:e})")));
        }
        for (l, b) in self.m.lags() {
            if b.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::param(format!("M^{l} has entries outside [0, 1]")));
            }
        }
        if self.c.iter().any(|&x| x.abs() > j_bar.abs() * (1.0 + 1e-12)) {
            return Err(Error::param("|c_t| exceeds |J̄|"));
        }
        Ok(())
    }

    /// Sup-norm distance over c and the common lags of M.
    pub fn max_abs_diff(&self, other: &MomentData) -> f64 {
        let dc = (&self.c - &other.c).amax();
        dc.max(self.m.max_abs_diff(&other.m))
    }

    /// Reduces the lag radius to `radius`.
    pub fn truncated(&self, radius: usize) -> MomentData {
        let r = radius.min(self.radius());
        MomentData {
            c: self.c.clone(),
            m: MatrixSeq::from_fn(self.horizon(), r, |l| self.m.lag(l).clone()),
        }
    }
}

impl From<EmpiricalMoments> for MomentData {
    fn from(e: EmpiricalMoments) -> Self {
        MomentData {
            c: e.c_hat,
            m: e.m_hat,
        }
    }
}

/// K^k = θ²δ_k 11ᵗ + Σ_l Λ(k,l) M^l for |k| <= d; entry (t-1, s-1) is cov(G^0_t, G^k_s).
#[derive(Clone, Debug, PartialEq)]
pub struct CovSeq {
    pub seq: MatrixSeq,
}

impl CovSeq {
    pub fn horizon(&self) -> usize {
        self.seq.block_size()
    }

    pub fn radius(&self) -> usize {
        self.seq.radius()
    }

    pub fn lag(&self, k: i64) -> &RMat {
        self.seq.lag(k)
    }

    /// Positivity tolerance scaled to the size of the entries.
    pub fn tol(&self) -> f64 {
        TOL_PSD_REL * self.seq.max_abs().max(1.0)
    }
}

impl SpectralDensity for CovSeq {
    fn block_size(&self) -> usize {
        self.seq.block_size()
    }

    fn eval(&self, omega: f64) -> CMat {
        self.seq.eval(omega)
    }
}

pub fn cov_from_moments(m: &MomentData, spec: &LambdaSpec, theta_std: f64) -> Result<CovSeq> {
    let d = spec.radius();
    if m.radius() < d {
        return Err(Error::Shape(format!(
            "moments have lag radius {} but Λ has radius {d}",
            m.radius()
        )));
    }
    let t = m.horizon();
    let di = d as i64;
    let th2 = theta_std * theta_std;
    let seq = MatrixSeq::from_fn(t, d, |k| {
        let mut acc = if k == 0 {
            RMat::from_element(t, t, th2)
        } else {
            RMat::zeros(t, t)
        };
        for l in -di..=di {
            let lam = spec.get(k, l);
            if lam != 0.0 {
                acc += m.m.lag(l) * lam;
            }
        }
        acc
    });
    Ok(CovSeq { seq })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldOptions {
    /// Gauss–Hermite nodes per axis.
    pub q_gh: usize,
    /// Nodes of the coarser rule used for the residual estimate.
    pub q_check: usize,
    pub residual_threshold: f64,
    /// Use K^0 instead of σ²I + K^0 for the per-neuron covariance.
    pub strict_prop53: bool,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        MeanFieldOptions {
            q_gh: 40,
            q_check: 30,
            residual_threshold: 1e-4,
            strict_prop53: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadratureReport {
    pub q_gh: usize,
    pub q_check: usize,
    /// Largest difference between the two rules over all computed integrals.
    pub residual: f64,
}

/// Gaussian law of (v^j_t) for t = 1..T across neurons: mean `mean`, cross covariances
/// `cov` (entry (a-1, b-1) of lag l is cov(v^0_a, v^l_b)), v_0 iid `initial` and
/// independent of the rest.
pub struct MomentEngine<'a> {
    params: &'a ModelParams,
    horizon: usize,
    /// Mean of u_τ, τ = 0..T-1.
    u_mean: Vec<f64>,
    /// Same-neuron covariance of (u_τ, u_τ').
    same: RMat,
    /// Cross-neuron covariance of (u^0_τ, u^l_τ') for each lag of `cov`.
    cross: MatrixSeq,
    fine: GaussHermite,
    coarse: GaussHermite,
    threshold: f64,
}

impl<'a> MomentEngine<'a> {
    pub fn new(
        params: &'a ModelParams,
        mean: &DVector<f64>,
        cov: &MatrixSeq,
        initial: InitialLaw,
        opts: &MeanFieldOptions,
    ) -> Result<Self> {
        let t = params.horizon;
        if mean.len() != t || cov.block_size() != t {
            return Err(Error::Shape(format!(
                "Gaussian law of dimension {} / {} for T={t}",
                mean.len(),
                cov.block_size()
            )));
        }
        let g = params.gamma;
        // a[τ][s-1] = γ^{τ-s} for 1 <= s <= τ
        let a = RMat::from_fn(t, t, |tau, s1| {
            let s = s1 + 1;
            if s <= tau {
                g.powi((tau - s) as i32)
            } else {
                0.0
            }
        });
        let init_coef: Vec<f64> = (0..t).map(|tau| g.powi(tau as i32)).collect();
        let u_mean: Vec<f64> = (0..t)
            .map(|tau| {
                let mut acc = init_coef[tau] * initial.mean();
                for s1 in 0..t {
                    acc += a[(tau, s1)] * mean[s1];
                }
                acc + params.theta_bar * geometric_sum(g, tau)
            })
            .collect();
        let at = a.transpose();
        let var0 = initial.var();
        let mut same = &a * cov.lag(0) * &at;
        for i in 0..t {
            for j in 0..t {
                same[(i, j)] += init_coef[i] * init_coef[j] * var0;
            }
        }
        let cross = MatrixSeq::from_fn(t, cov.radius(), |l| &a * cov.lag(l) * &at);
        Ok(MomentEngine {
            params,
            horizon: t,
            u_mean,
            same,
            cross,
            fine: GaussHermite::new(opts.q_gh),
            coarse: GaussHermite::new(opts.q_check.max(1)),
            threshold: opts.residual_threshold,
        })
    }

    fn pair(&self, rule: &GaussHermite, mean: [f64; 2], cov: [[f64; 2]; 2]) -> f64 {
        let p = self.params;
        rule.expect_bivariate(mean, cov, |x, y| p.f(x) * p.f(y))
    }

    /// c_t = J̄ E f(u_{t-1}), with its residual.
    pub fn c_entry(&self, t: usize) -> (f64, f64) {
        let tau = t - 1;
        let p = self.params;
        let (m, v) = (self.u_mean[tau], self.same[(tau, tau)]);
        let a = self.fine.expect_normal(m, v, |x| p.f(x));
        let b = self.coarse.expect_normal(m, v, |x| p.f(x));
        (p.j_bar * a, (p.j_bar * (a - b)).abs())
    }

    /// M^l_{st} = E f(u^0_{s-1}) f(u^l_{t-1}), with its residual.
    pub fn m_entry(&self, l: i64, s: usize, t: usize) -> Result<(f64, f64)> {
        let (i, j) = (s - 1, t - 1);
        let off = if l == 0 {
            self.same[(i, j)]
        } else {
            self.cross.get(l).map_or(0.0, |c| c[(i, j)])
        };
        let cov = [[self.same[(i, i)], off], [off, self.same[(j, j)]]];
        let det = cov[0][0] * cov[1][1] - off * off;
        let scale = cov[0][0].max(cov[1][1]).max(1.0);
        if det < -1e-10 * scale * scale {
            return Err(Error::NotPsd {
                context: format!("joint covariance of (u^0_{i}, u^{l}_{j})"),
                eigenvalue: det,
            });
        }
        let mean = [self.u_mean[i], self.u_mean[j]];
        let a = self.pair(&self.fine, mean, cov);
        let b = self.pair(&self.coarse, mean, cov);
        Ok((a, (a - b).abs()))
    }

    fn check(&self, residual: f64, what: &str) -> Result<f64> {
        if residual > self.threshold {
            return Err(Error::Quadrature {
                context: what.to_string(),
                residual,
                threshold: self.threshold,
            });
        }
        Ok(residual)
    }

    /// All moments with lag radius `radius`.
    pub fn moments(&self, radius: usize) -> Result<(MomentData, f64)> {
        let t = self.horizon;
        let mut out = MomentData::zeros(t, radius);
        let mut res = 0.0f64;
        for tt in 1..=t {
            let (c, r) = self.c_entry(tt);
            out.c[tt - 1] = c;
            res = res.max(self.check(r, "c")?);
        }
        for l in 0..=radius as i64 {
            for s in 1..=t {
                for tt in 1..=t {
                    let (m, r) = self.m_entry(l, s, tt)?;
                    res = res.max(self.check(r, "M")?);
                    out.m.lag_mut(l)[(s - 1, tt - 1)] = m;
                    out.m.lag_mut(-l)[(tt - 1, s - 1)] = m;
                }
            }
        }
        Ok((out, res))
    }
}

/// Per-neuron covariance σ²I + K^0 (or K^0 alone under `strict_prop53`) and cross lags K^l.
pub fn v_covariance(k: &CovSeq, sigma2: f64, strict_prop53: bool) -> MatrixSeq {
    let t = k.horizon();
    MatrixSeq::from_fn(t, k.radius(), |l| {
        if l == 0 && !strict_prop53 {
            k.lag(0) + RMat::identity(t, t) * sigma2
        } else {
            k.lag(l).clone()
        }
    })
}

/// The moments of Q^m: c' and M' under the Gaussian law with mean c^m and covariance
/// built from K = cov_from_moments(m).
pub fn limit_map_l(
    m: &MomentData,
    params: &ModelParams,
    spec: &LambdaSpec,
    opts: &MeanFieldOptions,
) -> Result<(MomentData, QuadratureReport)> {
    let k = cov_from_moments(m, spec, params.theta_std)?;
    let cov = v_covariance(&k, params.sigma2(), opts.strict_prop53);
    let engine = MomentEngine::new(params, &m.c, &cov, params.initial, opts)?;
    let (out, residual) = engine.moments(spec.radius())?;
    Ok((
        out,
        QuadratureReport {
            q_gh: opts.q_gh,
            q_check: opts.q_check,
            residual,
        },
    ))
}

/// L applied `times` times.
pub fn iterate_limit_map(
    start: &MomentData,
    params: &ModelParams,
    spec: &LambdaSpec,
    opts: &MeanFieldOptions,
    times: usize,
) -> Result<MomentData> {
    let mut cur = start.clone();
    for _ in 0..times {
        cur = limit_map_l(&cur, params, spec, opts)?.0;
    }
    Ok(cur)
}

/// The limit law: v_{1:T} per neuron Gaussian with mean c_e and covariance σ²I + K_e^0,
/// lag-l cross covariance K_e^l, v_0 iid μ_I.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitLaw {
    pub params: ModelParams,
    pub c_e: DVector<f64>,
    pub k_e: CovSeq,
    pub m_e: MomentData,
    pub strict_prop53: bool,
    pub report: QuadratureReport,
}

impl LimitLaw {
    /// Covariance lags of the v-process under the law.
    pub fn v_covariance(&self) -> MatrixSeq {
        v_covariance(&self.k_e, self.params.sigma2(), self.strict_prop53)
    }
}

/// Runs the causal recursion for t = 1..T: step t fills c_t and row/column t of
/// every M^l, reading only entries at times < t.
pub fn solve_limit_law(params: &ModelParams, spec: &LambdaSpec, opts: &MeanFieldOptions) -> Result<LimitLaw> {
    params.validate()?;
    let t = params.horizon;
    let d = spec.radius();
    let mut m = MomentData::zeros(t, d);
    let mut report = QuadratureReport {
        q_gh: opts.q_gh,
        q_check: opts.q_check,
        residual: 0.0,
    };
    for step in 1..=t {
        let k = cov_from_moments(&m, spec, params.theta_std)?;
        let cov = v_covariance(&k, params.sigma2(), opts.strict_prop53);
        let engine = MomentEngine::new(params, &m.c, &cov, params.initial, opts)?;
        let (c, r) = engine.c_entry(step);
        report.residual = report.residual.max(engine.check(r, "c")?);
        m.c[step - 1] = c;
        for l in 0..=d as i64 {
            for s in 1..=step {
                for (a, b) in [(s, step), (step, s)] {
                    let (v, r) = engine.m_entry(l, a, b)?;
                    report.residual = report.residual.max(engine.check(r, "M")?);
                    m.m.lag_mut(l)[(a - 1, b - 1)] = v;
                    m.m.lag_mut(-l)[(b - 1, a - 1)] = v;
                }
            }
        }
    }
    let k_e = cov_from_moments(&m, spec, params.theta_std)?;
    let cov = v_covariance(&k_e, params.sigma2(), opts.strict_prop53);
    check_joint_covariance(&cov)?;
    Ok(LimitLaw {
        params: params.clone(),
        c_e: m.c.clone(),
        k_e,
        m_e: m,
        strict_prop53: opts.strict_prop53,
        report,
    })
}

/// The 2T×2T covariance of (v^0, v^l) must be PSD for every lag.
fn check_joint_covariance(cov: &MatrixSeq) -> Result<()> {
    let t = cov.block_size();
    let tol = TOL_PSD_REL * cov.max_abs().max(1.0);
    for l in 1..=cov.radius() as i64 {
        let mut j = RMat::zeros(2 * t, 2 * t);
        j.view_mut((0, 0), (t, t)).copy_from(cov.lag(0));
        j.view_mut((t, t), (t, t)).copy_from(cov.lag(0));
        j.view_mut((0, t), (t, t)).copy_from(cov.lag(l));
        j.view_mut((t, 0), (t, t)).copy_from(&cov.lag(l).transpose());
        let e = sym_eigen(&j).0;
        if e[0] < -tol {
            return Err(Error::NotPsd {
                context: format!("joint covariance of (v^0, v^{l})"),
                eigenvalue: e[0],
            });
        }
    }
    Ok(())
}

/// K̃, Ã = K̃(σ²I + K̃)⁻¹ and the Fourier blocks A^l of Ã.
pub struct SpectralPack {
    pub k: CovSeq,
    pub a_tilde: Resolvent<CovSeq>,
    pub a_blocks: FourierBlocks,
    /// Largest eigenvalue of K̃ on the check grid.
    pub rho_observed: f64,
    /// Largest eigenvalue of Ã on the check grid.
    pub alpha_observed: f64,
}

pub fn spectral_pack(k: &CovSeq, sigma2: f64, l_out: usize, q: usize) -> Result<SpectralPack> {
    let a_tilde = resolvent_transform(k.clone(), sigma2, k.tol())?;
    let (_, rho_observed) = eigen_range(k, q);
    let (_, alpha_observed) = eigen_range(&a_tilde, q);
    let a_blocks = inverse_fourier_blocks(&a_tilde, l_out, q);
    Ok(SpectralPack {
        k: k.clone(),
        a_tilde,
        a_blocks,
        rho_observed,
        alpha_observed,
    })
}
