//! Γ₁, Γ₂, φ^N, the Radon–Nikodym log-density and the rate functions H and H^ν
//! on Gaussian candidate measures.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{clip_psd, hermitian_eigen, sym_eigen};
use crate::mean_field::{
    cov_from_moments, v_covariance, CovSeq, LimitLaw, MeanFieldOptions, MomentData, MomentEngine,
};
use crate::model::{check_size, wrap, DerivedConstants, InitialLaw, LambdaSpec, ModelParams, TOL_PSD_REL};
use crate::simulation::{empirical_moments, psi, Trajectory};
use crate::spectral::{
    block_dft_eigvals, dft_vectors, omega_grid, resolvent_matrix, resolvent_transform, CMat,
    Complex64, MatrixSeq, RMat, SpectralDensity,
};

pub const TOL_RATE: f64 = 1e-5;

/// Stationary Gaussian law of the transformed increments v_{1:T}: mean `mean`,
/// covariance lags `cov` (entry (a-1, b-1) of lag l is cov(v^0_a, v^l_b)), and
/// v_0 iid `initial`. Its spectral measure is h(ω)dω plus 2π m mᵗ δ₀.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianCandidate {
    pub mean: DVector<f64>,
    pub cov: MatrixSeq,
    pub initial: InitialLaw,
}

impl GaussianCandidate {
    pub fn from_limit_law(law: &LimitLaw) -> Self {
        GaussianCandidate {
            mean: law.c_e.clone(),
            cov: law.v_covariance(),
            initial: law.params.initial,
        }
    }

    /// Q^ν: mean c^ν and covariance σ²I + K^ν.
    pub fn q_nu(nu: &NuPack, sigma2: f64, initial: InitialLaw) -> Self {
        GaussianCandidate {
            mean: nu.c.clone(),
            cov: v_covariance(&nu.k, sigma2, false),
            initial,
        }
    }

    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let t = params.horizon;
        if self.mean.len() != t || self.cov.block_size() != t {
            return Err(Error::Shape(format!(
                "candidate of dimension {} / {} for T={t}",
                self.mean.len(),
                self.cov.block_size()
            )));
        }
        if self.initial != params.initial {
            return Err(Error::Unsupported(
                "candidate time-0 law differs from the model's initial law".into(),
            ));
        }
        let defect = self.cov.symmetry_defect();
        if defect > 1e-12 * self.cov.max_abs().max(1.0) {
            return Err(Error::Shape(format!(
                "covariance lags are not symmetric-pair (defect {defect:e})"
            )));
        }
        Ok(())
    }

    /// c^μ and M^{μ,l}, |l| <= radius, of the candidate pushed through Ψ⁻¹.
    pub fn moments(
        &self,
        params: &ModelParams,
        radius: usize,
        opts: &MeanFieldOptions,
    ) -> Result<(MomentData, f64)> {
        MomentEngine::new(params, &self.mean, &self.cov, self.initial, opts)?.moments(radius)
    }
}

/// Mean and interaction covariance of a reference measure ν.
#[derive(Clone, Debug, PartialEq)]
pub struct NuPack {
    pub c: DVector<f64>,
    pub k: CovSeq,
}

impl From<&LimitLaw> for NuPack {
    fn from(law: &LimitLaw) -> Self {
        NuPack {
            c: law.c_e.clone(),
            k: law.k_e.clone(),
        }
    }
}

impl NuPack {
    pub fn from_moments(m: &MomentData, spec: &LambdaSpec, theta_std: f64) -> Result<Self> {
        Ok(NuPack {
            c: m.c.clone(),
            k: cov_from_moments(m, spec, theta_std)?,
        })
    }
}

/// -(1/2N) Σ_l log det(I + K̃(2πl/N)/σ²).
pub fn gamma1_finite(k: &CovSeq, sigma2: f64, size: usize) -> Result<f64> {
    let blocks = block_dft_eigvals(&k.seq, size)?;
    let tol = k.tol();
    let mut acc = 0.0;
    for b in &blocks {
        let mut e = hermitian_eigen(b).0;
        clip_psd(&mut e, tol, "K̃ at a DFT frequency")?;
        acc += e.iter().map(|x| (x / sigma2).ln_1p()).sum::<f64>();
    }
    Ok(-acc / (2.0 * size as f64))
}

/// -(1/4π) ∫ log det(I + K̃(ω)/σ²) dω by the Q-point trapezoid rule.
pub fn gamma1_limit<D: SpectralDensity>(k: &D, sigma2: f64, q: usize) -> f64 {
    let acc: f64 = omega_grid(q)
        .iter()
        .map(|&w| {
            hermitian_eigen(&k.eval(w))
                .0
                .iter()
                .map(|x| (x.max(0.0) / sigma2).ln_1p())
                .sum::<f64>()
        })
        .sum();
    -acc / (2.0 * q as f64)
}

fn real_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

/// (1/2σ²)[(1/2π)∫ tr(Ã h) dω + mᵗÃ(0)m - 2mᵗÃ(0)c + cᵗÃ(0)c + 2⟨c,m⟩ - ‖c‖²].
pub fn gamma2_candidate<D: SpectralDensity>(
    cand: &GaussianCandidate,
    a_tilde: &D,
    c: &DVector<f64>,
    sigma2: f64,
    q: usize,
) -> f64 {
    let grid = omega_grid(q);
    let int: f64 = grid
        .iter()
        .map(|&w| (a_tilde.eval(w) * cand.cov.eval(w)).trace().re)
        .sum::<f64>()
        / q as f64;
    let a0 = real_part(&a_tilde.eval(0.0));
    let m = &cand.mean;
    let quad = m.dot(&(&a0 * m)) - 2.0 * m.dot(&(&a0 * c)) + c.dot(&(&a0 * c));
    (int + quad + 2.0 * c.dot(m) - c.norm_squared()) / (2.0 * sigma2)
}

/// Relative entropy rate of the candidate with respect to white noise of variance σ²:
/// (1/4π)∫[tr(h/σ²) - T - log det(h/σ²)] dω + ‖m‖²/(2σ²).
pub fn entropy_rate(cand: &GaussianCandidate, sigma2: f64, q: usize) -> Result<f64> {
    let floor = TOL_PSD_REL * cand.cov.max_abs().max(sigma2);
    let mut acc = 0.0;
    for w in omega_grid(q) {
        let e = hermitian_eigen(&cand.cov.eval(w)).0;
        if e[0] <= floor {
            return Err(Error::InfiniteEntropy(format!(
                "spectral density has eigenvalue {:e} at ω={w}",
                e[0]
            )));
        }
        acc += e.iter().map(|x| x / sigma2 - 1.0 - (x / sigma2).ln()).sum::<f64>();
    }
    Ok(acc / (2.0 * q as f64) + cand.mean.norm_squared() / (2.0 * sigma2))
}

/// Block-circulant quantities for φ^N at size N: Ã^l = K̃(σ²+K̃)⁻¹ at 2πl/N and the
/// blocks A^m of its inverse DFT.
pub struct CirculantPack {
    size: usize,
    c: DVector<f64>,
    a_tilde: Vec<CMat>,
    a_blocks: Vec<RMat>,
}

impl CirculantPack {
    pub fn new(k: &CovSeq, c: &DVector<f64>, sigma2: f64, size: usize) -> Result<Self> {
        let kt = block_dft_eigvals(&k.seq, size)?;
        let tol = k.tol();
        let a_tilde: Vec<CMat> = kt
            .iter()
            .map(|b| resolvent_matrix(b, sigma2, tol))
            .collect::<Result<_>>()?;
        let h = ((size - 1) / 2) as i64;
        let t = k.horizon();
        let n = size as i64;
        let a_blocks = (-h..=h)
            .map(|m| {
                let mut acc = CMat::zeros(t, t);
                for l in -h..=h {
                    let ph = 2.0 * std::f64::consts::PI * (l * m).rem_euclid(n) as f64 / size as f64;
                    acc += &a_tilde[(l + h) as usize] * Complex64::new(ph.cos(), ph.sin());
                }
                acc.map(|z| z.re / size as f64)
            })
            .collect();
        Ok(CirculantPack {
            size,
            c: c.clone(),
            a_tilde,
            a_blocks,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// A^m, m in [-n, n].
    pub fn block(&self, m: i64) -> &RMat {
        let h = ((self.size - 1) / 2) as i64;
        &self.a_blocks[(wrap(m, self.size) + h) as usize]
    }

    /// Ã^l, l in [-n, n].
    pub fn a_tilde(&self, l: i64) -> &CMat {
        let h = ((self.size - 1) / 2) as i64;
        &self.a_tilde[(wrap(l, self.size) + h) as usize]
    }
}

fn check_v(pack: &CirculantPack, v: &[DVector<f64>]) -> Result<()> {
    let t = pack.c.len();
    if v.len() != pack.size || v.iter().any(|x| x.len() != t) {
        return Err(Error::Shape(format!(
            "φ^N needs {} vectors of length {t}",
            pack.size
        )));
    }
    Ok(())
}

/// (1/2σ²)[(1/N)Σ_{jk}(v^j - c)ᵗA^{k-j}(v^k - c) + (2/N)Σ_j⟨c, v^j⟩ - ‖c‖²].
pub fn phi_n_direct(pack: &CirculantPack, v: &[DVector<f64>], sigma2: f64) -> Result<f64> {
    check_v(pack, v)?;
    let n = pack.size;
    let h = ((n - 1) / 2) as i64;
    let w: Vec<DVector<f64>> = v.iter().map(|x| x - &pack.c).collect();
    let mut quad = 0.0;
    for j in -h..=h {
        for k in -h..=h {
            let a = pack.block(k - j);
            quad += w[(j + h) as usize].dot(&(a * &w[(k + h) as usize]));
        }
    }
    let lin: f64 = v.iter().map(|x| pack.c.dot(x)).sum();
    let nf = n as f64;
    Ok((quad / nf + 2.0 * lin / nf - pack.c.norm_squared()) / (2.0 * sigma2))
}

/// (1/2N²σ²)Σ_l ṽ^{l*}Ã^{-l}ṽ^l + (1/Nσ²)ṽ^0ᵗ(I - Ã^0)c - (1/2σ²)cᵗ(I - Ã^0)c.
pub fn phi_n_dft(pack: &CirculantPack, v: &[DVector<f64>], sigma2: f64) -> Result<f64> {
    check_v(pack, v)?;
    let n = pack.size;
    let h = ((n - 1) / 2) as i64;
    let tv = dft_vectors(v, false);
    let mut quad = 0.0;
    for l in -h..=h {
        let z = &tv[(l + h) as usize];
        quad += (z.adjoint() * pack.a_tilde(-l) * z)[(0, 0)].re;
    }
    let t = pack.c.len();
    let ia0 = RMat::identity(t, t) - real_part(pack.a_tilde(0));
    let v0 = tv[h as usize].map(|z| z.re);
    let nf = n as f64;
    let c = &pack.c;
    Ok(quad / (2.0 * nf * nf * sigma2) + v0.dot(&(&ia0 * c)) / (nf * sigma2)
        - c.dot(&(&ia0 * c)) / (2.0 * sigma2))
}

/// log dQ^N/dP^{⊗N}(u) = N(Γ₁(μ̂^N(u)) + φ^N(μ̂^N(u), Ψ(u))).
pub fn log_rn_density(traj: &Trajectory, params: &ModelParams, spec: &LambdaSpec) -> Result<f64> {
    let n = traj.size();
    check_size(n, spec.radius())?;
    let mom: MomentData = empirical_moments(traj, params, spec.radius())?.into();
    let k = cov_from_moments(&mom, spec, params.theta_std)?;
    let s2 = params.sigma2();
    let g1 = gamma1_finite(&k, s2, n)?;
    let pack = CirculantPack::new(&k, &mom.c, s2, n)?;
    let v: Vec<DVector<f64>> = (0..n)
        .map(|pos| {
            let full = psi(traj.neuron(pos), params);
            DVector::from_row_slice(&full[1..])
        })
        .collect();
    let phi = phi_n_direct(&pack, &v, s2)?;
    Ok(n as f64 * (g1 + phi))
}

/// log E[exp(aᵗZ - (b/2)‖Z‖²)] for Z ~ N(c, K):
/// -½ log det(I + bK) + aᵗc - (b/2)‖c‖² + ½(a - bc)ᵗK(I + bK)⁻¹(a - bc).
pub fn log_gaussian_expectation(c: &DVector<f64>, k: &RMat, a: &DVector<f64>, b: f64) -> Result<f64> {
    let p = c.len();
    if k.nrows() != p || k.ncols() != p || a.len() != p {
        return Err(Error::Shape("gaussian_expectation dimensions differ".into()));
    }
    let (vals, vecs) = sym_eigen(k);
    let tol = TOL_PSD_REL * vals.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut logdet = 0.0;
    let mut ratio = Vec::with_capacity(p);
    for &l in &vals {
        if l < -tol {
            return Err(Error::NotPsd {
                context: "gaussian_expectation covariance".into(),
                eigenvalue: l,
            });
        }
        let l = l.max(0.0);
        let s = 1.0 + b * l;
        if s <= 0.0 {
            return Err(Error::param(format!("1 + b·λ = {s} <= 0")));
        }
        logdet += s.ln();
        ratio.push(l / s);
    }
    let r = a - c * b;
    let proj = vecs.transpose() * &r;
    let quad: f64 = proj.iter().zip(&ratio).map(|(x, w)| w * x * x).sum();
    Ok(-0.5 * logdet + a.dot(c) - 0.5 * b * c.norm_squared() + 0.5 * quad)
}

pub fn gaussian_expectation(c: &DVector<f64>, k: &RMat, a: &DVector<f64>, b: f64) -> Result<f64> {
    log_gaussian_expectation(c, k, a, b).map(f64::exp)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    /// Trapezoid nodes for ω integrals.
    pub q: usize,
    pub mean_field: MeanFieldOptions,
    pub tol_rate: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            q: 512,
            mean_field: MeanFieldOptions::default(),
            tol_rate: TOL_RATE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateDiagnostics {
    pub q: usize,
    pub quadrature_residual: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma1_in_bounds: bool,
    pub min_h_eigenvalue: f64,
    pub alpha_observed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: f64,
    pub i3: f64,
    pub h_value: f64,
    pub diagnostics: RateDiagnostics,
}

fn finish(
    g1: f64,
    g2: f64,
    i3: f64,
    residual: f64,
    alpha_observed: f64,
    cand: &GaussianCandidate,
    params: &ModelParams,
    spec: &LambdaSpec,
    opts: &RateOptions,
) -> Result<RateReport> {
    let consts = DerivedConstants::new(params, spec)?;
    let min_h = crate::spectral::eigen_range(&cand.cov, opts.q).0;
    let h = i3 - g1 - g2;
    if h < -opts.tol_rate {
        return Err(Error::NegativeRate {
            value: h,
            tol: opts.tol_rate,
        });
    }
    Ok(RateReport {
        gamma1: g1,
        gamma2: g2,
        gamma: g1 + g2,
        i3,
        h_value: h,
        diagnostics: RateDiagnostics {
            q: opts.q,
            quadrature_residual: residual,
            beta1: consts.beta1,
            beta2: consts.beta2,
            gamma1_in_bounds: g1 <= 0.0 && g1 >= -consts.beta1,
            min_h_eigenvalue: min_h,
            alpha_observed,
        },
    })
}

/// H(μ) = I⁽³⁾(μ) - Γ₁(μ) - Γ₂(μ), with Γ built from the candidate's own moments.
pub fn rate_h(
    cand: &GaussianCandidate,
    params: &ModelParams,
    spec: &LambdaSpec,
    opts: &RateOptions,
) -> Result<RateReport> {
    params.validate()?;
    cand.validate(params)?;
    let s2 = params.sigma2();
    let (mom, residual) = cand.moments(params, spec.radius(), &opts.mean_field)?;
    let k = cov_from_moments(&mom, spec, params.theta_std)?;
    let a_tilde = resolvent_transform(&k, s2, k.tol())?;
    let g1 = gamma1_limit(&k, s2, opts.q);
    let g2 = gamma2_candidate(cand, &a_tilde, &mom.c, s2, opts.q);
    let i3 = entropy_rate(cand, s2, opts.q)?;
    let alpha = crate::spectral::eigen_range(&a_tilde, opts.q).1;
    finish(g1, g2, i3, residual, alpha, cand, params, spec, opts)
}

/// H^ν(μ) = I⁽³⁾(μ) - Γ₁(ν) - Γ₂^ν(μ), with Γ frozen at ν.
pub fn rate_h_nu(
    cand: &GaussianCandidate,
    nu: &NuPack,
    params: &ModelParams,
    spec: &LambdaSpec,
    opts: &RateOptions,
) -> Result<RateReport> {
    params.validate()?;
    cand.validate(params)?;
    if nu.c.len() != params.horizon || nu.k.horizon() != params.horizon {
        return Err(Error::Shape("reference pack dimension differs from T".into()));
    }
    let s2 = params.sigma2();
    let a_tilde = resolvent_transform(&nu.k, s2, nu.k.tol())?;
    let g1 = gamma1_limit(&nu.k, s2, opts.q);
    let g2 = gamma2_candidate(cand, &a_tilde, &nu.c, s2, opts.q);
    let i3 = entropy_rate(cand, s2, opts.q)?;
    let alpha = crate::spectral::eigen_range(&a_tilde, opts.q).1;
    finish(g1, g2, i3, 0.0, alpha, cand, params, spec, opts)
}

/// Dense -(1/2N) log det(I + K/σ²) of the assembled NT×NT covariance.
pub fn gamma1_dense(k: &CovSeq, sigma2: f64, size: usize) -> f64 {
    let big = crate::spectral::assemble_block_circulant(&k.seq, size);
    let n = big.nrows();
    let m = RMat::identity(n, n) + big / sigma2;
    -m.cholesky().map_or(f64::NAN, |c| 2.0 * c.l().diagonal().map(f64::ln).sum()) / (2.0 * size as f64)
}
