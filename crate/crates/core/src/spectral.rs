//! Fourier machinery: scalar and 2-D DFTs, matrix sequences and their spectral
//! densities, block-circulant diagonalization and the resolvent transform.
//!
//! Sequences over Z/N are stored in centered order, index `j + n` for
//! j in [-n, n], N = 2n + 1. The forward transform uses e^{-2πijk/N}.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DVector, Dyn, OMatrix};
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{clip_psd, hermitian_eigen, hermitian_part, spectral_apply, to_complex};
pub use crate::linalg::{CMat, Complex64, RMat};
use crate::model::{check_size, LambdaSpec};

/// Sizes below this use the direct O(N²) transform.
pub const NAIVE_DFT_MAX: usize = 64;

pub type CVec = OMatrix<Complex64, Dyn, nalgebra::U1>;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let dir = if inverse {
        FftDirection::Inverse
    } else {
        FftDirection::Forward
    };
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, dir))
}

fn twiddles(n: usize, inverse: bool) -> Vec<Complex64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|m| {
            let a = sign * 2.0 * PI * m as f64 / n as f64;
            Complex64::new(a.cos(), a.sin())
        })
        .collect()
}

/// Direct unnormalized DFT with phases reduced mod N.
pub fn naive_dft(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let tw = twiddles(n, inverse);
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                acc += v * tw[(j * k) % n];
            }
            acc
        })
        .collect()
}

pub fn fast_dft(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if !buf.is_empty() {
        plan(buf.len(), inverse).process(&mut buf);
    }
    buf
}

/// Unnormalized DFT in standard (0..N) layout; direct below [`NAIVE_DFT_MAX`].
pub fn dft(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    if x.len() < NAIVE_DFT_MAX {
        naive_dft(x, inverse)
    } else {
        fast_dft(x, inverse)
    }
}

/// In-place 2-D unnormalized DFT of an `n`×`n` row-major array in standard layout.
pub(crate) fn dft2_inplace(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n);
    let fast = if n >= NAIVE_DFT_MAX {
        Some(plan(n, inverse))
    } else {
        None
    };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fast.as_ref().map_or(0, |p| p.get_inplace_scratch_len())];
    let run = |row: &mut [Complex64], scratch: &mut [Complex64]| match &fast {
        Some(p) => p.process_with_scratch(row, scratch),
        None => {
            let out = naive_dft(row, inverse);
            row.copy_from_slice(&out);
        }
    };
    for row in data.chunks_mut(n) {
        run(row, &mut scratch);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        run(&mut col, &mut scratch);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
}

/// Centered index j in [-n, n] to standard position j mod N.
#[inline]
pub(crate) fn std_pos(j: i64, size: usize) -> usize {
    j.rem_euclid(size as i64) as usize
}

/// Centered DFT of a vector sequence: ṽ^k = Σ_j v^j e^{-2πijk/N}.
pub fn dft_vectors(v: &[DVector<f64>], inverse: bool) -> Vec<CVec> {
    let size = v.len();
    let h = ((size - 1) / 2) as i64;
    let t = v.first().map_or(0, |x| x.len());
    let mut out = vec![CVec::zeros(t); size];
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for c in 0..t {
        for j in -h..=h {
            buf[std_pos(j, size)] = Complex64::new(v[(j + h) as usize][c], 0.0);
        }
        let tr = dft(&buf, inverse);
        for k in -h..=h {
            out[(k + h) as usize][c] = tr[std_pos(k, size)];
        }
    }
    out
}

fn dft_cvectors(v: &[CVec], inverse: bool) -> Vec<CVec> {
    let size = v.len();
    let h = ((size - 1) / 2) as i64;
    let t = v.first().map_or(0, |x| x.len());
    let mut out = vec![CVec::zeros(t); size];
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for c in 0..t {
        for j in -h..=h {
            buf[std_pos(j, size)] = v[(j + h) as usize][c];
        }
        let tr = dft(&buf, inverse);
        for k in -h..=h {
            out[(k + h) as usize][c] = tr[std_pos(k, size)];
        }
    }
    out
}

/// Λ̃^N(p, q) on the centered grid p, q in [-n, n].
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSpectrum {
    size: usize,
    values: Vec<f64>,
}

impl LambdaSpectrum {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, p: i64, q: i64) -> f64 {
        let h = ((self.size - 1) / 2) as i64;
        self.values[((p + h) as usize) * self.size + (q + h) as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Inverse 2-D DFT, returning Λ^N(k, l) on the centered grid.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.size;
        let h = ((n - 1) / 2) as i64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        for p in -h..=h {
            for q in -h..=h {
                buf[std_pos(p, n) * n + std_pos(q, n)] = Complex64::new(self.get(p, q), 0.0);
            }
        }
        dft2_inplace(&mut buf, n, true);
        let scale = 1.0 / (n * n) as f64;
        let mut out = vec![0.0; n * n];
        for k in -h..=h {
            for l in -h..=h {
                out[((k + h) as usize) * n + (l + h) as usize] =
                    buf[std_pos(k, n) * n + std_pos(l, n)].re * scale;
            }
        }
        out
    }
}

/// Λ̃^N on the full DFT grid, by direct summation over the support.
pub fn dft2(spec: &LambdaSpec, size: usize) -> Result<LambdaSpectrum> {
    check_size(size, spec.radius())?;
    let h = ((size - 1) / 2) as i64;
    let mut values = Vec::with_capacity(size * size);
    for p in -h..=h {
        for q in -h..=h {
            values.push(spec.dft_value(size, p, q));
        }
    }
    Ok(LambdaSpectrum { size, values })
}

/// Sequence of T×T real blocks A^k for |k| <= L.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSeq {
    block: usize,
    radius: usize,
    blocks: Vec<RMat>,
}

impl MatrixSeq {
    pub fn new(block: usize, radius: usize, blocks: Vec<RMat>) -> Result<Self> {
        if blocks.len() != 2 * radius + 1 {
            return Err(Error::Shape(format!(
                "{} blocks for lag radius {radius}",
                blocks.len()
            )));
        }
        if blocks.iter().any(|b| b.nrows() != block || b.ncols() != block) {
            return Err(Error::Shape(format!("blocks must be {block}x{block}")));
        }
        Ok(MatrixSeq {
            block,
            radius,
            blocks,
        })
    }

    pub fn zeros(block: usize, radius: usize) -> Self {
        MatrixSeq {
            block,
            radius,
            blocks: vec![RMat::zeros(block, block); 2 * radius + 1],
        }
    }

    pub fn from_fn(block: usize, radius: usize, mut f: impl FnMut(i64) -> RMat) -> Self {
        let r = radius as i64;
        let blocks = (-r..=r).map(&mut f).collect();
        MatrixSeq {
            block,
            radius,
            blocks,
        }
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Block at lag `k`; panics outside [-L, L].
    pub fn lag(&self, k: i64) -> &RMat {
        &self.blocks[(k + self.radius as i64) as usize]
    }

    pub fn lag_mut(&mut self, k: i64) -> &mut RMat {
        &mut self.blocks[(k + self.radius as i64) as usize]
    }

    pub fn get(&self, k: i64) -> Option<&RMat> {
        if k.unsigned_abs() as usize > self.radius {
            None
        } else {
            Some(self.lag(k))
        }
    }

    pub fn lags(&self) -> impl Iterator<Item = (i64, &RMat)> {
        let r = self.radius as i64;
        (-r..=r).zip(self.blocks.iter())
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    /// Max over lags of |A^k - transpose(A^{-k})|.
    pub fn symmetry_defect(&self) -> f64 {
        let r = self.radius as i64;
        (-r..=r)
            .map(|k| {
                (self.lag(k) - self.lag(-k).transpose())
                    .iter()
                    .fold(0.0f64, |a, &x| a.max(x.abs()))
            })
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric_pair(&self, tol: f64) -> bool {
        self.symmetry_defect() <= tol
    }

    /// Sup-norm distance, treating missing lags as zero blocks.
    pub fn max_abs_diff(&self, other: &MatrixSeq) -> f64 {
        let r = self.radius.max(other.radius) as i64;
        let zero = RMat::zeros(self.block, self.block);
        (-r..=r)
            .map(|k| {
                let a = self.get(k).unwrap_or(&zero);
                let b = other.get(k).unwrap_or(&zero);
                (a - b).iter().fold(0.0f64, |m, &x| m.max(x.abs()))
            })
            .fold(0.0, f64::max)
    }

    /// Σ_k A^k e^{-2πijk/N}, phases reduced mod N.
    pub fn eval_dft(&self, j: i64, size: usize) -> CMat {
        let mut acc = CMat::zeros(self.block, self.block);
        for (k, b) in self.lags() {
            let m = (j * k).rem_euclid(size as i64);
            let a = -2.0 * PI * m as f64 / size as f64;
            acc += to_complex(b) * Complex64::new(a.cos(), a.sin());
        }
        acc
    }
}

/// Matrix-valued function of ω in [-π, π), Hermitian at every point.
pub trait SpectralDensity {
    fn block_size(&self) -> usize;
    fn eval(&self, omega: f64) -> CMat;
}

impl SpectralDensity for MatrixSeq {
    fn block_size(&self) -> usize {
        self.block
    }

    /// Σ_k A^k e^{-ikω}.
    fn eval(&self, omega: f64) -> CMat {
        let mut acc = CMat::zeros(self.block, self.block);
        for (k, b) in self.lags() {
            let a = -(k as f64) * omega;
            acc += to_complex(b) * Complex64::new(a.cos(), a.sin());
        }
        acc
    }
}

impl<D: SpectralDensity + ?Sized> SpectralDensity for &D {
    fn block_size(&self) -> usize {
        (**self).block_size()
    }

    fn eval(&self, omega: f64) -> CMat {
        (**self).eval(omega)
    }
}

/// Uniform trapezoid nodes ω_i = -π + 2πi/Q.
pub fn omega_grid(q: usize) -> Vec<f64> {
    (0..q).map(|i| -PI + 2.0 * PI * i as f64 / q as f64).collect()
}

/// Smallest and largest eigenvalue of a density over a Q-point grid.
pub fn eigen_range<D: SpectralDensity>(density: &D, q: usize) -> (f64, f64) {
    omega_grid(q).iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| {
        let e = hermitian_eigen(&density.eval(w)).0;
        (lo.min(e[0]), hi.max(e[e.len() - 1]))
    })
}

/// κ ↦ κ/(σ² + κ) applied to the spectrum of a Hermitian matrix; eigenvalues in
/// (-tol, 0) are treated as zero.
pub fn resolvent_matrix(k: &CMat, sigma2: f64, tol: f64) -> Result<CMat> {
    let (mut vals, vecs) = hermitian_eigen(k);
    clip_psd(&mut vals, tol, "resolvent input")?;
    Ok(hermitian_part(&spectral_apply(&vals, &vecs, |x| x / (sigma2 + x))))
}

/// Ã(ω) = K̃(ω)(σ²I + K̃(ω))^{-1}.
#[derive(Clone, Debug)]
pub struct Resolvent<D> {
    base: D,
    sigma2: f64,
    tol: f64,
}

/// Number of grid points on which the resolvent input is checked for positivity.
pub const RESOLVENT_CHECK_GRID: usize = 64;

pub fn resolvent_transform<D: SpectralDensity>(base: D, sigma2: f64, tol: f64) -> Result<Resolvent<D>> {
    if sigma2 <= 0.0 {
        return Err(Error::param("sigma2 must be > 0"));
    }
    let (lo, _) = eigen_range(&base, RESOLVENT_CHECK_GRID);
    if lo < -tol {
        return Err(Error::NotPsd {
            context: "resolvent input density".into(),
            eigenvalue: lo,
        });
    }
    Ok(Resolvent { base, sigma2, tol })
}

impl<D> Resolvent<D> {
    pub fn base(&self) -> &D {
        &self.base
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

impl<D: SpectralDensity> SpectralDensity for Resolvent<D> {
    fn block_size(&self) -> usize {
        self.base.block_size()
    }

    /// Panics if the base density has an eigenvalue below `-tol` at `omega`.
    fn eval(&self, omega: f64) -> CMat {
        let (mut vals, vecs) = hermitian_eigen(&self.base.eval(omega));
        for v in vals.iter_mut() {
            assert!(
                *v >= -self.tol,
                "resolvent input eigenvalue {v:e} at ω={omega} below tolerance"
            );
            *v = v.max(0.0);
        }
        let s2 = self.sigma2;
        hermitian_part(&spectral_apply(&vals, &vecs, |x| x / (s2 + x)))
    }
}

/// Fourier coefficients A^l = (1/2π)∫ D(ω) e^{ilω} dω for |l| <= L_out.
#[derive(Clone, Debug)]
pub struct FourierBlocks {
    pub blocks: MatrixSeq,
    /// Frobenius norm of A^{L_out}.
    pub tail_norm: f64,
}

pub fn inverse_fourier_blocks<D: SpectralDensity>(density: &D, l_out: usize, q: usize) -> FourierBlocks {
    let t = density.block_size();
    let grid = omega_grid(q);
    let values: Vec<CMat> = grid.iter().map(|&w| density.eval(w)).collect();
    let blocks = MatrixSeq::from_fn(t, l_out, |l| {
        let mut acc = CMat::zeros(t, t);
        for (w, v) in grid.iter().zip(&values) {
            let a = l as f64 * w;
            acc += v * Complex64::new(a.cos(), a.sin());
        }
        acc.map(|z| z.re / q as f64)
    });
    let tail_norm = blocks.lag(l_out as i64).norm();
    FourierBlocks { blocks, tail_norm }
}

/// The N Fourier blocks B̃^j = Σ_k B^k e^{-2πijk/N}, j in [-n, n], whose eigenvalues
/// are those of the NT×NT block-circulant matrix with block (j, k) = B^{(k-j) mod N}.
pub fn block_dft_eigvals(seq: &MatrixSeq, size: usize) -> Result<Vec<CMat>> {
    check_size(size, seq.radius())?;
    let tol = 1e-12 * seq.max_abs().max(1.0);
    if !seq.is_symmetric_pair(tol) {
        return Err(Error::Shape(format!(
            "sequence is not symmetric-pair (defect {:e})",
            seq.symmetry_defect()
        )));
    }
    let h = ((size - 1) / 2) as i64;
    Ok((-h..=h)
        .map(|j| hermitian_part(&seq.eval_dft(j, size)))
        .collect())
}

/// Sorted eigenvalues of all blocks together.
pub fn eigenvalue_multiset(blocks: &[CMat]) -> Vec<f64> {
    let mut all: Vec<f64> = blocks.iter().flat_map(|b| hermitian_eigen(b).0).collect();
    all.sort_by(f64::total_cmp);
    all
}

/// Dense NT×NT block-circulant matrix with block (j, k) = B^{(k-j) mod N}.
pub fn assemble_block_circulant(seq: &MatrixSeq, size: usize) -> RMat {
    let t = seq.block_size();
    let h = ((size - 1) / 2) as i64;
    let mut out = RMat::zeros(size * t, size * t);
    for j in -h..=h {
        for k in -h..=h {
            let m = crate::model::wrap(k - j, size);
            if let Some(b) = seq.get(m) {
                let (r, c) = (((j + h) as usize) * t, ((k + h) as usize) * t);
                out.view_mut((r, c), (t, t)).copy_from(b);
            }
        }
    }
    out
}

/// Real orthogonal image of the DFT of v: √2 Im ṽ^k for k < 0, √2 Re ṽ^k for
/// k > 0 and ṽ^0 itself for k = 0, so that Σ‖v_†^k‖² = N Σ‖v^k‖².
#[derive(Clone, Debug, PartialEq)]
pub struct DagVector {
    pub blocks: Vec<DVector<f64>>,
}

pub fn dag_transform(v: &[DVector<f64>]) -> Result<DagVector> {
    let size = v.len();
    if size % 2 == 0 {
        return Err(Error::size(size, "N must be odd"));
    }
    let h = ((size - 1) / 2) as i64;
    let tv = dft_vectors(v, false);
    let r2 = std::f64::consts::SQRT_2;
    let blocks = (-h..=h)
        .map(|k| {
            let z = &tv[(k + h) as usize];
            match k.cmp(&0) {
                std::cmp::Ordering::Less => z.map(|c| r2 * c.im),
                std::cmp::Ordering::Equal => z.map(|c| c.re),
                std::cmp::Ordering::Greater => z.map(|c| r2 * c.re),
            }
        })
        .collect();
    Ok(DagVector { blocks })
}

pub fn dag_inverse(d: &DagVector) -> Vec<DVector<f64>> {
    let size = d.blocks.len();
    let h = ((size - 1) / 2) as i64;
    let r2 = std::f64::consts::SQRT_2;
    let at = |k: i64| &d.blocks[(k + h) as usize];
    let tv: Vec<CVec> = (-h..=h)
        .map(|k| {
            if k == 0 {
                at(0).map(|x| Complex64::new(x, 0.0))
            } else {
                let a = k.abs();
                let re = at(a);
                let im = at(-a);
                let s = if k > 0 { -1.0 } else { 1.0 };
                CVec::from_fn(re.len(), |c, _| Complex64::new(re[c] / r2, s * im[c] / r2))
            }
        })
        .collect();
    dft_cvectors(&tv, true)
        .into_iter()
        .map(|z| z.map(|c| c.re / size as f64))
        .collect()
}
