//! Exact samplers for the weights J, thresholds Θ, noise B and initial states.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Complex64;
use crate::model::{check_size, InitialLaw, LambdaSpec, ModelParams};
use crate::rng::{substream, StreamSeed, INITIAL, NOISE, THRESHOLDS, WEIGHTS};
use crate::spectral::{dft2, dft2_inplace, std_pos};

/// N×N weights J_ij, i, j in [-n, n], stored row-major in centered order.
/// Row i holds the inputs of neuron i: U^i receives Σ_j J_ij f(U^j).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    size: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(size: usize) -> Self {
        WeightMatrix {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn from_fn(size: usize, mut f: impl FnMut(i64, i64) -> f64) -> Self {
        let h = ((size - 1) / 2) as i64;
        let mut data = Vec::with_capacity(size * size);
        for i in -h..=h {
            for j in -h..=h {
                data.push(f(i, j));
            }
        }
        WeightMatrix { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: i64, j: i64) -> f64 {
        let h = ((self.size - 1) / 2) as i64;
        self.data[((i + h) as usize) * self.size + (j + h) as usize]
    }

    /// Row of J for postsynaptic neuron at centered position `pos` (= i + n).
    pub fn row(&self, pos: usize) -> &[f64] {
        &self.data[pos * self.size..(pos + 1) * self.size]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Samples J with E J_ij = J̄/N and cov(J_ij, J_kl) = Λ((k-i) mod N, (l-j) mod N)/N.
///
/// The doubly circulant covariance has eigenvalues Λ̃^N(p,q)/N. Complex normals are
/// paired across (p,q) and (-p,-q) so the inverse 2-D DFT is real; the self-paired
/// (0,0) mode is drawn real.
pub fn sample_weights(
    spec: &LambdaSpec,
    j_bar: f64,
    size: usize,
    seed: StreamSeed,
) -> Result<WeightMatrix> {
    check_size(size, spec.radius())?;
    let spectrum = dft2(spec, size)?;
    let tol = spec.tol_psd();
    let h = ((size - 1) / 2) as i64;
    let n = size;
    let centered = |a: usize| if a as i64 > h { a as i64 - n as i64 } else { a as i64 };
    let mut rng = substream(seed, WEIGHTS, size);
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..n * n {
        let (p0, q0) = (a / n, a % n);
        let b = ((n - p0) % n) * n + (n - q0) % n;
        if b < a {
            continue;
        }
        let s = spectrum.get(centered(p0), centered(q0)) / n as f64;
        if s < -tol / n as f64 {
            return Err(Error::NotPsd {
                context: format!("weight covariance eigenvalue at (p,q)=({},{})", centered(p0), centered(q0)),
                eigenvalue: s,
            });
        }
        let amp = s.max(0.0).sqrt();
        if a == b {
            let z: f64 = rng.sample(StandardNormal);
            buf[a] = Complex64::new(amp * z, 0.0);
        } else {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let w = Complex64::new(amp * x * inv_sqrt2, amp * y * inv_sqrt2);
            buf[a] = w;
            buf[b] = w.conj();
        }
    }
    dft2_inplace(&mut buf, n, true);
    let scale = 1.0 / n as f64;
    let max_re = buf.iter().fold(0.0f64, |m, z| m.max(z.re.abs())) * scale;
    let max_im = buf.iter().fold(0.0f64, |m, z| m.max(z.im.abs())) * scale;
    assert!(
        max_im <= 1e-10 * max_re.max(1.0),
        "spectral sampler produced imaginary residue {max_im:e}"
    );
    let mean = j_bar / n as f64;
    Ok(WeightMatrix::from_fn(size, |i, j| {
        mean + buf[std_pos(i, n) * n + std_pos(j, n)].re * scale
    }))
}

/// Thresholds, noise and initial conditions for one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseBundle {
    size: usize,
    horizon: usize,
    /// θ_j, centered order.
    pub thresholds: Vec<f64>,
    /// B^j_t at index (j + n)·T + t, t in [0, T-1].
    pub noise: Vec<f64>,
    /// U^j_0, centered order.
    pub initial: Vec<f64>,
}

impl NoiseBundle {
    pub fn new(
        size: usize,
        horizon: usize,
        thresholds: Vec<f64>,
        noise: Vec<f64>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if thresholds.len() != size || initial.len() != size || noise.len() != size * horizon {
            return Err(Error::Shape(format!(
                "noise bundle for N={size}, T={horizon} has lengths {}, {}, {}",
                thresholds.len(),
                noise.len(),
                initial.len()
            )));
        }
        Ok(NoiseBundle {
            size,
            horizon,
            thresholds,
            noise,
            initial,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// B^j_t for centered position `pos`.
    #[inline]
    pub fn noise_at(&self, pos: usize, t: usize) -> f64 {
        self.noise[pos * self.horizon + t]
    }
}

fn normals(rng: &mut impl Rng, count: usize, mean: f64, sd: f64) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            mean + sd * z
        })
        .collect()
}

pub fn sample_thresholds(params: &ModelParams, size: usize, seed: StreamSeed) -> Vec<f64> {
    let mut rng = substream(seed, THRESHOLDS, size);
    normals(&mut rng, size, params.theta_bar, params.theta_std)
}

pub fn sample_noise(params: &ModelParams, size: usize, seed: StreamSeed) -> Vec<f64> {
    let mut rng = substream(seed, NOISE, size);
    normals(&mut rng, size * params.horizon, 0.0, params.sigma)
}

pub fn sample_initial(params: &ModelParams, size: usize, seed: StreamSeed) -> Vec<f64> {
    match params.initial {
        InitialLaw::Dirac(x) => vec![x; size],
        InitialLaw::Gaussian { mean, var } => {
            let mut rng = substream(seed, INITIAL, size);
            normals(&mut rng, size, mean, var.sqrt())
        }
    }
}

pub fn sample_noise_bundle(params: &ModelParams, size: usize, seed: StreamSeed) -> NoiseBundle {
    NoiseBundle {
        size,
        horizon: params.horizon,
        thresholds: sample_thresholds(params, size, seed),
        noise: sample_noise(params, size, seed),
        initial: sample_initial(params, size, seed),
    }
}
