//! Finite-network dynamics, empirical moments and the Ψ coordinate maps.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::sampling::{NoiseBundle, WeightMatrix};
use crate::spectral::{MatrixSeq, RMat};

/// Membrane potentials U^j_t for j in [-n, n], t in [0, T].
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    size: usize,
    horizon: usize,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn new(size: usize, horizon: usize, values: Vec<f64>) -> Result<Self> {
        if size % 2 == 0 || values.len() != size * (horizon + 1) {
            return Err(Error::Shape(format!(
                "trajectory of {} values for N={size}, T={horizon}",
                values.len()
            )));
        }
        Ok(Trajectory {
            size,
            horizon,
            values,
        })
    }

    pub fn from_fn(size: usize, horizon: usize, mut f: impl FnMut(i64, usize) -> f64) -> Self {
        let h = ((size - 1) / 2) as i64;
        let mut values = Vec::with_capacity(size * (horizon + 1));
        for j in -h..=h {
            for t in 0..=horizon {
                values.push(f(j, t));
            }
        }
        Trajectory {
            size,
            horizon,
            values,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// U_t of the neuron at centered position `pos` (= j + n).
    #[inline]
    pub fn get(&self, pos: usize, t: usize) -> f64 {
        self.values[pos * (self.horizon + 1) + t]
    }

    /// Whole path (U_0, ..., U_T) of the neuron at centered position `pos`.
    pub fn neuron(&self, pos: usize) -> &[f64] {
        let w = self.horizon + 1;
        &self.values[pos * w..(pos + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// U^j_t = γU^j_{t-1} + Σ_i J_ji f(U^i_{t-1}) + θ_j + B^j_{t-1}, summing i = -n..n in order.
pub fn simulate(params: &ModelParams, j: &WeightMatrix, noise: &NoiseBundle) -> Result<Trajectory> {
    let n = j.size();
    let horizon = params.horizon;
    if noise.size() != n || noise.horizon() != horizon {
        return Err(Error::Shape(format!(
            "weights are {n}x{n} but noise is for N={}, T={}",
            noise.size(),
            noise.horizon()
        )));
    }
    let w = horizon + 1;
    let mut values = vec![0.0; n * w];
    for pos in 0..n {
        values[pos * w] = noise.initial[pos];
    }
    let mut rates = vec![0.0; n];
    let h = ((n - 1) / 2) as i64;
    for t in 1..=horizon {
        for pos in 0..n {
            rates[pos] = params.f(values[pos * w + t - 1]);
        }
        for pos in 0..n {
            let mut acc = 0.0;
            for (jw, r) in j.row(pos).iter().zip(&rates) {
                acc += jw * r;
            }
            let u = params.gamma * values[pos * w + t - 1]
                + acc
                + noise.thresholds[pos]
                + noise.noise_at(pos, t - 1);
            if !u.is_finite() {
                return Err(Error::NonFinite {
                    neuron: pos as i64 - h,
                    time: t,
                });
            }
            values[pos * w + t] = u;
        }
    }
    Ok(Trajectory {
        size: n,
        horizon,
        values,
    })
}

/// c_hat_t = (J̄/N) Σ_j f(U^j_{t-1}) and M_hat^k_{st} = (1/N) Σ_j f(U^j_{s-1}) f(U^{j+k}_{t-1}).
/// Row and column index s-1, t-1 of each block.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMoments {
    pub c_hat: DVector<f64>,
    pub m_hat: MatrixSeq,
}

pub fn empirical_moments(traj: &Trajectory, params: &ModelParams, k_lag: usize) -> Result<EmpiricalMoments> {
    let n = traj.size();
    let t = traj.horizon();
    if 2 * k_lag + 1 > n {
        return Err(Error::size(n, format!("lag radius {k_lag} exceeds (N-1)/2")));
    }
    let mut rates = vec![0.0; n * t];
    for pos in 0..n {
        for tau in 0..t {
            rates[pos * t + tau] = params.f(traj.get(pos, tau));
        }
    }
    let inv_n = 1.0 / n as f64;
    let mut c_hat = DVector::zeros(t);
    for tau in 0..t {
        let mut acc = 0.0;
        for pos in 0..n {
            acc += rates[pos * t + tau];
        }
        c_hat[tau] = params.j_bar * inv_n * acc;
    }
    let mut m_hat = MatrixSeq::zeros(t, k_lag);
    for k in 0..=k_lag as i64 {
        let mut m = RMat::zeros(t, t);
        for pos in 0..n {
            let other = (pos as i64 + k).rem_euclid(n as i64) as usize;
            let a = &rates[pos * t..(pos + 1) * t];
            let b = &rates[other * t..(other + 1) * t];
            for s in 0..t {
                for r in 0..t {
                    m[(s, r)] += a[s] * b[r];
                }
            }
        }
        m *= inv_n;
        *m_hat.lag_mut(-k) = m.transpose();
        *m_hat.lag_mut(k) = m;
    }
    Ok(EmpiricalMoments { c_hat, m_hat })
}

/// Σ_{i<t} γ^i, without the (γ^t - 1)/(γ - 1) cancellation.
pub fn geometric_sum(gamma: f64, t: usize) -> f64 {
    let mut acc = 0.0;
    let mut p = 1.0;
    for _ in 0..t {
        acc += p;
        p *= gamma;
    }
    acc
}

/// v_0 = u_0, v_s = u_s - γu_{s-1} - θ̄.
pub fn psi(u: &[f64], params: &ModelParams) -> Vec<f64> {
    let mut v = Vec::with_capacity(u.len());
    if let Some(&u0) = u.first() {
        v.push(u0);
    }
    for s in 1..u.len() {
        v.push(u[s] - params.gamma * u[s - 1] - params.theta_bar);
    }
    v
}

/// u_t = Σ_{i=0}^{t} γ^i v_{t-i} + θ̄ Σ_{i<t} γ^i.
pub fn psi_inverse(v: &[f64], params: &ModelParams) -> Vec<f64> {
    let g = params.gamma;
    (0..v.len())
        .map(|t| {
            let mut acc = 0.0;
            let mut p = 1.0;
            for i in 0..=t {
                acc += p * v[t - i];
                p *= g;
            }
            acc + params.theta_bar * geometric_sum(g, t)
        })
        .collect()
}
