//! Model inputs: dynamics parameters, the sigmoid and the weight covariance table.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Relative tolerance applied to spectra and eigenvalues, scaled by `lambda_sum`.
pub const TOL_PSD_REL: f64 = 1e-10;

/// Law of the initial membrane potentials U_0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialLaw {
    Dirac(f64),
    Gaussian { mean: f64, var: f64 },
}

impl InitialLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            InitialLaw::Dirac(x) => x,
            InitialLaw::Gaussian { mean, .. } => mean,
        }
    }

    pub fn var(&self) -> f64 {
        match *self {
            InitialLaw::Dirac(_) => 0.0,
            InitialLaw::Gaussian { var, .. } => var,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// leak factor in [0, 1)
    pub gamma: f64,
    /// noise standard deviation
    pub sigma: f64,
    pub theta_bar: f64,
    pub theta_std: f64,
    pub j_bar: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "g")]
    pub gain: f64,
    #[serde(rename = "mu_I")]
    pub initial: InitialLaw,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gamma,
            self.sigma,
            self.theta_bar,
            self.theta_std,
            self.j_bar,
            self.gain,
            self.initial.mean(),
            self.initial.var(),
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("all model parameters must be finite"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::param(format!("gamma = {} not in [0, 1)", self.gamma)));
        }
        if self.sigma <= 0.0 {
            return Err(Error::param(format!("sigma = {} must be > 0", self.sigma)));
        }
        if self.theta_std < 0.0 {
            return Err(Error::param("theta_std must be >= 0"));
        }
        if self.horizon == 0 {
            return Err(Error::param("T must be >= 1"));
        }
        if self.gain <= 0.0 {
            return Err(Error::param(format!("g = {} must be > 0", self.gain)));
        }
        if self.initial.var() < 0.0 {
            return Err(Error::param("initial variance must be >= 0"));
        }
        Ok(())
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn theta2(&self) -> f64 {
        self.theta_std * self.theta_std
    }

    #[inline]
    pub fn f(&self, x: f64) -> f64 {
        sigmoid(x, self.gain)
    }
}

/// f(x) = (1 + tanh(g x)) / 2, with Lipschitz constant g/2.
#[inline]
pub fn sigmoid(x: f64, g: f64) -> f64 {
    0.5 * (1.0 + (g * x).tanh())
}

pub fn sigmoid_lipschitz(g: f64) -> f64 {
    0.5 * g
}

/// Covariance function Λ(k, l) with finite support |k|, |l| <= d.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSpec {
    radius: usize,
    table: Vec<f64>,
}

impl LambdaSpec {
    /// Builds the table from `(k, l, value)` triples, filling Λ(-k,-l) from Λ(k,l)
    /// when only one of the pair is given.
    pub fn from_triples(radius: Option<usize>, triples: &[(i64, i64, f64)]) -> Result<Self> {
        let d = match radius {
            Some(d) => d,
            None => triples
                .iter()
                .map(|&(k, l, _)| k.unsigned_abs().max(l.unsigned_abs()) as usize)
                .max()
                .unwrap_or(0),
        };
        let w = 2 * d + 1;
        let mut slots: Vec<Option<f64>> = vec![None; w * w];
        let idx = |k: i64, l: i64| ((k + d as i64) as usize) * w + (l + d as i64) as usize;
        for &(k, l, v) in triples {
            if !v.is_finite() {
                return Err(Error::InvalidLambda(format!("non-finite value at ({k},{l})")));
            }
            if k.unsigned_abs() as usize > d || l.unsigned_abs() as usize > d {
                return Err(Error::InvalidLambda(format!(
                    "entry ({k},{l}) outside support radius {d}"
                )));
            }
            let i = idx(k, l);
            if let Some(prev) = slots[i] {
                if prev != v {
                    return Err(Error::InvalidLambda(format!(
                        "entry ({k},{l}) given twice with different values"
                    )));
                }
            }
            slots[i] = Some(v);
        }
        let mut table = vec![0.0; w * w];
        for k in -(d as i64)..=d as i64 {
            for l in -(d as i64)..=d as i64 {
                let a = slots[idx(k, l)];
                let b = slots[idx(-k, -l)];
                table[idx(k, l)] = match (a, b) {
                    (Some(x), Some(y)) => {
                        if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                            return Err(Error::InvalidLambda(format!(
                                "Λ({k},{l}) = {x} but Λ({},{}) = {y}; the table must be even",
                                -k, -l
                            )));
                        }
                        x
                    }
                    (Some(x), None) | (None, Some(x)) => x,
                    (None, None) => 0.0,
                };
            }
        }
        Ok(LambdaSpec { radius: d, table })
    }

    /// Raw dense table in row order k = -d..=d, l = -d..=d. No evenness completion.
    pub fn from_table(radius: usize, table: Vec<f64>) -> Result<Self> {
        let w = 2 * radius + 1;
        if table.len() != w * w {
            return Err(Error::InvalidLambda(format!(
                "table has {} entries, expected {}",
                table.len(),
                w * w
            )));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLambda("non-finite table entry".into()));
        }
        Ok(LambdaSpec { radius, table })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Λ(k, l), zero outside the support.
    #[inline]
    pub fn get(&self, k: i64, l: i64) -> f64 {
        let d = self.radius as i64;
        if k.abs() > d || l.abs() > d {
            return 0.0;
        }
        self.table[((k + d) as usize) * (2 * self.radius + 1) + (l + d) as usize]
    }

    /// Non-zero entries in row order.
    pub fn entries(&self) -> Vec<(i64, i64, f64)> {
        let d = self.radius as i64;
        let mut out = Vec::new();
        for k in -d..=d {
            for l in -d..=d {
                let v = self.get(k, l);
                if v != 0.0 {
                    out.push((k, l, v));
                }
            }
        }
        out
    }

    pub fn lambda_sum(&self) -> f64 {
        self.table.iter().map(|v| v.abs()).sum()
    }

    pub fn lambda_min(&self) -> f64 {
        self.table.iter().sum()
    }

    pub fn tol_psd(&self) -> f64 {
        TOL_PSD_REL * self.lambda_sum().max(f64::MIN_POSITIVE)
    }

    /// Real part of Λ̃(ω₁, ω₂) = Σ Λ(k,l) e^{-i(kω₁ + lω₂)}. Exact for even tables.
    pub fn spectrum(&self, w1: f64, w2: f64) -> f64 {
        self.entries()
            .iter()
            .map(|&(k, l, v)| v * (k as f64 * w1 + l as f64 * w2).cos())
            .sum()
    }

    /// Λ̃^N(p, q). Phases are reduced mod N before the cosine.
    pub fn dft_value(&self, n: usize, p: i64, q: i64) -> f64 {
        let nn = n as i64;
        self.entries()
            .iter()
            .map(|&(k, l, v)| {
                let m = (k * p + l * q).rem_euclid(nn);
                v * (2.0 * PI * m as f64 / n as f64).cos()
            })
            .sum()
    }

    /// Hex SHA-256 of the dense table, used to tag output files.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.radius as u64).to_le_bytes());
        for v in &self.table {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Checks `n` is odd and large enough that the support of radius `radius` does not alias.
pub fn check_size(n: usize, radius: usize) -> Result<()> {
    if n % 2 == 0 {
        return Err(Error::size(n, "N must be odd"));
    }
    if n < 2 * radius + 1 {
        return Err(Error::size(
            n,
            format!("N must be >= 2d+1 = {}", 2 * radius + 1),
        ));
    }
    Ok(())
}

/// Maps any integer onto the centered representative in [-n, n] of Z/(2n+1).
#[inline]
pub fn wrap(i: i64, size: usize) -> i64 {
    let s = size as i64;
    let h = (s - 1) / 2;
    (i + h).rem_euclid(s) - h
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Entry { k: i64, l: i64 },
    Frequency { omega1: f64, omega2: f64 },
    Dft { n: usize, p: i64, q: i64 },
    Global,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Entry { k, l } => write!(f, "entry ({k},{l})"),
            Location::Frequency { omega1, omega2 } => {
                write!(f, "ω₁={}, ω₂={}", fmt_angle(*omega1), fmt_angle(*omega2))
            }
            Location::Dft { n, p, q } => write!(f, "N={n}, (p,q)=({p},{q})"),
            Location::Global => write!(f, "global"),
        }
    }
}

fn fmt_angle(w: f64) -> String {
    if (w - PI).abs() < 1e-12 {
        "π".into()
    } else if (w + PI).abs() < 1e-12 {
        "-π".into()
    } else if w.abs() < 1e-12 {
        "0".into()
    } else {
        format!("{w:.6}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub location: Location,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub lambda_sum: f64,
    pub lambda_min: f64,
    pub min_spectrum: f64,
    pub violations: Vec<Violation>,
}

/// Grid angle ω_i = -π + 2πi/G, reported in (-π, π].
fn grid_angle(i: usize, g: usize) -> f64 {
    if i == 0 {
        PI
    } else {
        -PI + 2.0 * PI * i as f64 / g as f64
    }
}

/// Checks evenness, Λ^min > 0 and positivity of Λ̃ on a `grid_resolution`² grid and
/// on the DFT grid of every size in `odd_sizes`. Each failed check reports its worst point.
pub fn validate_lambda(
    spec: &LambdaSpec,
    grid_resolution: usize,
    odd_sizes: &[usize],
) -> Result<ValidationReport> {
    let d = spec.radius();
    if grid_resolution < 2 * d + 1 {
        return Err(Error::InvalidLambda(format!(
            "grid resolution {grid_resolution} below 2d+1 = {}",
            2 * d + 1
        )));
    }
    for &n in odd_sizes {
        check_size(n, d)?;
    }
    let tol = spec.tol_psd();
    let mut violations = Vec::new();

    let di = d as i64;
    let mut worst_odd: Option<(i64, i64, f64)> = None;
    for k in -di..=di {
        for l in -di..=di {
            let gap = (spec.get(k, l) - spec.get(-k, -l)).abs();
            if gap > 0.0 && worst_odd.is_none_or(|w| gap > w.2) {
                worst_odd = Some((k, l, gap));
            }
        }
    }
    if let Some((k, l, gap)) = worst_odd {
        violations.push(Violation {
            check: "evenness".into(),
            location: Location::Entry { k, l },
            value: gap,
        });
    }

    let lambda_min = spec.lambda_min();
    if lambda_min <= 0.0 {
        violations.push(Violation {
            check: "lambda_min".into(),
            location: Location::Global,
            value: lambda_min,
        });
    }

    let mut min_grid = (f64::INFINITY, 0.0, 0.0);
    for i in 0..grid_resolution {
        let w1 = grid_angle(i, grid_resolution);
        for j in 0..grid_resolution {
            let w2 = grid_angle(j, grid_resolution);
            let v = spec.spectrum(w1, w2);
            if v < min_grid.0 {
                min_grid = (v, w1, w2);
            }
        }
    }
    let mut min_spectrum = min_grid.0;
    if min_grid.0 < -tol {
        violations.push(Violation {
            check: "spectrum_grid".into(),
            location: Location::Frequency {
                omega1: min_grid.1,
                omega2: min_grid.2,
            },
            value: min_grid.0,
        });
    }

    for &n in odd_sizes {
        let h = ((n - 1) / 2) as i64;
        let mut worst = (f64::INFINITY, 0, 0);
        for p in -h..=h {
            for q in -h..=h {
                let v = spec.dft_value(n, p, q);
                if v < worst.0 {
                    worst = (v, p, q);
                }
            }
        }
        min_spectrum = min_spectrum.min(worst.0);
        if worst.0 < -tol {
            violations.push(Violation {
                check: "spectrum_dft".into(),
                location: Location::Dft {
                    n,
                    p: worst.1,
                    q: worst.2,
                },
                value: worst.0,
            });
        }
    }

    Ok(ValidationReport {
        valid: violations.is_empty(),
        lambda_sum: spec.lambda_sum(),
        lambda_min,
        min_spectrum,
        violations,
    })
}

/// Model constants bounding spectra and functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub rho_k: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl DerivedConstants {
    pub fn new(params: &ModelParams, spec: &LambdaSpec) -> Result<Self> {
        let t = params.horizon as f64;
        let s2 = params.sigma2();
        let th2 = params.theta2();
        let lsum = spec.lambda_sum();
        let lmin = spec.lambda_min();
        if lmin <= 0.0 {
            return Err(Error::InvalidLambda(format!(
                "lambda_min = {lmin} must be > 0"
            )));
        }
        let rho_k = t * (th2 + lsum);
        Ok(DerivedConstants {
            rho_k,
            alpha: rho_k / (s2 + rho_k),
            beta1: rho_k / (2.0 * s2),
            beta2: t * params.j_bar * params.j_bar * (s2 + th2 + lsum) / (2.0 * s2 * lmin),
        })
    }
}
