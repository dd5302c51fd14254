//! Seeded multi-trial network runs compared against the limit law.
//!
//! Statistics compared entrywise: c_t and M^l_{st} for 0 <= l <= d (negative lags are
//! transposes). Trials run in parallel and are merged in (N, trial) order, so the
//! report does not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::mean_field::{solve_limit_law, LimitLaw, MomentData};
use crate::model::{LambdaSpec, ModelParams};
use crate::rng::StreamSeed;
use crate::sampling::{sample_initial, sample_noise, sample_thresholds, sample_weights, NoiseBundle, WeightMatrix};
use crate::simulation::{empirical_moments, simulate};

/// Half-width of the acceptance band in standard errors.
pub const Z_BAND: f64 = 4.0;
pub const SLOPE_RANGE: (f64, f64) = (-0.75, -0.25);

/// Names of the compared statistics, in flattening order.
pub fn stat_names(horizon: usize, radius: usize) -> Vec<String> {
    let mut out: Vec<String> = (1..=horizon).map(|t| format!("c[{t}]")).collect();
    for l in 0..=radius {
        for s in 1..=horizon {
            for t in 1..=horizon {
                out.push(format!("M{l}[{s},{t}]"));
            }
        }
    }
    out
}

pub fn flatten(m: &MomentData) -> Vec<f64> {
    let t = m.horizon();
    let mut out: Vec<f64> = m.c.iter().copied().collect();
    for l in 0..=m.radius() as i64 {
        let b = m.m.lag(l);
        for s in 0..t {
            for u in 0..t {
                out.push(b[(s, u)]);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryStat {
    pub name: String,
    pub target: f64,
    pub mean: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeResult {
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: usize,
    pub entries: Vec<EntryStat>,
    /// max |mean - target| over entries.
    pub sup_error: f64,
    pub max_abs_z: f64,
    /// sqrt of the trial average of the squared per-trial sup error.
    pub rms_trial_sup_error: f64,
    pub within_band: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchedEntry {
    pub name: String,
    pub mean: f64,
    /// Noise-only standard error of the trial mean.
    pub se_noise: f64,
    /// Adds the single-draw disorder variance (annealed minus quenched scatter).
    pub se_total: f64,
    pub z_noise: f64,
    pub z_total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchedResult {
    #[serde(rename = "N")]
    pub n: usize,
    pub entries: Vec<QuenchedEntry>,
    pub sup_error: f64,
    pub max_abs_z_total: f64,
    pub max_abs_z_noise: f64,
    pub within_band: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub quadrature_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub seed: u64,
    pub trials: usize,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub targets: Targets,
    pub sizes: Vec<SizeResult>,
    pub quenched: Vec<QuenchedResult>,
    /// Least-squares slope of log(rms_trial_sup_error) against log N.
    pub slope: f64,
    /// Same fit on the trial-averaged sup error.
    pub slope_mean_error: f64,
    pub slope_in_range: bool,
    pub largest_within_band: bool,
    pub quenched_within_band: Option<bool>,
    pub pass: bool,
}

/// Statistics of one trajectory of the N-neuron network.
pub fn trial_stats(
    params: &ModelParams,
    spec: &LambdaSpec,
    n: usize,
    seed: StreamSeed,
    quenched: bool,
) -> Result<Vec<f64>> {
    let disorder = if quenched { seed.with_trial(0) } else { seed };
    let j: WeightMatrix = sample_weights(spec, params.j_bar, n, disorder)?;
    let bundle = NoiseBundle::new(
        n,
        params.horizon,
        sample_thresholds(params, n, disorder),
        sample_noise(params, n, seed),
        sample_initial(params, n, seed),
    )?;
    let traj = simulate(params, &j, &bundle)?;
    let m: MomentData = empirical_moments(&traj, params, spec.radius())?.into();
    Ok(flatten(&m))
}

fn run_trials(cfg: &Config, n: usize, quenched: bool) -> Result<Vec<Vec<f64>>> {
    let e = &cfg.experiment;
    let base = StreamSeed::new(e.seed);
    (0..e.trials as u64)
        .into_par_iter()
        .map(|t| {
            trial_stats(&cfg.params, &cfg.spec, n, base.with_trial(t), quenched).map_err(|err| match err {
                Error::NonFinite { .. } | Error::NotPsd { .. } => err,
                other => Error::Config(format!("N={n}, trial={t}: {other}")),
            })
        })
        .collect()
}

fn mean_var(rows: &[Vec<f64>], k: usize) -> (f64, f64) {
    let m = rows.len() as f64;
    let mean = rows.iter().map(|r| r[k]).sum::<f64>() / m;
    let var = if rows.len() > 1 {
        rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn z_score(err: f64, se: f64) -> f64 {
    if se > 0.0 {
        err / se
    } else if err.abs() <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn summarize(n: usize, rows: &[Vec<f64>], targets: &Targets) -> SizeResult {
    let m = rows.len();
    let entries: Vec<EntryStat> = targets
        .names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let (mean, var) = mean_var(rows, k);
            let se = (var / m as f64).sqrt();
            let target = targets.values[k];
            EntryStat {
                name: name.clone(),
                target,
                mean,
                se,
                z: z_score(mean - target, se),
            }
        })
        .collect();
    let sup_error = entries.iter().map(|e| (e.mean - e.target).abs()).fold(0.0, f64::max);
    let max_abs_z = entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
    let ms = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&targets.values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
                .powi(2)
        })
        .sum::<f64>()
        / m as f64;
    SizeResult {
        n,
        trials: m,
        entries,
        sup_error,
        max_abs_z,
        rms_trial_sup_error: ms.sqrt(),
        within_band: max_abs_z <= Z_BAND,
    }
}

fn summarize_quenched(n: usize, rows: &[Vec<f64>], annealed: &[Vec<f64>], targets: &Targets) -> QuenchedResult {
    let m = rows.len() as f64;
    let entries: Vec<QuenchedEntry> = targets
        .names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let (mean, var_q) = mean_var(rows, k);
            let (_, var_a) = mean_var(annealed, k);
            let se_noise = (var_q / m).sqrt();
            let se_total = (var_q / m + (var_a - var_q).max(0.0)).sqrt();
            let err = mean - targets.values[k];
            QuenchedEntry {
                name: name.clone(),
                mean,
                se_noise,
                se_total,
                z_noise: z_score(err, se_noise),
                z_total: z_score(err, se_total),
            }
        })
        .collect();
    let sup_error = entries
        .iter()
        .zip(&targets.values)
        .map(|(e, t)| (e.mean - t).abs())
        .fold(0.0, f64::max);
    let max_abs_z_total = entries.iter().map(|e| e.z_total.abs()).fold(0.0, f64::max);
    let max_abs_z_noise = entries.iter().map(|e| e.z_noise.abs()).fold(0.0, f64::max);
    QuenchedResult {
        n,
        entries,
        sup_error,
        max_abs_z_total,
        max_abs_z_noise,
        within_band: max_abs_z_total <= Z_BAND,
    }
}

/// Least-squares slope of log y against log x; NaN with fewer than two usable points.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn targets_of(law: &LimitLaw, radius: usize) -> Targets {
    let t = law.params.horizon;
    Targets {
        names: stat_names(t, radius),
        values: flatten(&law.m_e.truncated(radius)),
        quadrature_residual: law.report.residual,
    }
}

/// Runs every N of the config; `on_size` sees each annealed result (and the quenched
/// one, when enabled) as soon as it is complete.
pub fn run_convergence_with(
    cfg: &Config,
    mut on_size: impl FnMut(&SizeResult, Option<&QuenchedResult>) -> Result<()>,
) -> Result<ConvergenceReport> {
    let e = &cfg.experiment;
    let law = solve_limit_law(&cfg.params, &cfg.spec, &e.mean_field())?;
    let targets = targets_of(&law, cfg.spec.radius());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(e.threads)
        .build()
        .map_err(|err| Error::Config(format!("thread pool: {err}")))?;
    let mut sizes = Vec::new();
    let mut quenched = Vec::new();
    for &n in &e.n_list {
        let rows = pool.install(|| run_trials(cfg, n, false))?;
        let res = summarize(n, &rows, &targets);
        let q = if e.quenched {
            let qrows = pool.install(|| run_trials(cfg, n, true))?;
            Some(summarize_quenched(n, &qrows, &rows, &targets))
        } else {
            None
        };
        on_size(&res, q.as_ref())?;
        sizes.push(res);
        quenched.extend(q);
    }
    let ns: Vec<f64> = sizes.iter().map(|s| s.n as f64).collect();
    let slope = log_log_slope(&ns, &sizes.iter().map(|s| s.rms_trial_sup_error).collect::<Vec<_>>());
    let slope_mean_error = log_log_slope(&ns, &sizes.iter().map(|s| s.sup_error).collect::<Vec<_>>());
    let slope_in_range = slope >= SLOPE_RANGE.0 && slope <= SLOPE_RANGE.1;
    let largest_within_band = sizes.last().is_some_and(|s| s.within_band);
    let quenched_within_band = quenched.last().map(|q| q.within_band);
    let pass = largest_within_band
        && quenched_within_band.unwrap_or(true)
        && (sizes.len() < 2 || slope_in_range);
    Ok(ConvergenceReport {
        seed: e.seed,
        trials: e.trials,
        n_list: e.n_list.clone(),
        targets,
        sizes,
        quenched,
        slope,
        slope_mean_error,
        slope_in_range,
        largest_within_band,
        quenched_within_band,
        pass,
    })
}

pub fn run_convergence(cfg: &Config) -> Result<ConvergenceReport> {
    run_convergence_with(cfg, |_, _| Ok(()))
}

/// CSV table for one size: name, target, mean, se, z.
pub fn size_csv(res: &SizeResult) -> String {
    let mut out = String::from("name,target,mean,se,z\n");
    for e in &res.entries {
        out.push_str(&format!("{},{:e},{:e},{:e},{:e}\n", e.name, e.target, e.mean, e.se, e.z));
    }
    out
}

pub fn quenched_csv(res: &QuenchedResult) -> String {
    let mut out = String::from("name,mean,se_noise,se_total,z_noise,z_total\n");
    for e in &res.entries {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e}\n",
            e.name, e.mean, e.se_noise, e.se_total, e.z_noise, e.z_total
        ));
    }
    out
}
