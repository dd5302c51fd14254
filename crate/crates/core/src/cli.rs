//! Command-line front end. Exit codes: 0 success, 1 runtime error, 2 invalid input,
//! 64 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::harness::{quenched_csv, run_convergence_with, size_csv};
use crate::mean_field::{solve_limit_law, CovSeq, LimitLaw};
use crate::model::{validate_lambda, InitialLaw};
use crate::rate::{rate_h, rate_h_nu, GaussianCandidate, NuPack, RateReport};
use crate::rng::StreamSeed;
use crate::sampling::{sample_noise_bundle, sample_weights};
use crate::simulation::{empirical_moments, simulate};
use crate::spectral::{MatrixSeq, RMat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable that overrides the configured output directory of `converge`.
pub const OUT_DIR_ENV: &str = "RATENET_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "ratenet", version, about = "Correlated rate-neuron networks: simulation, limit law, rate function")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Trajectory,
    Moments,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check evenness, Λ^min and positivity of the spectrum of Λ.
    ValidateLambda {
        #[arg(long)]
        config: PathBuf,
        /// Grid resolution per axis (default from the config).
        #[arg(long)]
        grid: Option<usize>,
        /// Sizes whose DFT spectra are checked (default: the config's N_list).
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Draw one weight matrix and print it as CSV.
    SampleWeights {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate trajectories and print them (CSV) or their empirical moments (JSON).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = Emit::Moments)]
        emit: Emit,
    },
    /// Solve the limit-law recursion and print it as JSON.
    SolveLimit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate H or H^ν on a Gaussian candidate.
    Rate {
        #[arg(long)]
        config: PathBuf,
        /// Candidate JSON file, or `limit` for the limit law itself.
        #[arg(long, default_value = "limit")]
        candidate: String,
        /// `self` for H, or a limit-law JSON file (as printed by solve-limit) for H^ν.
        #[arg(long, default_value = "self")]
        nu: String,
    },
    /// Multi-trial convergence experiment against the limit law.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

type Matrix = Vec<Vec<f64>>;

fn rows(m: &RMat) -> Matrix {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &Matrix, t: usize, what: &str) -> Result<RMat> {
    if rows.len() != t || rows.iter().any(|r| r.len() != t) {
        return Err(Error::Shape(format!("{what} must be {t}x{t}")));
    }
    Ok(RMat::from_fn(t, t, |i, j| rows[i][j]))
}

fn lag_map(seq: &MatrixSeq) -> BTreeMap<i64, Matrix> {
    seq.lags().map(|(l, b)| (l, rows(b))).collect()
}

/// Lags keyed by integer; missing negative lags are filled by transposition.
fn seq_from_map(map: &BTreeMap<i64, Matrix>, t: usize, what: &str) -> Result<MatrixSeq> {
    let r = map.keys().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0);
    if !map.contains_key(&0) {
        return Err(Error::Shape(format!("{what} needs lag 0")));
    }
    let mut blocks = Vec::with_capacity(2 * r + 1);
    for l in -(r as i64)..=r as i64 {
        let b = match (map.get(&l), map.get(&-l)) {
            (Some(m), _) => from_rows(m, t, what)?,
            (None, Some(m)) => from_rows(m, t, what)?.transpose(),
            (None, None) => RMat::zeros(t, t),
        };
        blocks.push(b);
    }
    let seq = MatrixSeq::new(t, r, blocks)?;
    if seq.symmetry_defect() > 1e-12 * seq.max_abs().max(1.0) {
        return Err(Error::Shape(format!("{what}: lag -l must be the transpose of lag l")));
    }
    Ok(seq)
}

#[derive(Serialize, Deserialize)]
struct LimitMeta {
    #[serde(rename = "Q_gh")]
    q_gh: usize,
    #[serde(rename = "Q_check")]
    q_check: usize,
    residual: f64,
    strict_prop53: bool,
}

#[derive(Serialize, Deserialize)]
struct LimitLawJson {
    c_e: Vec<f64>,
    #[serde(rename = "K_e")]
    k_e: BTreeMap<i64, Matrix>,
    #[serde(rename = "M_e", default, skip_serializing_if = "Option::is_none")]
    m_e: Option<BTreeMap<i64, Matrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<LimitMeta>,
}

impl LimitLawJson {
    fn of(law: &LimitLaw) -> Self {
        LimitLawJson {
            c_e: law.c_e.iter().copied().collect(),
            k_e: lag_map(&law.k_e.seq),
            m_e: Some(lag_map(&law.m_e.m)),
            meta: Some(LimitMeta {
                q_gh: law.report.q_gh,
                q_check: law.report.q_check,
                residual: law.report.residual,
                strict_prop53: law.strict_prop53,
            }),
        }
    }

    fn to_nu(&self, t: usize) -> Result<NuPack> {
        if self.c_e.len() != t {
            return Err(Error::Shape(format!("c_e must have {t} entries")));
        }
        Ok(NuPack {
            c: DVector::from_vec(self.c_e.clone()),
            k: CovSeq {
                seq: seq_from_map(&self.k_e, t, "K_e")?,
            },
        })
    }
}

/// Candidate file: mean `m`, covariance lags `cov` of the v-process, optional `mu_I`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateJson {
    m: Vec<f64>,
    cov: BTreeMap<i64, Matrix>,
    #[serde(rename = "mu_I", default)]
    mu_i: Option<InitialLaw>,
}

#[derive(Serialize)]
struct MomentsJson {
    trial: usize,
    c_hat: Vec<f64>,
    #[serde(rename = "M_hat")]
    m_hat: BTreeMap<i64, Matrix>,
}

#[derive(Serialize)]
struct RateOutput<'a> {
    mode: &'a str,
    #[serde(flatten)]
    report: RateReport,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn json_line<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

/// Runs a command, writing its primary output to `out`. Returns the exit code.
fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::ValidateLambda { config, grid, sizes } => {
            let cfg = Config::load(&config)?;
            let grid = grid.unwrap_or(cfg.experiment.grid);
            let sizes = sizes.unwrap_or_else(|| cfg.experiment.n_list.clone());
            let report = validate_lambda(&cfg.spec, grid, &sizes)?;
            json_line(out, &report)?;
            Ok(if report.valid { EXIT_OK } else { EXIT_INVALID })
        }
        Command::SampleWeights { config, n, seed } => {
            let cfg = Config::load(&config)?;
            let seed = seed.unwrap_or(cfg.experiment.seed);
            let j = sample_weights(&cfg.spec, cfg.params.j_bar, n, StreamSeed::new(seed))?;
            let h = ((n - 1) / 2) as i64;
            writeln!(out, "# N={n} seed={seed} lambda_sha256={}", cfg.spec.hash())?;
            writeln!(out, "# row i, column j: J_ij, the weight from neuron j onto neuron i; i, j = -{h}..{h}")?;
            for pos in 0..n {
                let line: Vec<String> = j.row(pos).iter().map(|x| format!("{x:e}")).collect();
                writeln!(out, "{}", line.join(","))?;
            }
            Ok(EXIT_OK)
        }
        Command::Simulate {
            config,
            n,
            seed,
            trials,
            emit,
        } => {
            let cfg = Config::load(&config)?;
            let seed = StreamSeed::new(seed.unwrap_or(cfg.experiment.seed));
            let p = &cfg.params;
            let h = ((n - 1) / 2) as i64;
            let mut moments = Vec::new();
            if emit == Emit::Trajectory {
                writeln!(out, "trial,j,t,U")?;
            }
            for trial in 0..trials {
                let s = seed.with_trial(trial as u64);
                let j = sample_weights(&cfg.spec, p.j_bar, n, s)?;
                let traj = simulate(p, &j, &sample_noise_bundle(p, n, s))?;
                match emit {
                    Emit::Trajectory => {
                        for pos in 0..n {
                            for (t, u) in traj.neuron(pos).iter().enumerate() {
                                writeln!(out, "{trial},{},{t},{u:e}", pos as i64 - h)?;
                            }
                        }
                    }
                    Emit::Moments => {
                        let m = empirical_moments(&traj, p, cfg.spec.radius())?;
                        moments.push(MomentsJson {
                            trial,
                            c_hat: m.c_hat.iter().copied().collect(),
                            m_hat: lag_map(&m.m_hat),
                        });
                    }
                }
            }
            if emit == Emit::Moments {
                json_line(out, &moments)?;
            }
            Ok(EXIT_OK)
        }
        Command::SolveLimit { config } => {
            let cfg = Config::load(&config)?;
            let law = solve_limit_law(&cfg.params, &cfg.spec, &cfg.experiment.mean_field())?;
            json_line(out, &LimitLawJson::of(&law))?;
            Ok(EXIT_OK)
        }
        Command::Rate { config, candidate, nu } => {
            let cfg = Config::load(&config)?;
            let p = &cfg.params;
            let opts = cfg.experiment.rate();
            let law = if candidate == "limit" {
                Some(solve_limit_law(p, &cfg.spec, &opts.mean_field)?)
            } else {
                None
            };
            let cand = match &law {
                Some(l) => GaussianCandidate::from_limit_law(l),
                None => {
                    let c: CandidateJson = read_json(Path::new(&candidate))?;
                    if c.m.len() != p.horizon {
                        return Err(Error::Shape(format!("candidate mean must have {} entries", p.horizon)));
                    }
                    GaussianCandidate {
                        mean: DVector::from_vec(c.m),
                        cov: seq_from_map(&c.cov, p.horizon, "candidate cov")?,
                        initial: c.mu_i.unwrap_or(p.initial),
                    }
                }
            };
            let (mode, report) = if nu == "self" {
                ("H", rate_h(&cand, p, &cfg.spec, &opts)?)
            } else {
                let pack = read_json::<LimitLawJson>(Path::new(&nu))?.to_nu(p.horizon)?;
                ("H_nu", rate_h_nu(&cand, &pack, p, &cfg.spec, &opts)?)
            };
            json_line(out, &RateOutput { mode, report })?;
            Ok(EXIT_OK)
        }
        Command::Converge {
            config,
            out: out_dir,
            seed,
            threads,
            trials,
        } => {
            let mut cfg = Config::load(&config)?;
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            if let Some(t) = threads {
                cfg.experiment.threads = t;
            }
            if let Some(t) = trials {
                if t == 0 {
                    return Err(Error::Config("trials must be >= 1".into()));
                }
                cfg.experiment.trials = t;
            }
            let dir = out_dir
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .or_else(|| cfg.experiment.out.clone())
                .unwrap_or_else(|| PathBuf::from("results"));
            std::fs::create_dir_all(&dir)?;
            let report = run_convergence_with(&cfg, |res, q| {
                std::fs::write(dir.join(format!("N_{}.csv", res.n)), size_csv(res))?;
                if let Some(q) = q {
                    std::fs::write(dir.join(format!("quenched_N_{}.csv", q.n)), quenched_csv(q))?;
                }
                Ok(())
            })?;
            let mut f = std::fs::File::create(dir.join("report.json"))?;
            json_line(&mut f, &report)?;
            for s in &report.sizes {
                writeln!(
                    out,
                    "N={} sup_error={:e} max|z|={:.3} within_band={}",
                    s.n, s.sup_error, s.max_abs_z, s.within_band
                )?;
            }
            writeln!(out, "slope={:.4} pass={}", report.slope, report.pass)?;
            Ok(if report.pass { EXIT_OK } else { EXIT_RUNTIME })
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                EXIT_INVALID
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_64() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["ratenet", "--bogus"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(run(["ratenet", "solve-limit"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(run(["ratenet", "--help"], &mut o, &mut e), EXIT_OK);
    }

    #[test]
    fn missing_config_is_invalid_input() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(["ratenet", "solve-limit", "--config", "/nonexistent.json"], &mut o, &mut e);
        assert_eq!(code, EXIT_INVALID);
    }

    #[test]
    fn lag_maps_round_trip() {
        let seq = MatrixSeq::from_fn(2, 1, |l| RMat::from_fn(2, 2, |i, j| (l * 10 + (i * 2 + j) as i64) as f64));
        let mut seq = seq;
        let up = seq.lag(1).transpose();
        *seq.lag_mut(-1) = up;
        *seq.lag_mut(0) = RMat::identity(2, 2);
        let mut map = lag_map(&seq);
        assert_eq!(seq_from_map(&map, 2, "x").unwrap(), seq);
        map.remove(&-1);
        assert_eq!(seq_from_map(&map, 2, "x").unwrap(), seq);
    }
}
