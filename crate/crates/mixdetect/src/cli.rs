//! Command-line entry point: detection boundaries, null calibration,
//! testing a data file, and power studies.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::calibration::{
    asymptotic_pvalue, cache::CalibrationCache, mc_calibrate, params_echo, pvalue_runs,
    pvalue_sign, pvalue_smirnov, pvalue_tail_run, McModel, NullLaw,
};
use crate::distributions::{GeneralizedGaussian, MixtureModel};
use crate::error::{Error, Result};
use crate::rngstream::{substream, TAG_TRIAL};
use crate::sign_sequence::build_sign_sequence;
use crate::simulation::{
    estimate_power_with_cache, varying_n_study_with_cache, write_power_outputs, ExperimentConfig,
};
use crate::statistics::{
    hc_statistic, lrt_statistic, sign_sequence_stats, t_statistic, HcVariant, StatKind,
};
use crate::theory::boundary_grid;

const WORKERS_ENV: &str = "MIXDETECT_WORKERS";

#[derive(Parser)]
#[command(
    name = "mixdetect",
    version,
    about = "Distribution-free tests for one-sided sparse heterogeneous mixtures"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the detection boundaries rho_star, rho_tail, rho_long over a beta grid
    Boundary {
        /// Generalized Gaussian shape parameter
        #[arg(long)]
        gamma: f64,
        /// Beta grid as min:max:step, e.g. 0.5:1.0:0.01
        #[arg(long)]
        beta: String,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a Monte Carlo null table and store it in the cache
    Calibrate {
        /// Statistic name (sign, signed-rank, smirnov, cusum, tail-run,
        /// longest-run, num-runs, t, hc, lrt)
        #[arg(long)]
        stat: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Null shape, required for t/hc/lrt
        #[arg(long)]
        null_gamma: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        null_scale: f64,
        /// Mixture fraction, required for lrt
        #[arg(long)]
        epsilon: Option<f64>,
        /// Effect magnitude, required for lrt
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value = "plus")]
        hc_variant: String,
        #[arg(long, default_value = "calibration-cache")]
        cache_dir: PathBuf,
    },
    /// Apply tests to a data file (one number per line, '#' comments ignored)
    Test {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated test names
        #[arg(long, value_delimiter = ',', required = true)]
        tests: Vec<String>,
        /// Null shape, required for hc and lrt
        #[arg(long)]
        null_gamma: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        null_scale: f64,
        /// Mixture fraction for lrt
        #[arg(long)]
        epsilon: Option<f64>,
        /// Effect magnitude for lrt
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        /// Table size for the Monte Carlo calibrated tests (cusum,
        /// longest-run, hc, lrt)
        #[arg(long, default_value_t = 2000)]
        mc_reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "plus")]
        hc_variant: String,
        /// Reuse Monte Carlo tables from this directory
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Run a power study from a JSON config and write plot-ready CSV
    Power {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: MIXDETECT_WORKERS, then all cores)
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Power at one fixed strength across several sample sizes
    VaryingN {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated ascending sample sizes
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long)]
        strength: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Boundary { gamma, beta, out } => cmd_boundary(gamma, &beta, out.as_deref()),
        Command::Calibrate {
            stat,
            n,
            reps,
            seed,
            null_gamma,
            null_scale,
            epsilon,
            mu,
            hc_variant,
            cache_dir,
        } => cmd_calibrate(
            &stat,
            n,
            reps,
            seed,
            null_gamma,
            null_scale,
            epsilon,
            mu,
            &hc_variant,
            &cache_dir,
        ),
        Command::Test {
            data,
            tests,
            null_gamma,
            null_scale,
            epsilon,
            mu,
            level,
            mc_reps,
            seed,
            hc_variant,
            cache_dir,
        } => cmd_test(
            &data,
            &tests,
            null_gamma,
            null_scale,
            epsilon,
            mu,
            level,
            mc_reps,
            seed,
            &hc_variant,
            cache_dir.as_deref(),
        ),
        Command::Power {
            config,
            out,
            workers,
            cache_dir,
        } => run_in_pool(workers, || cmd_power(&config, &out, cache_dir.as_deref())),
        Command::VaryingN {
            config,
            n_list,
            strength,
            out,
            workers,
            cache_dir,
        } => run_in_pool(workers, || {
            cmd_varying_n(&config, &n_list, strength, &out, cache_dir.as_deref())
        }),
    }
}

/// Run f inside a rayon pool sized by --workers or MIXDETECT_WORKERS.
/// Worker count affects wall time only, never output bytes.
fn run_in_pool<T>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    let from_env = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    match workers.or(from_env) {
        Some(k) if k > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
            pool.install(f)
        }
        _ => f(),
    }
}

fn parse_beta_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidParameter(format!("beta range must be min:max:step, got '{spec}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let min: f64 = parts[0].parse().map_err(|_| bad())?;
    let max: f64 = parts[1].parse().map_err(|_| bad())?;
    let step: f64 = parts[2].parse().map_err(|_| bad())?;
    if step.is_nan()
        || step <= 0.0
        || min > max
        || !(0.0..=1.0).contains(&min)
        || !(0.0..=1.0).contains(&max)
    {
        return Err(Error::InvalidParameter(format!(
            "beta range needs 0 <= min <= max <= 1 and step > 0, got '{spec}'"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| min + i as f64 * step).collect())
}

fn cmd_boundary(gamma: f64, beta_spec: &str, out: Option<&Path>) -> Result<()> {
    let betas = parse_beta_range(beta_spec)?;
    let rows = boundary_grid(gamma, &betas)?;
    let mut csv = String::from("beta,rho_star,rho_tail,rho_long\n");
    for r in rows {
        let star = match r.rho_star {
            Some(v) => format!("{v:.16e}"),
            None => "NaN".to_string(),
        };
        csv.push_str(&format!(
            "{:.16e},{star},{:.16e},{:.16e}\n",
            r.beta, r.rho_tail, r.rho_long
        ));
    }
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn parse_hc_variant(s: &str) -> Result<HcVariant> {
    match s {
        "plus" => Ok(HcVariant::Plus),
        "full" => Ok(HcVariant::Full),
        other => Err(Error::InvalidParameter(format!(
            "hc variant must be plus or full, got '{other}'"
        ))),
    }
}

/// Build the calibration model context for a non-distribution-free kind.
fn build_mc_model(
    kind: StatKind,
    null_gamma: Option<f64>,
    null_scale: f64,
    epsilon: Option<f64>,
    mu: Option<f64>,
    hc_variant: HcVariant,
) -> Result<Option<McModel>> {
    if kind.is_sign_sequence_statistic() {
        return Ok(None);
    }
    let gamma = null_gamma
        .ok_or_else(|| Error::InvalidParameter(format!("the {kind} test requires --null-gamma")))?;
    let null = GeneralizedGaussian::new(gamma, null_scale)?;
    let lrt_model = if kind == StatKind::Lrt {
        let eps = epsilon.ok_or_else(|| {
            Error::InvalidParameter("the lrt test requires --epsilon".to_string())
        })?;
        let mu =
            mu.ok_or_else(|| Error::InvalidParameter("the lrt test requires --mu".to_string()))?;
        Some(MixtureModel::new(null, null, eps, mu)?)
    } else {
        None
    };
    Ok(Some(McModel {
        null,
        hc_variant,
        lrt_model,
    }))
}

#[allow(clippy::too_many_arguments)]
fn cmd_calibrate(
    stat: &str,
    n: usize,
    reps: usize,
    seed: u64,
    null_gamma: Option<f64>,
    null_scale: f64,
    epsilon: Option<f64>,
    mu: Option<f64>,
    hc_variant: &str,
    cache_dir: &Path,
) -> Result<()> {
    let kind = StatKind::parse(stat)?;
    let variant = parse_hc_variant(hc_variant)?;
    let model = build_mc_model(kind, null_gamma, null_scale, epsilon, mu, variant)?;
    let cache = CalibrationCache::new(cache_dir);
    let law = cache.load_or_compute(kind, n, reps, seed, model.as_ref())?;
    let path = cache.path_for(kind, n, reps, seed, model.as_ref())?;
    if let NullLaw::MonteCarlo(table) = &law {
        eprintln!(
            "calibrated {} at n={} with {} reps (params: {})",
            kind,
            n,
            reps,
            params_echo(kind, model.as_ref())?
        );
        println!("{}", path.display());
        let _ = table;
    }
    Ok(())
}

fn parse_data_file(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            Error::InvalidParameter(format!(
                "{}:{}: not a number: '{line}'",
                path.display(),
                i + 1
            ))
        })?;
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{}:{}: entries must be finite",
                path.display(),
                i + 1
            )));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} contains no data",
            path.display()
        )));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_test(
    data: &Path,
    test_names: &[String],
    null_gamma: Option<f64>,
    null_scale: f64,
    epsilon: Option<f64>,
    mu: Option<f64>,
    level: f64,
    mc_reps: usize,
    seed: u64,
    hc_variant: &str,
    cache_dir: Option<&Path>,
) -> Result<()> {
    if level.is_nan() || level <= 0.0 || level >= 1.0 {
        return Err(Error::Domain(format!(
            "level must lie in (0,1), got {level}"
        )));
    }
    let x = parse_data_file(data)?;
    let n = x.len();
    let kinds: Vec<StatKind> = test_names
        .iter()
        .map(|s| StatKind::parse(s))
        .collect::<Result<_>>()?;
    let variant = parse_hc_variant(hc_variant)?;

    let needs_seq = kinds.iter().any(|k| k.is_sign_sequence_statistic());
    let stats = if needs_seq {
        let mut rng = substream(seed, TAG_TRIAL, 0, 0);
        Some(sign_sequence_stats(&build_sign_sequence(&x, &mut rng)?))
    } else {
        None
    };

    let mc_law = |kind: StatKind| -> Result<NullLaw> {
        let model = build_mc_model(kind, null_gamma, null_scale, epsilon, mu, variant)?;
        match cache_dir {
            Some(dir) => {
                CalibrationCache::new(dir).load_or_compute(kind, n, mc_reps, seed, model.as_ref())
            }
            None => mc_calibrate(kind, n, mc_reps, seed, model.as_ref()),
        }
    };

    println!("test\tstatistic\tp_value\tdecision");
    for kind in kinds {
        let (value, pvalue): (f64, f64) = match kind {
            StatKind::Sign => {
                let s = stats.unwrap().sign;
                (s as f64, pvalue_sign(s, n)?)
            }
            StatKind::SignedRank => {
                let w = stats.unwrap().signed_rank;
                (
                    w as f64,
                    asymptotic_pvalue(StatKind::SignedRank, w as f64, n)?,
                )
            }
            StatKind::Smirnov => {
                let s = stats.unwrap().smirnov;
                let p = if n >= 10_000 {
                    asymptotic_pvalue(StatKind::Smirnov, s as f64, n)?
                } else {
                    pvalue_smirnov(s, n)
                };
                (s as f64, p)
            }
            StatKind::TailRun => {
                let l = stats.unwrap().tail_run;
                (l as f64, pvalue_tail_run(l as i64)?)
            }
            StatKind::NumRuns => {
                let r = stats.unwrap().num_runs_changes;
                (r as f64, pvalue_runs(r as i64, n)?)
            }
            StatKind::Cusum | StatKind::LongestRun => {
                let v = match kind {
                    StatKind::Cusum => stats.unwrap().cusum,
                    _ => stats.unwrap().longest_run as f64,
                };
                (v, mc_law(kind)?.pvalue(v)?)
            }
            StatKind::T => {
                let t = t_statistic(&x)?;
                (t, asymptotic_pvalue(StatKind::T, t, n)?)
            }
            StatKind::Hc => {
                let model = build_mc_model(kind, null_gamma, null_scale, epsilon, mu, variant)?
                    .expect("hc has a model");
                let v = hc_statistic(&x, &model.null, variant)?;
                (v, mc_law(kind)?.pvalue(v)?)
            }
            StatKind::Lrt => {
                let model = build_mc_model(kind, null_gamma, null_scale, epsilon, mu, variant)?
                    .expect("lrt has a model");
                let v = lrt_statistic(&x, model.lrt_model.as_ref().expect("validated"));
                (v, mc_law(kind)?.pvalue(v)?)
            }
        };
        let decision = if pvalue <= level { "reject" } else { "accept" };
        println!("{}\t{}\t{}\t{}", kind.name(), value, pvalue, decision);
    }
    Ok(())
}

fn cmd_power(config: &Path, out: &Path, cache_dir: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(config)?;
    let cfg = ExperimentConfig::from_json(&text)?;
    eprintln!(
        "power study: n={}, beta={}, {} strengths x {} reps, {} tests",
        cfg.n,
        cfg.beta,
        cfg.strength_grid.len(),
        cfg.reps,
        cfg.tests.len()
    );
    let cache = cache_dir.map(CalibrationCache::new);
    let table = estimate_power_with_cache(cfg, cache.as_ref())?;
    write_power_outputs(&table, out)?;
    eprintln!("wrote {} and sidecar", out.display());
    Ok(())
}

fn cmd_varying_n(
    config: &Path,
    n_list: &[usize],
    strength: f64,
    out: &Path,
    cache_dir: Option<&Path>,
) -> Result<()> {
    let text = std::fs::read_to_string(config)?;
    let cfg = ExperimentConfig::from_json(&text)?;
    eprintln!(
        "varying-n study at strength {}: n in {:?}, {} reps",
        strength, n_list, cfg.reps
    );
    let cache = cache_dir.map(CalibrationCache::new);
    let table = varying_n_study_with_cache(&cfg, n_list, strength, cache.as_ref())?;
    write_power_outputs(&table, out)?;
    eprintln!("wrote {} and sidecar", out.display());
    Ok(())
}
