//! The power-study engine: draw mixture samples, apply every configured
//! test at a fixed level, and estimate empirical power over a grid of
//! signal strengths.
//!
//! Trials are embarrassingly parallel. Each trial's generator is derived
//! from (master_seed, strength, trial_index), and aggregation is a
//! commutative count, so results are byte-identical for any worker count.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    cache::CalibrationCache, mc_calibrate_sampled, mc_calibrate_sign_family, CalibrationChoice,
    McModel, NullLaw,
};
use crate::distributions::{Bracket, GeneralizedGaussian, MixtureModel, Regime, SamplingMode};
use crate::error::{Error, Result};
use crate::rngstream::{substream, TAG_TRIAL};
use crate::sign_sequence::build_sign_sequence;
use crate::statistics::{
    hc_statistic, lrt_statistic, sign_sequence_stats, t_statistic, Direction, HcVariant, StatKind,
};

fn default_level() -> f64 {
    0.05
}
fn default_tests() -> Vec<StatKind> {
    StatKind::ALL.to_vec()
}
fn default_scale() -> f64 {
    1.0
}
fn default_sampling() -> SamplingMode {
    SamplingMode::ExactCount
}
fn default_mc_reps() -> usize {
    2000
}
fn default_crossover() -> usize {
    10_000
}
fn default_hc_variant() -> HcVariant {
    HcVariant::Plus
}

/// Full description of one experiment; the sidecar metadata file is this
/// struct serialized back out.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub gamma_null: f64,
    /// Defaults to `gamma_null`.
    #[serde(default)]
    pub gamma_effect: Option<f64>,
    #[serde(default = "default_scale")]
    pub scale_null: f64,
    /// Defaults to `scale_null`.
    #[serde(default)]
    pub scale_effect: Option<f64>,
    pub n: usize,
    /// Sparsity exponent: ε_n = n^{-β}.
    pub beta: f64,
    /// Interpretation of the strength grid: r values (sparse) or s values
    /// (dense). μ_n is (γ r log n)^{1/γ} resp. n^{s-1/2}, with γ the null
    /// shape.
    pub regime: Regime,
    pub strength_grid: Vec<f64>,
    pub reps: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_tests")]
    pub tests: Vec<StatKind>,
    #[serde(default = "default_sampling")]
    pub sampling_mode: SamplingMode,
    pub master_seed: u64,
    /// Per-test calibration override; the default is exact/asymptotic for
    /// the closed-form tests and Monte Carlo for cusum, longest-run, hc
    /// and lrt.
    #[serde(default)]
    pub calibration: BTreeMap<StatKind, CalibrationChoice>,
    /// Table size for Monte Carlo calibration.
    #[serde(default = "default_mc_reps")]
    pub mc_reps: usize,
    /// Sample size at which the Smirnov test switches from the exact
    /// reflection law to its half-normal limit.
    #[serde(default = "default_crossover")]
    pub asymptotic_crossover_n: usize,
    /// Rounding convention for the effect count in exact-count sampling.
    #[serde(default)]
    pub bracket: Bracket,
    #[serde(default = "default_hc_variant")]
    pub hc_variant: HcVariant,
    /// Draw every sample from the null while keeping the configured
    /// alternative for the hc/lrt statistics and calibration: a level
    /// check.
    #[serde(default)]
    pub force_null: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check every field, reporting all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.gamma_null <= 0.0 || !self.gamma_null.is_finite() {
            bad.push(format!(
                "gamma_null must be positive, got {}",
                self.gamma_null
            ));
        }
        if let Some(g) = self.gamma_effect {
            if g <= 0.0 || !g.is_finite() {
                bad.push(format!("gamma_effect must be positive, got {g}"));
            }
        }
        if self.scale_null <= 0.0 || !self.scale_null.is_finite() {
            bad.push(format!(
                "scale_null must be positive, got {}",
                self.scale_null
            ));
        }
        if let Some(s) = self.scale_effect {
            if s <= 0.0 || !s.is_finite() {
                bad.push(format!("scale_effect must be positive, got {s}"));
            }
        }
        if self.n < 2 {
            bad.push(format!("n must be at least 2, got {}", self.n));
        }
        if self.beta.is_nan() || self.beta <= 0.0 || self.beta >= 1.0 {
            bad.push(format!("beta must lie in (0,1), got {}", self.beta));
        }
        if self.strength_grid.is_empty() {
            bad.push("strength_grid must be non-empty".to_string());
        }
        if self
            .strength_grid
            .windows(2)
            .any(|w| w[0].is_nan() || w[1].is_nan() || w[0] > w[1])
        {
            bad.push("strength_grid must be sorted ascending".to_string());
        }
        for &s in &self.strength_grid {
            if !s.is_finite() || s < 0.0 {
                bad.push(format!(
                    "strength_grid entries must be finite and >= 0, got {s}"
                ));
                break;
            }
        }
        if self.regime == Regime::DenseS {
            if let Some(&s) = self.strength_grid.iter().find(|&&s| s > 0.5) {
                bad.push(format!(
                    "dense-regime strengths are s values in [0, 1/2], got {s}"
                ));
            }
        }
        if self.reps < 1 {
            bad.push("reps must be at least 1".to_string());
        }
        if self.level.is_nan() || self.level <= 0.0 || self.level >= 1.0 {
            bad.push(format!("level must lie in (0,1), got {}", self.level));
        }
        if self.tests.is_empty() {
            bad.push("tests must be non-empty".to_string());
        }
        let mut seen = std::collections::BTreeSet::new();
        for &t in &self.tests {
            if !seen.insert(t) {
                bad.push(format!("tests lists {t} twice"));
            }
        }
        for (&kind, &choice) in &self.calibration {
            if choice == CalibrationChoice::ExactOrAsymptotic && !has_closed_form(kind) {
                bad.push(format!(
                    "calibration: {kind} has no exact or asymptotic law, use monte_carlo"
                ));
            }
        }
        let any_mc = self
            .tests
            .iter()
            .any(|&k| self.calibration_for(k) == CalibrationChoice::MonteCarlo);
        if any_mc && self.mc_reps < 100 {
            bad.push(format!(
                "mc_reps must be at least 100, got {}",
                self.mc_reps
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad.join("; ")))
        }
    }

    pub fn calibration_for(&self, kind: StatKind) -> CalibrationChoice {
        self.calibration.get(&kind).copied().unwrap_or(match kind {
            StatKind::Cusum | StatKind::LongestRun | StatKind::Hc | StatKind::Lrt => {
                CalibrationChoice::MonteCarlo
            }
            _ => CalibrationChoice::ExactOrAsymptotic,
        })
    }

    pub fn null_dist(&self) -> Result<GeneralizedGaussian> {
        GeneralizedGaussian::new(self.gamma_null, self.scale_null)
    }

    pub fn effect_dist(&self) -> Result<GeneralizedGaussian> {
        GeneralizedGaussian::new(
            self.gamma_effect.unwrap_or(self.gamma_null),
            self.scale_effect.unwrap_or(self.scale_null),
        )
    }

    /// ε_n = n^{-β}.
    pub fn epsilon(&self) -> f64 {
        (self.n as f64).powf(-self.beta)
    }

    /// μ for one grid strength, at this config's n. Grid endpoints (r = 0,
    /// s = 0 or 1/2) take the formula's limit values.
    pub fn mu_for(&self, strength: f64) -> f64 {
        let nf = self.n as f64;
        match self.regime {
            Regime::SparseR => (self.gamma_null * strength * nf.ln()).powf(1.0 / self.gamma_null),
            Regime::DenseS => nf.powf(strength - 0.5),
        }
    }

    /// The alternative the statistics are computed against at one strength.
    pub fn model_for(&self, strength: f64) -> Result<MixtureModel> {
        MixtureModel::new(
            self.null_dist()?,
            self.effect_dist()?,
            self.epsilon(),
            self.mu_for(strength),
        )
    }
}

fn has_closed_form(kind: StatKind) -> bool {
    !matches!(
        kind,
        StatKind::Cusum | StatKind::LongestRun | StatKind::Hc | StatKind::Lrt
    )
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::DenseS => "dense_s",
        Regime::SparseR => "sparse_r",
    }
}

/// Decision rule for one test, resolved against the null at the config
/// level.
#[derive(Debug, Clone)]
enum TestRule {
    Fixed {
        cv: f64,
        dir: Direction,
    },
    /// One critical value per grid strength (the likelihood ratio's null
    /// table depends on the alternative it is computed against).
    PerStrength {
        cvs: Vec<f64>,
        dir: Direction,
    },
}

/// Per-trial rejection flags, aligned with the config's test list.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub rejections: Vec<bool>,
    /// The t statistic was degenerate (constant sample); recorded as a
    /// non-rejection.
    pub degenerate_t: bool,
}

/// A validated config with every test calibrated, ready to run trials.
pub struct PreparedExperiment {
    cfg: ExperimentConfig,
    sampling_models: Vec<MixtureModel>,
    stat_models: Vec<MixtureModel>,
    rules: Vec<TestRule>,
    needs_sign_seq: bool,
}

impl PreparedExperiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        Self::with_cache(cfg, None)
    }

    pub fn with_cache(cfg: ExperimentConfig, cache: Option<&CalibrationCache>) -> Result<Self> {
        cfg.validate()?;
        let null = cfg.null_dist()?;
        let stat_models: Vec<MixtureModel> = cfg
            .strength_grid
            .iter()
            .map(|&s| cfg.model_for(s))
            .collect::<Result<_>>()?;
        let sampling_models: Vec<MixtureModel> = if cfg.force_null {
            cfg.strength_grid
                .iter()
                .map(|_| MixtureModel::null(null))
                .collect()
        } else {
            stat_models.clone()
        };

        let mc_sign_kinds: Vec<StatKind> = cfg
            .tests
            .iter()
            .copied()
            .filter(|k| {
                k.is_sign_sequence_statistic()
                    && cfg.calibration_for(*k) == CalibrationChoice::MonteCarlo
            })
            .collect();
        let want = |k: StatKind| {
            cfg.tests.contains(&k) && cfg.calibration_for(k) == CalibrationChoice::MonteCarlo
        };
        let want_t_mc = want(StatKind::T);
        let want_hc = want(StatKind::Hc);
        let want_lrt = want(StatKind::Lrt);

        // Monte Carlo tables, either from the shared simulation passes or
        // through the disk cache.
        let mut sign_tables: BTreeMap<StatKind, NullLaw> = BTreeMap::new();
        let mut t_table = None;
        let mut hc_table = None;
        let mut lrt_tables: Vec<NullLaw> = Vec::new();
        if let Some(cache) = cache {
            for &k in &mc_sign_kinds {
                sign_tables.insert(
                    k,
                    cache.load_or_compute(k, cfg.n, cfg.mc_reps, cfg.master_seed, None)?,
                );
            }
            let base = McModel {
                null,
                hc_variant: cfg.hc_variant,
                lrt_model: None,
            };
            if want_t_mc {
                t_table = Some(cache.load_or_compute(
                    StatKind::T,
                    cfg.n,
                    cfg.mc_reps,
                    cfg.master_seed,
                    Some(&base),
                )?);
            }
            if want_hc {
                hc_table = Some(cache.load_or_compute(
                    StatKind::Hc,
                    cfg.n,
                    cfg.mc_reps,
                    cfg.master_seed,
                    Some(&base),
                )?);
            }
            if want_lrt {
                for m in &stat_models {
                    let with_model = McModel {
                        null,
                        hc_variant: cfg.hc_variant,
                        lrt_model: Some(m.clone()),
                    };
                    lrt_tables.push(cache.load_or_compute(
                        StatKind::Lrt,
                        cfg.n,
                        cfg.mc_reps,
                        cfg.master_seed,
                        Some(&with_model),
                    )?);
                }
            }
        } else {
            if !mc_sign_kinds.is_empty() {
                let laws =
                    mc_calibrate_sign_family(&mc_sign_kinds, cfg.n, cfg.mc_reps, cfg.master_seed)?;
                for (k, law) in mc_sign_kinds.iter().zip(laws) {
                    sign_tables.insert(*k, law);
                }
            }
            if want_t_mc || want_hc || want_lrt {
                let lrt_models: Vec<MixtureModel> = if want_lrt {
                    stat_models.clone()
                } else {
                    Vec::new()
                };
                let sampled = mc_calibrate_sampled(
                    cfg.n,
                    cfg.mc_reps,
                    cfg.master_seed,
                    &null,
                    cfg.hc_variant,
                    want_t_mc,
                    want_hc,
                    &lrt_models,
                )?;
                t_table = sampled.t;
                hc_table = sampled.hc;
                lrt_tables = sampled.lrt;
            }
        }

        let mut rules = Vec::with_capacity(cfg.tests.len());
        for &kind in &cfg.tests {
            let dir = kind.direction();
            let rule = match cfg.calibration_for(kind) {
                CalibrationChoice::MonteCarlo => match kind {
                    StatKind::Lrt => {
                        let cvs = lrt_tables
                            .iter()
                            .map(|law| law.critical_value(cfg.level))
                            .collect::<Result<Vec<_>>>()?;
                        TestRule::PerStrength { cvs, dir }
                    }
                    StatKind::T => TestRule::Fixed {
                        cv: t_table
                            .as_ref()
                            .expect("calibrated above")
                            .critical_value(cfg.level)?,
                        dir,
                    },
                    StatKind::Hc => TestRule::Fixed {
                        cv: hc_table
                            .as_ref()
                            .expect("calibrated above")
                            .critical_value(cfg.level)?,
                        dir,
                    },
                    k => TestRule::Fixed {
                        cv: sign_tables[&k].critical_value(cfg.level)?,
                        dir,
                    },
                },
                CalibrationChoice::ExactOrAsymptotic => {
                    let law = match kind {
                        StatKind::Sign => NullLaw::ExactBinomialSign { n: cfg.n },
                        StatKind::NumRuns => NullLaw::ExactBinomialRuns { n: cfg.n },
                        StatKind::TailRun => NullLaw::ExactGeometricTail,
                        StatKind::Smirnov => {
                            if cfg.n >= cfg.asymptotic_crossover_n {
                                NullLaw::AsymptoticHalfNormalSmirnov { n: cfg.n }
                            } else {
                                NullLaw::ExactReflectionSmirnov { n: cfg.n }
                            }
                        }
                        StatKind::SignedRank => NullLaw::AsymptoticNormalSignedRank { n: cfg.n },
                        StatKind::T => NullLaw::AsymptoticNormalT,
                        _ => unreachable!("validated"),
                    };
                    TestRule::Fixed {
                        cv: law.critical_value(cfg.level)?,
                        dir,
                    }
                }
            };
            rules.push(rule);
        }

        let needs_sign_seq = cfg.tests.iter().any(|k| k.is_sign_sequence_statistic());
        Ok(Self {
            cfg,
            sampling_models,
            stat_models,
            rules,
            needs_sign_seq,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    /// One trial: draw a sample, build the sign sequence once, compute every
    /// configured statistic, and compare against the critical values.
    /// Deterministic in (master_seed, strength, trial_index).
    pub fn run_trial(&self, strength_index: usize, trial_index: usize) -> Result<TrialOutcome> {
        let cfg = &self.cfg;
        let strength = cfg.strength_grid[strength_index];
        let mut rng = substream(
            cfg.master_seed,
            TAG_TRIAL,
            strength.to_bits(),
            trial_index as u64,
        );
        let sampling = &self.sampling_models[strength_index];
        let x = match cfg.sampling_mode {
            SamplingMode::Bernoulli => sampling.sample(cfg.n, SamplingMode::Bernoulli, &mut rng),
            SamplingMode::ExactCount => {
                let k = sampling.effect_count_with(cfg.n, cfg.bracket);
                sampling.sample_with_effect_count(cfg.n, k, &mut rng)
            }
        };

        let sign_stats = if self.needs_sign_seq {
            let seq = build_sign_sequence(&x, &mut rng)?;
            Some(sign_sequence_stats(&seq))
        } else {
            None
        };

        let mut degenerate_t = false;
        let mut rejections = Vec::with_capacity(cfg.tests.len());
        for (&kind, rule) in cfg.tests.iter().zip(&self.rules) {
            let value = match kind {
                StatKind::Sign => sign_stats.unwrap().sign as f64,
                StatKind::SignedRank => sign_stats.unwrap().signed_rank as f64,
                StatKind::Smirnov => sign_stats.unwrap().smirnov as f64,
                StatKind::Cusum => sign_stats.unwrap().cusum,
                StatKind::TailRun => sign_stats.unwrap().tail_run as f64,
                StatKind::LongestRun => sign_stats.unwrap().longest_run as f64,
                StatKind::NumRuns => sign_stats.unwrap().num_runs_changes as f64,
                StatKind::T => match t_statistic(&x) {
                    Ok(v) => v,
                    Err(Error::DegenerateSample(_)) => {
                        degenerate_t = true;
                        f64::NEG_INFINITY
                    }
                    Err(e) => return Err(e),
                },
                StatKind::Hc => hc_statistic(
                    &x,
                    self.stat_models[strength_index].null_dist(),
                    cfg.hc_variant,
                )?,
                StatKind::Lrt => lrt_statistic(&x, &self.stat_models[strength_index]),
            };
            let (cv, dir) = match rule {
                TestRule::Fixed { cv, dir } => (*cv, *dir),
                TestRule::PerStrength { cvs, dir } => (cvs[strength_index], *dir),
            };
            let reject = match dir {
                Direction::RejectLarge => value >= cv,
                Direction::RejectSmall => value <= cv,
            };
            rejections.push(reject);
        }
        Ok(TrialOutcome {
            rejections,
            degenerate_t,
        })
    }

    /// Empirical power for every (strength, test) cell.
    pub fn estimate_power(&self) -> Result<PowerTable> {
        let cfg = &self.cfg;
        let mut rows = Vec::with_capacity(cfg.strength_grid.len());
        for (si, &strength) in cfg.strength_grid.iter().enumerate() {
            let outcomes: Vec<TrialOutcome> = (0..cfg.reps)
                .into_par_iter()
                .map(|t| self.run_trial(si, t))
                .collect::<Result<_>>()?;
            let mut counts = vec![0usize; cfg.tests.len()];
            let mut degenerate = 0usize;
            for o in &outcomes {
                for (c, &r) in counts.iter_mut().zip(&o.rejections) {
                    *c += r as usize;
                }
                degenerate += o.degenerate_t as usize;
            }
            let cells = cfg
                .tests
                .iter()
                .zip(&counts)
                .map(|(&kind, &k)| {
                    let p = k as f64 / cfg.reps as f64;
                    PowerCell {
                        kind,
                        rejections: k,
                        power: p,
                        stderr: (p * (1.0 - p) / cfg.reps as f64).sqrt(),
                    }
                })
                .collect();
            rows.push(PowerRow {
                n: cfg.n,
                strength,
                cells,
                degenerate_t: degenerate,
            });
        }
        Ok(PowerTable {
            config: cfg.clone(),
            rows,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerCell {
    pub kind: StatKind,
    pub rejections: usize,
    pub power: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub n: usize,
    pub strength: f64,
    pub cells: Vec<PowerCell>,
    pub degenerate_t: usize,
}

/// The main output artifact: per-(strength, test) empirical power with
/// Monte Carlo standard errors, plus the config that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct PowerTable {
    pub config: ExperimentConfig,
    pub rows: Vec<PowerRow>,
}

/// Validate and run a whole experiment.
pub fn estimate_power(cfg: ExperimentConfig) -> Result<PowerTable> {
    PreparedExperiment::new(cfg)?.estimate_power()
}

pub fn estimate_power_with_cache(
    cfg: ExperimentConfig,
    cache: Option<&CalibrationCache>,
) -> Result<PowerTable> {
    PreparedExperiment::with_cache(cfg, cache)?.estimate_power()
}

/// Power at one fixed strength across increasing sample sizes. The
/// returned rows carry their own n.
pub fn varying_n_study(
    cfg_base: &ExperimentConfig,
    n_list: &[usize],
    fixed_strength: f64,
) -> Result<PowerTable> {
    varying_n_study_with_cache(cfg_base, n_list, fixed_strength, None)
}

pub fn varying_n_study_with_cache(
    cfg_base: &ExperimentConfig,
    n_list: &[usize],
    fixed_strength: f64,
    cache: Option<&CalibrationCache>,
) -> Result<PowerTable> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "n_list must be non-empty and sorted strictly ascending".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    let mut cfg = cfg_base.clone();
    cfg.strength_grid = vec![fixed_strength];
    for &n in n_list {
        let mut sub = cfg.clone();
        sub.n = n;
        let table = estimate_power_with_cache(sub, cache)?;
        rows.extend(table.rows);
    }
    Ok(PowerTable { config: cfg, rows })
}

/// Render the plot-ready CSV: `strength,test,power,stderr,n,beta,regime,seed`
/// with floats at 17 significant digits.
pub fn power_csv(table: &PowerTable) -> String {
    let cfg = &table.config;
    let mut out = String::from("strength,test,power,stderr,n,beta,regime,seed\n");
    for row in &table.rows {
        for cell in &row.cells {
            out.push_str(&format!(
                "{:.16e},{},{:.16e},{:.16e},{},{:.16e},{},{}\n",
                row.strength,
                cell.kind.name(),
                cell.power,
                cell.stderr,
                row.n,
                cfg.beta,
                regime_name(cfg.regime),
                cfg.master_seed,
            ));
        }
    }
    out
}

/// Write the CSV and its `.meta.json` sidecar echoing the full config.
pub fn write_power_outputs(table: &PowerTable, csv_path: &Path) -> Result<()> {
    std::fs::write(csv_path, power_csv(table))?;
    let sidecar = csv_path.with_extension("meta.json");
    let meta = serde_json::to_string_pretty(&table.config)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    std::fs::write(sidecar, meta)?;
    Ok(())
}
