//! Null critical values and p-values: exact closed-form laws where they
//! exist (binomial for the sign and runs statistics, Geom(1/2) for the tail
//! run, the reflection principle for the Smirnov statistic), limiting
//! normal laws for the t and signed-rank statistics, and Monte Carlo tables
//! for everything else.

pub mod cache;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{GeneralizedGaussian, MixtureModel};
use crate::error::{Error, Result};
use crate::rngstream::{substream, TAG_SAMPLE_CALIB, TAG_SIGN_CALIB};
use crate::sign_sequence::SignSequence;
use crate::special::{ln_gamma, std_normal_sf};
use crate::statistics::{
    hc_statistic, lrt_statistic, sign_sequence_stats, t_statistic, Direction, HcVariant, SignStats,
    StatKind,
};

/// Largest n for which binomial tails are summed in exact integer
/// arithmetic (Pascal row in u128).
const PASCAL_MAX_N: usize = 100;

/// Above this n, binomial tails switch to the normal approximation with
/// continuity correction.
const BINOM_EXACT_MAX_N: usize = 10_000;

/// P(Bin(n, 1/2) >= k0).
fn binom_half_upper_tail(n: usize, k0: i64) -> f64 {
    if k0 <= 0 {
        return 1.0;
    }
    if k0 > n as i64 {
        return 0.0;
    }
    let k0 = k0 as usize;
    if n <= PASCAL_MAX_N {
        let mut coef: u128 = 1;
        let mut tail: u128 = 0;
        for k in 0..=n {
            if k >= k0 {
                tail += coef;
            }
            if k < n {
                coef = coef * (n - k) as u128 / (k + 1) as u128;
            }
        }
        return tail as f64 / 2f64.powi(n as i32);
    }
    if n <= BINOM_EXACT_MAX_N {
        if (k0 as f64) < n as f64 / 2.0 {
            return 1.0 - binom_half_upper_tail(n, (n - k0 + 1) as i64);
        }
        // recursive-ratio summation with Kahan compensation
        let ln_first = ln_gamma((n + 1) as f64)
            - ln_gamma((k0 + 1) as f64)
            - ln_gamma((n - k0 + 1) as f64)
            - n as f64 * std::f64::consts::LN_2;
        let mut term = ln_first.exp();
        let mut sum = term;
        let mut comp = 0.0f64;
        for k in k0..n {
            term *= (n - k) as f64 / (k + 1) as f64;
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            if term < sum * 1e-17 {
                break;
            }
        }
        return sum.min(1.0);
    }
    let mean = n as f64 / 2.0;
    let sd = (n as f64).sqrt() / 2.0;
    std_normal_sf((k0 as f64 - 0.5 - mean) / sd)
}

/// P(Bin(n, 1/2) = k).
fn binom_half_point(n: usize, k: i64) -> f64 {
    if k < 0 || k > n as i64 {
        return 0.0;
    }
    let k = k as usize;
    if n <= PASCAL_MAX_N {
        let mut coef: u128 = 1;
        for j in 0..k.min(n - k) {
            coef = coef * (n - j) as u128 / (j + 1) as u128;
        }
        return coef as f64 / 2f64.powi(n as i32);
    }
    (ln_gamma((n + 1) as f64)
        - ln_gamma((k + 1) as f64)
        - ln_gamma((n - k + 1) as f64)
        - n as f64 * std::f64::consts::LN_2)
        .exp()
}

/// Upper tail of the sign statistic: P(S >= s) with (S+n)/2 ~ Bin(n, 1/2).
pub fn pvalue_sign(s: i64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("sign p-value requires n >= 1".into()));
    }
    if s.unsigned_abs() as usize > n {
        return Err(Error::Domain(format!("|s| = {s} exceeds n = {n}")));
    }
    if (s + n as i64) % 2 != 0 {
        return Err(Error::Domain(format!(
            "sign statistic s = {s} has the wrong parity for n = {n}"
        )));
    }
    Ok(binom_half_upper_tail(n, (s + n as i64) / 2))
}

/// Lower tail of the sign-change count: P(R <= r) with R ~ Bin(n-1, 1/2).
/// The number-of-runs test rejects for small R.
pub fn pvalue_runs(r: i64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("runs p-value requires n >= 1".into()));
    }
    if r < 0 || r > (n - 1) as i64 {
        return Err(Error::Domain(format!(
            "r = {r} outside the support 0..={} of the runs statistic",
            n - 1
        )));
    }
    // symmetry of Bin(n-1, 1/2): P(X <= r) = P(X >= n-1-r)
    Ok(binom_half_upper_tail(n - 1, (n as i64 - 1) - r))
}

/// P(L‡ >= l) = 2^{-l} under the i.i.d. Rademacher null. The O(2^{-n})
/// truncation correction at l = n is ignored.
pub fn pvalue_tail_run(l: i64) -> Result<f64> {
    if l < 0 {
        return Err(Error::Domain(format!(
            "tail-run length must be >= 0, got {l}"
        )));
    }
    Ok(0.5f64.powi(l.min(1100) as i32))
}

/// Reflection-principle tail of the Smirnov statistic: for k = max(s★, 0),
/// P(S★ >= k) = 2 P(S_n >= k+1) + P(S_n = k); returns 1 for s★ < 0.
pub fn pvalue_smirnov(s_star: i64, n: usize) -> f64 {
    if s_star < 0 {
        return 1.0;
    }
    let k = s_star;
    (2.0 * walk_upper_tail(n, k + 1) + walk_point(n, k)).min(1.0)
}

/// P(S_n >= m) for the simple symmetric walk endpoint S_n = 2B - n.
fn walk_upper_tail(n: usize, m: i64) -> f64 {
    binom_half_upper_tail(n, (m + n as i64 + 1).div_euclid(2))
}

/// P(S_n = k); zero off the parity lattice.
fn walk_point(n: usize, k: i64) -> f64 {
    if (k + n as i64) % 2 != 0 {
        return 0.0;
    }
    binom_half_point(n, (k + n as i64) / 2)
}

/// Upper-tail standard normal p-value of a statistic after its limiting
/// normalization: t as-is, W scaled by √(3/n³), S★/√n against the
/// half-normal law. Other kinds have no supported limit here.
pub fn asymptotic_pvalue(kind: StatKind, value: f64, n: usize) -> Result<f64> {
    match kind {
        StatKind::T => Ok(std_normal_sf(value)),
        StatKind::SignedRank => {
            let nf = n as f64;
            Ok(std_normal_sf(value * (3.0 / (nf * nf * nf)).sqrt()))
        }
        StatKind::Smirnov => {
            let z = value / (n as f64).sqrt();
            if z <= 0.0 {
                Ok(1.0)
            } else {
                Ok((2.0 * std_normal_sf(z)).min(1.0))
            }
        }
        other => Err(Error::Domain(format!(
            "no asymptotic calibration for the {other} statistic"
        ))),
    }
}

fn normal_upper_quantile(level: f64) -> f64 {
    let normal = GeneralizedGaussian::standard_normal();
    if level < 0.5 {
        -normal.quantile(level).expect("level in (0,1)")
    } else {
        normal.quantile(1.0 - level).expect("level in (0,1)")
    }
}

/// A sorted table of null statistic values simulated under the i.i.d.
/// Rademacher law (sign-sequence statistics) or under a configured null
/// model (t, hc, lrt).
#[derive(Debug, Clone, PartialEq)]
pub struct McTable {
    pub kind: StatKind,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Canonical echo of the null parameters behind the table.
    pub params: String,
    values: Vec<f64>,
}

impl McTable {
    pub fn new(
        kind: StatKind,
        n: usize,
        reps: usize,
        seed: u64,
        params: String,
        mut values: Vec<f64>,
    ) -> Self {
        values.sort_by(f64::total_cmp);
        Self {
            kind,
            n,
            reps,
            seed,
            params,
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn median(&self) -> f64 {
        let m = self.values.len();
        if m % 2 == 1 {
            self.values[m / 2]
        } else {
            0.5 * (self.values[m / 2 - 1] + self.values[m / 2])
        }
    }

    /// Monte Carlo p-value (1 + #{more extreme}) / (reps + 1).
    pub fn pvalue(&self, observed: f64) -> f64 {
        let r = self.values.len();
        let extreme = match self.kind.direction() {
            Direction::RejectLarge => r - self.values.partition_point(|v| *v < observed),
            Direction::RejectSmall => self.values.partition_point(|v| *v <= observed),
        };
        (1 + extreme) as f64 / (r + 1) as f64
    }

    /// Smallest (reject-large) or largest (reject-small) threshold whose
    /// Monte Carlo p-value respects the level; conservative under ties.
    pub fn critical_value(&self, level: f64) -> f64 {
        let r = self.values.len();
        let allow = (level * (r + 1) as f64 - 1.0).floor();
        match self.kind.direction() {
            Direction::RejectLarge => {
                if allow < 0.0 {
                    return f64::INFINITY;
                }
                let allow = allow as usize;
                if allow >= r {
                    return self.values[0];
                }
                if allow == 0 {
                    return self.values[r - 1].next_up();
                }
                let mut t = self.values[r - allow];
                loop {
                    let below = self.values.partition_point(|v| *v < t);
                    if r - below <= allow {
                        return t;
                    }
                    let at_or_below = self.values.partition_point(|v| *v <= t);
                    if at_or_below >= r {
                        return self.values[r - 1].next_up();
                    }
                    t = self.values[at_or_below];
                }
            }
            Direction::RejectSmall => {
                if allow < 0.0 {
                    return f64::NEG_INFINITY;
                }
                let allow = allow as usize;
                if allow >= r {
                    return self.values[r - 1];
                }
                if allow == 0 {
                    return self.values[0].next_down();
                }
                let mut t = self.values[allow - 1];
                loop {
                    let at_or_below = self.values.partition_point(|v| *v <= t);
                    if at_or_below <= allow {
                        return t;
                    }
                    let below = self.values.partition_point(|v| *v < t);
                    if below == 0 {
                        return self.values[0].next_down();
                    }
                    t = self.values[below - 1];
                }
            }
        }
    }
}

/// A calibrated null law for one statistic.
#[derive(Debug, Clone)]
pub enum NullLaw {
    ExactBinomialSign { n: usize },
    ExactBinomialRuns { n: usize },
    ExactGeometricTail,
    ExactReflectionSmirnov { n: usize },
    AsymptoticNormalT,
    AsymptoticNormalSignedRank { n: usize },
    AsymptoticHalfNormalSmirnov { n: usize },
    MonteCarlo(McTable),
}

impl NullLaw {
    pub fn direction(&self) -> Direction {
        match self {
            NullLaw::ExactBinomialRuns { .. } => Direction::RejectSmall,
            NullLaw::MonteCarlo(t) => t.kind.direction(),
            _ => Direction::RejectLarge,
        }
    }

    pub fn pvalue(&self, value: f64) -> Result<f64> {
        match self {
            NullLaw::ExactBinomialSign { n } => pvalue_sign(value.round() as i64, *n),
            NullLaw::ExactBinomialRuns { n } => pvalue_runs(value.round() as i64, *n),
            NullLaw::ExactGeometricTail => pvalue_tail_run(value.round() as i64),
            NullLaw::ExactReflectionSmirnov { n } => Ok(pvalue_smirnov(value.round() as i64, *n)),
            NullLaw::AsymptoticNormalT => asymptotic_pvalue(StatKind::T, value, 0),
            NullLaw::AsymptoticNormalSignedRank { n } => {
                asymptotic_pvalue(StatKind::SignedRank, value, *n)
            }
            NullLaw::AsymptoticHalfNormalSmirnov { n } => {
                asymptotic_pvalue(StatKind::Smirnov, value, *n)
            }
            NullLaw::MonteCarlo(t) => Ok(t.pvalue(value)),
        }
    }

    /// Rejection threshold at the given level: the smallest t with
    /// P_null(stat >= t) <= level for reject-large laws, mirrored for
    /// reject-small ones. Realized level never exceeds the nominal level
    /// for the exact laws.
    pub fn critical_value(&self, level: f64) -> Result<f64> {
        if level.is_nan() || level <= 0.0 || level >= 1.0 {
            return Err(Error::Domain(format!(
                "level must lie in (0,1), got {level}"
            )));
        }
        Ok(match self {
            NullLaw::ExactBinomialSign { n } => {
                let n = *n;
                // smallest k0 with upper tail <= level
                let k0 = first_true(0, n as i64 + 1, |k| binom_half_upper_tail(n, k) <= level);
                (2 * k0 - n as i64) as f64
            }
            NullLaw::ExactBinomialRuns { n } => {
                let n = *n;
                // largest r with lower tail <= level
                let first_over =
                    first_true(0, n as i64, |r| pvalue_runs(r, n).unwrap_or(1.0) > level);
                (first_over - 1) as f64
            }
            NullLaw::ExactGeometricTail => {
                let mut l = 0;
                while 0.5f64.powi(l) > level {
                    l += 1;
                }
                l as f64
            }
            NullLaw::ExactReflectionSmirnov { n } => {
                let n = *n;
                first_true(0, n as i64 + 2, |k| pvalue_smirnov(k, n) <= level) as f64
            }
            NullLaw::AsymptoticNormalT => normal_upper_quantile(level),
            NullLaw::AsymptoticNormalSignedRank { n } => {
                let nf = *n as f64;
                normal_upper_quantile(level) * (nf * nf * nf / 3.0).sqrt()
            }
            NullLaw::AsymptoticHalfNormalSmirnov { n } => {
                normal_upper_quantile(level / 2.0) * (*n as f64).sqrt()
            }
            NullLaw::MonteCarlo(t) => t.critical_value(level),
        })
    }
}

/// Smallest v in [lo, hi] with pred(v) true; hi if none. pred must be
/// monotone (false then true).
fn first_true(lo: i64, hi: i64, pred: impl Fn(i64) -> bool) -> i64 {
    let mut lo = lo;
    let mut hi = hi;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Null model context for Monte Carlo calibration of the statistics that
/// are not distribution-free.
#[derive(Debug, Clone)]
pub struct McModel {
    pub null: GeneralizedGaussian,
    pub hc_variant: HcVariant,
    pub lrt_model: Option<MixtureModel>,
}

fn sign_stat_value(kind: StatKind, st: &SignStats) -> f64 {
    match kind {
        StatKind::Sign => st.sign as f64,
        StatKind::SignedRank => st.signed_rank as f64,
        StatKind::Smirnov => st.smirnov as f64,
        StatKind::Cusum => st.cusum,
        StatKind::TailRun => st.tail_run as f64,
        StatKind::LongestRun => st.longest_run as f64,
        StatKind::NumRuns => st.num_runs_changes as f64,
        _ => unreachable!("not a sign-sequence statistic"),
    }
}

/// The canonical null-parameter echo used in table headers and cache keys.
pub fn params_echo(kind: StatKind, model: Option<&McModel>) -> Result<String> {
    if !kind.is_sign_sequence_statistic() {
        let m = model.ok_or_else(|| {
            Error::Calibration(format!(
                "the {kind} statistic needs a null model to calibrate"
            ))
        })?;
        if kind == StatKind::Lrt && m.lrt_model.is_none() {
            return Err(Error::Calibration(
                "lrt calibration needs the full mixture model".into(),
            ));
        }
    }
    Ok(params_string(kind, model))
}

fn params_string(kind: StatKind, model: Option<&McModel>) -> String {
    if kind.is_sign_sequence_statistic() {
        return "rademacher".to_string();
    }
    let m = model.expect("checked by caller");
    let null = format!("null=gg({},{})", m.null.shape(), m.null.scale());
    match kind {
        StatKind::T => null,
        StatKind::Hc => format!(
            "{null},variant={}",
            match m.hc_variant {
                HcVariant::Plus => "plus",
                HcVariant::Full => "full",
            }
        ),
        StatKind::Lrt => {
            let lm = m.lrt_model.as_ref().expect("checked by caller");
            format!(
                "{null},effect=gg({},{}),eps={},mu={}",
                lm.effect_dist().shape(),
                lm.effect_dist().scale(),
                lm.epsilon(),
                lm.mu()
            )
        }
        _ => unreachable!(),
    }
}

/// Simulate a sorted null table for one statistic.
///
/// Sign-sequence statistics are simulated directly from i.i.d. Rademacher
/// signs; t/hc/lrt draw null samples from `model.null`. Per-rep substreams
/// are derived from (seed, rep), so the result is deterministic in
/// (kind, n, reps, seed) for any worker count.
pub fn mc_calibrate(
    kind: StatKind,
    n: usize,
    reps: usize,
    seed: u64,
    model: Option<&McModel>,
) -> Result<NullLaw> {
    if reps < 100 {
        return Err(Error::Domain(format!(
            "Monte Carlo calibration requires reps >= 100, got {reps}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain(
            "Monte Carlo calibration requires n >= 1".into(),
        ));
    }

    let values: Vec<f64> = if kind.is_sign_sequence_statistic() {
        (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = substream(seed, TAG_SIGN_CALIB, rep as u64, 0);
                let seq = SignSequence::rademacher(n, &mut rng).expect("n >= 1");
                sign_stat_value(kind, &sign_sequence_stats(&seq))
            })
            .collect()
    } else {
        let m = model.ok_or_else(|| {
            Error::Calibration(format!(
                "the {kind} statistic needs a null model to calibrate"
            ))
        })?;
        if kind == StatKind::Lrt && m.lrt_model.is_none() {
            return Err(Error::Calibration(
                "lrt calibration needs the full mixture model".into(),
            ));
        }
        (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = substream(seed, TAG_SAMPLE_CALIB, rep as u64, 0);
                let x = m.null.sample_n(n, &mut rng);
                match kind {
                    StatKind::T => t_statistic(&x).unwrap_or(f64::NEG_INFINITY),
                    StatKind::Hc => {
                        hc_statistic(&x, &m.null, m.hc_variant).expect("non-empty sample")
                    }
                    StatKind::Lrt => lrt_statistic(&x, m.lrt_model.as_ref().expect("checked")),
                    _ => unreachable!(),
                }
            })
            .collect()
    };

    Ok(NullLaw::MonteCarlo(McTable::new(
        kind,
        n,
        reps,
        seed,
        params_string(kind, model),
        values,
    )))
}

/// Null tables for several sign-sequence statistics from one shared pass
/// over the simulated sign streams. Each table is identical to what
/// [`mc_calibrate`] would produce for that kind alone.
pub fn mc_calibrate_sign_family(
    kinds: &[StatKind],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<NullLaw>> {
    if reps < 100 {
        return Err(Error::Domain(format!(
            "Monte Carlo calibration requires reps >= 100, got {reps}"
        )));
    }
    if let Some(bad) = kinds.iter().find(|k| !k.is_sign_sequence_statistic()) {
        return Err(Error::Calibration(format!(
            "{bad} is not a sign-sequence statistic"
        )));
    }
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, TAG_SIGN_CALIB, rep as u64, 0);
            let seq = SignSequence::rademacher(n, &mut rng).expect("n >= 1");
            let st = sign_sequence_stats(&seq);
            kinds.iter().map(|&k| sign_stat_value(k, &st)).collect()
        })
        .collect();

    Ok(kinds
        .iter()
        .enumerate()
        .map(|(j, &kind)| {
            let values = per_rep.iter().map(|row| row[j]).collect();
            NullLaw::MonteCarlo(McTable::new(
                kind,
                n,
                reps,
                seed,
                "rademacher".into(),
                values,
            ))
        })
        .collect())
}

/// Tables produced by [`mc_calibrate_sampled`].
#[derive(Debug, Clone)]
pub struct SampledTables {
    pub t: Option<NullLaw>,
    pub hc: Option<NullLaw>,
    /// One table per entry of `lrt_models`, in order.
    pub lrt: Vec<NullLaw>,
}

/// Null tables for the sampled statistics (t, hc, and the lrt over a grid
/// of alternatives) from one shared pass of null samples. Each table is
/// identical to the single-kind [`mc_calibrate`] output.
#[allow(clippy::too_many_arguments)]
pub fn mc_calibrate_sampled(
    n: usize,
    reps: usize,
    seed: u64,
    null: &GeneralizedGaussian,
    hc_variant: HcVariant,
    want_t: bool,
    want_hc: bool,
    lrt_models: &[MixtureModel],
) -> Result<SampledTables> {
    if reps < 100 {
        return Err(Error::Domain(format!(
            "Monte Carlo calibration requires reps >= 100, got {reps}"
        )));
    }
    let width = want_t as usize + want_hc as usize + lrt_models.len();
    if width == 0 {
        return Ok(SampledTables {
            t: None,
            hc: None,
            lrt: Vec::new(),
        });
    }
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, TAG_SAMPLE_CALIB, rep as u64, 0);
            let x = null.sample_n(n, &mut rng);
            let mut row = Vec::with_capacity(width);
            if want_t {
                row.push(t_statistic(&x).unwrap_or(f64::NEG_INFINITY));
            }
            if want_hc {
                row.push(hc_statistic(&x, null, hc_variant).expect("non-empty sample"));
            }
            for m in lrt_models {
                row.push(lrt_statistic(&x, m));
            }
            row
        })
        .collect();

    let mut col = 0;
    let mut take = |kind: StatKind, params: String| {
        let values: Vec<f64> = per_rep.iter().map(|row| row[col]).collect();
        col += 1;
        NullLaw::MonteCarlo(McTable::new(kind, n, reps, seed, params, values))
    };

    let model_echo = McModel {
        null: *null,
        hc_variant,
        lrt_model: None,
    };
    let t = want_t.then(|| take(StatKind::T, params_string(StatKind::T, Some(&model_echo))));
    let hc = want_hc.then(|| take(StatKind::Hc, params_string(StatKind::Hc, Some(&model_echo))));
    let lrt = lrt_models
        .iter()
        .map(|m| {
            let echo = McModel {
                null: *null,
                hc_variant,
                lrt_model: Some(m.clone()),
            };
            take(StatKind::Lrt, params_string(StatKind::Lrt, Some(&echo)))
        })
        .collect();

    Ok(SampledTables { t, hc, lrt })
}

/// How a test is calibrated inside the simulation engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationChoice {
    /// Exact law where one exists, limiting law otherwise.
    ExactOrAsymptotic,
    MonteCarlo,
}

/// Free-function form of [`NullLaw::critical_value`].
pub fn critical_value(law: &NullLaw, level: f64) -> Result<f64> {
    law.critical_value(level)
}
