//! Test statistics for one-sided heterogeneity, computed from a sample or
//! from its sign sequence.

use serde::{Deserialize, Serialize};

use crate::distributions::{GeneralizedGaussian, MixtureModel};
use crate::error::{Error, Result};
use crate::sign_sequence::SignSequence;

/// Every statistic in the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatKind {
    Sign,
    SignedRank,
    Smirnov,
    Cusum,
    TailRun,
    LongestRun,
    NumRuns,
    T,
    Hc,
    Lrt,
}

impl StatKind {
    pub const ALL: [StatKind; 10] = [
        StatKind::Sign,
        StatKind::SignedRank,
        StatKind::Smirnov,
        StatKind::Cusum,
        StatKind::TailRun,
        StatKind::LongestRun,
        StatKind::NumRuns,
        StatKind::T,
        StatKind::Hc,
        StatKind::Lrt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StatKind::Sign => "sign",
            StatKind::SignedRank => "signed-rank",
            StatKind::Smirnov => "smirnov",
            StatKind::Cusum => "cusum",
            StatKind::TailRun => "tail-run",
            StatKind::LongestRun => "longest-run",
            StatKind::NumRuns => "num-runs",
            StatKind::T => "t",
            StatKind::Hc => "hc",
            StatKind::Lrt => "lrt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        StatKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown test '{s}'")))
    }

    /// The number-of-runs test rejects for small values; everything else
    /// rejects for large values.
    pub fn direction(&self) -> Direction {
        match self {
            StatKind::NumRuns => Direction::RejectSmall,
            _ => Direction::RejectLarge,
        }
    }

    /// True for the statistics that are functions of the sign sequence only.
    pub fn is_sign_sequence_statistic(&self) -> bool {
        matches!(
            self,
            StatKind::Sign
                | StatKind::SignedRank
                | StatKind::Smirnov
                | StatKind::Cusum
                | StatKind::TailRun
                | StatKind::LongestRun
                | StatKind::NumRuns
        )
    }
}

impl std::fmt::Display for StatKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    RejectLarge,
    RejectSmall,
}

/// A computed statistic together with its rejection direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatValue {
    pub kind: StatKind,
    pub value: f64,
    pub direction: Direction,
}

impl StatValue {
    pub fn new(kind: StatKind, value: f64) -> Self {
        Self {
            kind,
            value,
            direction: kind.direction(),
        }
    }
}

/// All seven sign-sequence statistics, computed in a single pass with the
/// partial sums S_k shared between the Smirnov and CUSUM statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignStats {
    /// S = Σ ξ_(i)
    pub sign: i64,
    /// W = Σ (n-i+1) ξ_(i)
    pub signed_rank: i64,
    /// S★ = max_k S_k
    pub smirnov: i64,
    /// M = max_k S_k/√k
    pub cusum: f64,
    /// L‡ = length of the leading run of +1
    pub tail_run: usize,
    /// L = longest run of +1 anywhere
    pub longest_run: usize,
    /// R = number of sign changes (the number of runs is 1 + R)
    pub num_runs_changes: usize,
}

pub fn sign_sequence_stats(seq: &SignSequence) -> SignStats {
    let signs = seq.signs();
    let n = signs.len();
    let mut s: i64 = 0;
    let mut w: i64 = 0;
    let mut smax = i64::MIN;
    let mut m = f64::NEG_INFINITY;
    let mut tail_run = 0usize;
    let mut in_tail = true;
    let mut longest = 0usize;
    let mut run = 0usize;
    let mut changes = 0usize;
    let mut prev: i8 = 0;

    for (i, &sg) in signs.iter().enumerate() {
        let sgn = sg as i64;
        s += sgn;
        w += (n - i) as i64 * sgn;
        if s > smax {
            smax = s;
        }
        let scaled = s as f64 / ((i + 1) as f64).sqrt();
        if scaled > m {
            m = scaled;
        }
        if sg == 1 {
            if in_tail {
                tail_run += 1;
            }
            run += 1;
            if run > longest {
                longest = run;
            }
        } else {
            in_tail = false;
            run = 0;
        }
        if i > 0 && sg != prev {
            changes += 1;
        }
        prev = sg;
    }

    SignStats {
        sign: s,
        signed_rank: w,
        smirnov: smax,
        cusum: m,
        tail_run,
        longest_run: longest,
        num_runs_changes: changes,
    }
}

pub fn sign_statistic(seq: &SignSequence) -> i64 {
    sign_sequence_stats(seq).sign
}

pub fn signed_rank_statistic(seq: &SignSequence) -> i64 {
    sign_sequence_stats(seq).signed_rank
}

pub fn smirnov_statistic(seq: &SignSequence) -> i64 {
    sign_sequence_stats(seq).smirnov
}

pub fn cusum_statistic(seq: &SignSequence) -> f64 {
    sign_sequence_stats(seq).cusum
}

pub fn tail_run_statistic(seq: &SignSequence) -> usize {
    sign_sequence_stats(seq).tail_run
}

pub fn longest_run_statistic(seq: &SignSequence) -> usize {
    sign_sequence_stats(seq).longest_run
}

pub fn num_runs_statistic(seq: &SignSequence) -> usize {
    sign_sequence_stats(seq).num_runs_changes
}

/// T = Σ x_i / sqrt(Σ (x_i - x̄)²), exactly in this normalization.
pub fn t_statistic(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Domain(format!(
            "t statistic requires n >= 2, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let sum: f64 = x.iter().sum();
    let mean = sum / n;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss.is_nan() || ss <= 0.0 {
        return Err(Error::DegenerateSample(
            "t statistic is undefined for a constant sample".into(),
        ));
    }
    Ok(sum / ss.sqrt())
}

/// Admissible-index rule for the higher criticism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HcVariant {
    /// Only indices with p_(i) >= 1/n, the HC⁺ recommendation.
    Plus,
    /// All indices; p-values are clamped into [1/(10n), 1 − 1/(10n)] to keep
    /// the statistic finite.
    Full,
}

/// Higher criticism from one-sided p-values: the max over admissible i of
/// √n (i/n − p_(i)) / √(p_(i)(1 − p_(i))) with p sorted ascending.
///
/// Returns −∞ when the variant admits no index.
pub fn hc_from_pvalues(pvalues: &[f64], variant: HcVariant) -> f64 {
    let n = pvalues.len();
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    let nf = n as f64;
    let lo = 1.0 / (10.0 * nf);
    let hi = 1.0 - lo;
    let mut p: Vec<f64> = pvalues.iter().map(|v| v.clamp(lo, hi)).collect();
    p.sort_by(f64::total_cmp);

    let sqrt_n = nf.sqrt();
    let mut best = f64::NEG_INFINITY;
    for (i, &pi) in p.iter().enumerate() {
        if matches!(variant, HcVariant::Plus) && pi < 1.0 / nf {
            continue;
        }
        let frac = (i + 1) as f64 / nf;
        let val = sqrt_n * (frac - pi) / (pi * (1.0 - pi)).sqrt();
        if val > best {
            best = val;
        }
    }
    best
}

/// Higher criticism of a sample against a known symmetric null.
pub fn hc_statistic(x: &[f64], null: &GeneralizedGaussian, variant: HcVariant) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Domain(
            "hc statistic requires a non-empty sample".into(),
        ));
    }
    let p: Vec<f64> = x.iter().map(|&v| null.sf(v)).collect();
    Ok(hc_from_pvalues(&p, variant))
}

/// Log likelihood ratio Σ log(1 − ε + ε g(x_i − μ)/f(x_i)) for a fully
/// specified mixture model, evaluated stably in log space.
pub fn lrt_statistic(x: &[f64], m: &MixtureModel) -> f64 {
    let eps = m.epsilon();
    if m.reduces_to_null() {
        return 0.0;
    }
    let ln_keep = (1.0 - eps).ln(); // -inf at eps = 1
    let ln_eps = eps.ln();
    x.iter()
        .map(|&xi| {
            let log_ratio =
                m.effect_dist().log_density(xi - m.mu()) - m.null_dist().log_density(xi);
            log_sum_exp(ln_keep, ln_eps + log_ratio)
        })
        .sum()
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
