//! The generalized Gaussian family and the contaminated mixture model.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Distribution as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma_p, gamma_pq, gamma_q, ln_gamma};

/// Symmetric generalized Gaussian distribution with density
/// `exp(-|x/scale|^γ/γ) / (2 scale γ^{1/γ-1} Γ(1/γ))`.
///
/// γ = 2, scale = 1 is the standard normal; γ = 1, scale = 1 is the double
/// exponential with density e^{-|x|}/2.
#[derive(Debug, Clone, Copy)]
pub struct GeneralizedGaussian {
    gamma: f64,
    scale: f64,
    /// ln of the normalizing constant.
    log_norm: f64,
    magnitude_sampler: rand_distr::Gamma<f64>,
}

impl PartialEq for GeneralizedGaussian {
    fn eq(&self, other: &Self) -> bool {
        self.gamma == other.gamma && self.scale == other.scale
    }
}

impl GeneralizedGaussian {
    pub fn new(gamma: f64, scale: f64) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "generalized Gaussian shape must be positive and finite, got {gamma}"
            )));
        }
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "generalized Gaussian scale must be positive and finite, got {scale}"
            )));
        }
        let log_norm =
            -((2.0 * scale).ln() + (1.0 / gamma - 1.0) * gamma.ln() + ln_gamma(1.0 / gamma));
        let magnitude_sampler = rand_distr::Gamma::new(1.0 / gamma, 1.0)
            .map_err(|e| Error::InvalidParameter(format!("gamma sampler: {e}")))?;
        Ok(Self {
            gamma,
            scale,
            log_norm,
            magnitude_sampler,
        })
    }

    /// Unit-scale family member.
    pub fn standard(gamma: f64) -> Result<Self> {
        Self::new(gamma, 1.0)
    }

    pub fn standard_normal() -> Self {
        Self::new(2.0, 1.0).expect("valid parameters")
    }

    /// Double exponential with unit variance (γ = 1, scale 1/√2, since the
    /// variance at γ = 1 is 2·scale²).
    pub fn double_exponential_unit_variance() -> Self {
        Self::new(1.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid parameters")
    }

    pub fn shape(&self) -> f64 {
        self.gamma
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// |x/scale|^γ / γ, the argument passed to the incomplete gamma.
    fn kernel_arg(&self, x: f64) -> f64 {
        (x / self.scale).abs().powf(self.gamma) / self.gamma
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub fn log_density(&self, x: f64) -> f64 {
        self.log_norm - self.kernel_arg(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.5;
        }
        let p = gamma_p(1.0 / self.gamma, self.kernel_arg(x)).expect("incomplete gamma converges");
        0.5 + 0.5 * x.signum() * p
    }

    /// Survival function 1 − F(x), computed on the upper-tail side so it
    /// stays accurate for large x (the higher criticism needs this).
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0 - self.cdf(x);
        }
        0.5 * gamma_q(1.0 / self.gamma, self.kernel_arg(x)).expect("incomplete gamma converges")
    }

    /// Inverse CDF. Solved by bracketed Newton iteration on the survival
    /// function; the two half-lines are mapped onto each other so that
    /// `quantile(1-u) == -quantile(u)` holds exactly.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if u.is_nan() || u <= 0.0 || u >= 1.0 {
            return Err(Error::Domain(format!(
                "quantile requires u in (0,1), got {u}"
            )));
        }
        if u == 0.5 {
            return Ok(0.0);
        }
        if u < 0.5 {
            return Ok(-self.upper_quantile(1.0 - u));
        }
        Ok(self.upper_quantile(u))
    }

    /// Positive root of F(x) = u for u in (1/2, 1), via the identity
    /// Q(1/γ, |x/scale|^γ/γ) = 2(1-u).
    fn upper_quantile(&self, u: f64) -> f64 {
        let a = 1.0 / self.gamma;
        let target = 2.0 * (1.0 - u);
        let q_of = |x: f64| {
            gamma_pq(a, self.kernel_arg(x))
                .map(|(_, q)| q)
                .unwrap_or(f64::NAN)
        };

        let mut lo = 0.0_f64;
        let mut hi = self.scale;
        let mut expand = 0;
        while q_of(hi) > target && expand < 2200 {
            lo = hi;
            hi *= 2.0;
            expand += 1;
        }

        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = q_of(x) - target;
            if g > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let dens = self.density(x);
            let newton = if dens > 0.0 {
                x + g / (2.0 * dens)
            } else {
                f64::NAN
            };
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 1e-14 * (1.0 + x.abs()) && g.abs() <= 1e-13 {
                return next;
            }
            x = next;
        }
        x
    }

    /// One draw. The magnitude is `scale·(γ·U)^{1/γ}` with U ~ Gamma(1/γ, 1),
    /// and the sign is an independent fair coin.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = self.magnitude_sampler.sample(rng);
        let magnitude = self.scale * (self.gamma * u).powf(1.0 / self.gamma);
        if rng.gen::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// How observations are allocated between the null and effect components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Each observation is independently contaminated with probability ε.
    Bernoulli,
    /// Exactly ⌊nε⌋ observations come from the effect component, at
    /// uniformly shuffled positions.
    ExactCount,
}

/// Rounding convention for the effect count in `ExactCount` mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum Bracket {
    #[default]
    Floor,
    Nearest,
}

/// Contaminated mixture `(1-ε) F(x) + ε G(x-μ)`; ε = 0 recovers the null.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    null_dist: GeneralizedGaussian,
    effect_dist: GeneralizedGaussian,
    epsilon: f64,
    mu: f64,
}

impl MixtureModel {
    pub fn new(
        null_dist: GeneralizedGaussian,
        effect_dist: GeneralizedGaussian,
        epsilon: f64,
        mu: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mixture fraction must lie in [0,1], got {epsilon}"
            )));
        }
        if mu < 0.0 || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "effect magnitude must be nonnegative and finite, got {mu}"
            )));
        }
        Ok(Self {
            null_dist,
            effect_dist,
            epsilon,
            mu,
        })
    }

    /// Pure-null model over `dist`.
    pub fn null(dist: GeneralizedGaussian) -> Self {
        Self::new(dist, dist, 0.0, 0.0).expect("valid parameters")
    }

    pub fn null_dist(&self) -> &GeneralizedGaussian {
        &self.null_dist
    }

    pub fn effect_dist(&self) -> &GeneralizedGaussian {
        &self.effect_dist
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// True when the mixture law equals the null law exactly.
    pub fn reduces_to_null(&self) -> bool {
        self.epsilon == 0.0 || (self.mu == 0.0 && self.null_dist == self.effect_dist)
    }

    /// ⌊nε⌋, the number of effect draws in `ExactCount` mode.
    pub fn effect_count(&self, n: usize) -> usize {
        self.effect_count_with(n, Bracket::Floor)
    }

    pub fn effect_count_with(&self, n: usize, bracket: Bracket) -> usize {
        let raw = n as f64 * self.epsilon;
        let k = match bracket {
            Bracket::Floor => raw.floor(),
            Bracket::Nearest => raw.round(),
        };
        (k as usize).min(n)
    }

    /// Draw a sample of size n. `ExactCount` uses the ⌊nε⌋ convention; use
    /// [`MixtureModel::sample_with_effect_count`] for a different bracket.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, mode: SamplingMode, rng: &mut R) -> Vec<f64> {
        match mode {
            SamplingMode::Bernoulli => (0..n)
                .map(|_| {
                    if rng.gen::<f64>() < self.epsilon {
                        self.effect_dist.sample(rng) + self.mu
                    } else {
                        self.null_dist.sample(rng)
                    }
                })
                .collect(),
            SamplingMode::ExactCount => {
                let k = self.effect_count(n);
                self.sample_with_effect_count(n, k, rng)
            }
        }
    }

    /// Exactly `k` effect draws and `n-k` null draws, uniformly shuffled.
    pub fn sample_with_effect_count<R: Rng + ?Sized>(
        &self,
        n: usize,
        k: usize,
        rng: &mut R,
    ) -> Vec<f64> {
        let k = k.min(n);
        let mut out = Vec::with_capacity(n);
        for _ in 0..k {
            out.push(self.effect_dist.sample(rng) + self.mu);
        }
        for _ in k..n {
            out.push(self.null_dist.sample(rng));
        }
        out.shuffle(rng);
        out
    }
}

/// Sparsity regime of the contamination fraction ε_n = n^{-β}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// β < 1/2 with μ_n = n^{s-1/2}.
    DenseS,
    /// β > 1/2 (or any β) with μ_n = (γ r log n)^{1/γ}.
    SparseR,
}

/// The (β, r-or-s) parameterization of the alternative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityParam {
    beta: f64,
    value: f64,
    regime: Regime,
}

impl SparsityParam {
    pub fn dense_s(beta: f64, s: f64) -> Result<Self> {
        if beta.is_nan() || beta <= 0.0 || beta >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0,1), got {beta}"
            )));
        }
        if s.is_nan() || s <= 0.0 || s >= 0.5 {
            return Err(Error::InvalidParameter(format!(
                "dense strength s must lie in (0, 1/2), got {s}"
            )));
        }
        Ok(Self {
            beta,
            value: s,
            regime: Regime::DenseS,
        })
    }

    pub fn sparse_r(beta: f64, r: f64) -> Result<Self> {
        if beta.is_nan() || beta <= 0.0 || beta >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0,1), got {beta}"
            )));
        }
        if r <= 0.0 || !r.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sparse strength r must be positive, got {r}"
            )));
        }
        Ok(Self {
            beta,
            value: r,
            regime: Regime::SparseR,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn strength(&self) -> f64 {
        self.value
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// ε_n = n^{-β}.
    pub fn epsilon(&self, n: usize) -> f64 {
        (n as f64).powf(-self.beta)
    }
}

/// Effect magnitude μ_n for sample size n:
/// `(γ r log n)^{1/γ}` in the sparse regime, `n^{s-1/2}` in the dense one
/// (same dense formula for every γ).
pub fn mu_from_param(gamma: f64, n: usize, p: &SparsityParam) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "mu_from_param requires n >= 2 so that log n > 0, got {n}"
        )));
    }
    let nf = n as f64;
    Ok(match p.regime {
        Regime::SparseR => (gamma * p.value * nf.ln()).powf(1.0 / gamma),
        Regime::DenseS => nf.powf(p.value - 0.5),
    })
}
