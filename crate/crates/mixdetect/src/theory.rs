//! Closed-form detection boundaries in the (β, r) plane and regime
//! classification for the generalized Gaussian mixture model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparsity regimes of ε_n = n^{-β}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityRegime {
    /// β < 1/2.
    Dense,
    /// β > 1/2 with γ <= 1, where the sparse regime is not subdivided.
    Sparse,
    /// γ > 1 and 1/2 < β < 1 − 2^{-γ/(γ-1)}.
    ModeratelySparse,
    /// γ > 1 and β above the split point.
    VerySparse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeClassification {
    pub regime: SparsityRegime,
    /// The γ-dependent split point 1 − 2^{-γ/(γ-1)}; None for γ <= 1.
    pub boundary_beta: Option<f64>,
}

/// The moderately/very sparse split point for γ > 1.
pub fn regime_split_beta(gamma: f64) -> Option<f64> {
    (gamma > 1.0).then(|| 1.0 - 2f64.powf(-gamma / (gamma - 1.0)))
}

pub fn classify_regime(gamma: f64, beta: f64) -> Result<RegimeClassification> {
    check_gamma(gamma)?;
    if beta.is_nan() || beta <= 0.0 || beta >= 1.0 {
        return Err(Error::Domain(format!("beta must lie in (0,1), got {beta}")));
    }
    let boundary_beta = regime_split_beta(gamma);
    let regime = if beta < 0.5 {
        SparsityRegime::Dense
    } else {
        match boundary_beta {
            None => SparsityRegime::Sparse,
            Some(split) if beta < split => SparsityRegime::ModeratelySparse,
            Some(_) => SparsityRegime::VerySparse,
        }
    };
    Ok(RegimeClassification {
        regime,
        boundary_beta,
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::Domain(format!(
            "shape parameter must be positive and finite, got {gamma}"
        )));
    }
    Ok(())
}

/// (2^{1/(γ-1)} − 1)^{γ-1}, evaluated in log space so it stays finite as
/// γ → 1⁺ (the limit is 2).
fn moderate_coefficient(gamma: f64) -> f64 {
    let h = gamma - 1.0;
    // (2^{1/h} - 1)^h = exp(ln 2 + h ln(1 - 2^{-1/h}))
    let small = (-std::f64::consts::LN_2 / h).exp();
    (std::f64::consts::LN_2 + h * (-small).ln_1p()).exp()
}

/// Detection boundary ρ*_γ(β) of the testing problem on β ∈ [1/2, 1]:
/// for γ > 1 it is (2^{1/(γ-1)} − 1)^{γ-1}(β − 1/2) below the regime split
/// and (1 − (1−β)^{1/γ})^γ above; for γ <= 1 it is 2(β − 1/2). The two
/// branches agree at the split, and the endpoints take the limit values.
pub fn rho_star(gamma: f64, beta: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(0.5..=1.0).contains(&beta) {
        return Err(Error::Domain(format!(
            "rho_star is defined for beta in [1/2, 1], got {beta}"
        )));
    }
    if gamma <= 1.0 {
        return Ok(2.0 * (beta - 0.5));
    }
    let split = 1.0 - 2f64.powf(-gamma / (gamma - 1.0));
    Ok(if beta < split {
        moderate_coefficient(gamma) * (beta - 0.5)
    } else {
        (1.0 - (1.0 - beta).powf(1.0 / gamma)).powf(gamma)
    })
}

/// Detection boundary of the tail-run test (and of the max test):
/// ρ^tail_γ(β) = (1 − (1−β)^{1/γ})^γ on β ∈ [0, 1].
pub fn rho_tail(gamma: f64, beta: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!(
            "rho_tail is defined for beta in [0, 1], got {beta}"
        )));
    }
    Ok((1.0 - (1.0 - beta).powf(1.0 / gamma)).powf(gamma))
}

/// Detection boundary of the longest-run test: β for γ <= 1 and
/// (1 − (1−β)^{1/γ})^γ for γ > 1, i.e. min(β, ρ^tail).
pub fn rho_long(gamma: f64, beta: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!(
            "rho_long is defined for beta in [0, 1], got {beta}"
        )));
    }
    if gamma <= 1.0 {
        Ok(beta)
    } else {
        rho_tail(gamma, beta)
    }
}

/// Dense-regime merging threshold in s for β ∈ (0, 1/2): the hypotheses
/// merge below s = β when γ >= 1/2, and below
/// s = 1/2 − (1 − 2β)/(1 + 2γ) when γ < 1/2.
pub fn dense_threshold_s(gamma: f64, beta: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if beta.is_nan() || beta <= 0.0 || beta >= 0.5 {
        return Err(Error::Domain(format!(
            "dense_threshold_s is defined for beta in (0, 1/2), got {beta}"
        )));
    }
    Ok(if gamma >= 0.5 {
        beta
    } else {
        0.5 - (1.0 - 2.0 * beta) / (1.0 + 2.0 * gamma)
    })
}

/// Merging threshold r = 2β − 1 for the cross-parameter model where the
/// effect distribution has a lighter tail than the null (γ < η).
pub fn cross_gamma_lower(beta: f64) -> Result<f64> {
    if beta.is_nan() || beta <= 0.5 || beta >= 1.0 {
        return Err(Error::Domain(format!(
            "cross_gamma_lower is defined for beta in (1/2, 1), got {beta}"
        )));
    }
    Ok(2.0 * beta - 1.0)
}

/// One row of the phase-diagram table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRow {
    pub beta: f64,
    /// None for β < 1/2, where the optimal boundary is not defined.
    pub rho_star: Option<f64>,
    pub rho_tail: f64,
    pub rho_long: f64,
}

/// Tabulate all three boundaries over a β grid (the data behind the phase
/// diagram plots).
pub fn boundary_grid(gamma: f64, betas: &[f64]) -> Result<Vec<BoundaryRow>> {
    betas
        .iter()
        .map(|&beta| {
            let rho_star = if beta >= 0.5 {
                Some(rho_star(gamma, beta)?)
            } else {
                None
            };
            Ok(BoundaryRow {
                beta,
                rho_star,
                rho_tail: rho_tail(gamma, beta)?,
                rho_long: rho_long(gamma, beta)?,
            })
        })
        .collect()
}
