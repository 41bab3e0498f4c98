//! Single-model performance measures.
//!
//! All measures are population quantities computed from a
//! [`GroupedModelTable`]. Only the prevalences `π(r)` and masses `g(r)` enter
//! the precision measures; the assigned-risk labels matter for calibration
//! bias and, through their ranks, for concordance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::table::GroupedModelTable;

/// Squared overall calibration bias `Σ g(r) (r - π(r))²`.
pub fn calibration_bias_sq(t: &GroupedModelTable) -> f64 {
    t.groups()
        .iter()
        .map(|g| g.mass * (g.risk - g.prevalence).powi(2))
        .sum()
}

/// `var_R[π(r)]`, the spread of outcome prevalences across risk groups.
pub fn prevalence_variance(t: &GroupedModelTable) -> f64 {
    let pi = t.population_mean();
    t.groups()
        .iter()
        .map(|g| g.mass * (g.prevalence - pi).powi(2))
        .sum()
}

/// Mean squared error between outcomes and assigned risks.
///
/// Within a group, `E[(y - r)²] = π(r)(1 - π(r)) + (r - π(r))²`.
pub fn brier_score(t: &GroupedModelTable) -> f64 {
    t.groups()
        .iter()
        .map(|g| g.mass * (g.prevalence * (1.0 - g.prevalence) + (g.risk - g.prevalence).powi(2)))
        .sum()
}

/// `π(1 - π) - var_R[π(r)]`.
pub fn precision_loss(t: &GroupedModelTable) -> f64 {
    let pi = t.population_mean();
    pi * (1.0 - pi) - prevalence_variance(t)
}

fn nondegenerate_mean(t: &GroupedModelTable) -> Result<f64> {
    let pi = t.population_mean();
    if pi <= f64::EPSILON || pi >= 1.0 - f64::EPSILON {
        Err(Error::DegenerateOutcome(pi))
    } else {
        Ok(pi)
    }
}

/// Risk-outcome correlation `sqrt(var_R[π(r)] / (π(1 - π)))`.
pub fn ro_correlation(t: &GroupedModelTable) -> Result<f64> {
    let pi = nondegenerate_mean(t)?;
    Ok((prevalence_variance(t) / (pi * (1.0 - pi))).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalMass {
    pub risk: f64,
    pub probability: f64,
}

/// Distributions of assigned risk among those with (`h1`) and without (`h0`)
/// the outcome. Both are indexed like the table's groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalRiskDistributions {
    pub h1: Vec<ConditionalMass>,
    pub h0: Vec<ConditionalMass>,
}

pub fn conditional_distributions(t: &GroupedModelTable) -> Result<ConditionalRiskDistributions> {
    let pi = nondegenerate_mean(t)?;
    let (h1, h0) = t
        .groups()
        .iter()
        .map(|g| {
            (
                ConditionalMass {
                    risk: g.risk,
                    probability: g.mass * g.prevalence / pi,
                },
                ConditionalMass {
                    risk: g.risk,
                    probability: g.mass * (1.0 - g.prevalence) / (1.0 - pi),
                },
            )
        })
        .unzip();
    Ok(ConditionalRiskDistributions { h1, h0 })
}

/// `E[π(r) | y = 1] - E[π(r) | y = 0]`; equals the squared RO correlation.
pub fn integrated_discrimination(t: &GroupedModelTable) -> Result<f64> {
    let h = conditional_distributions(t)?;
    Ok(t.groups()
        .iter()
        .zip(h.h1.iter().zip(&h.h0))
        .map(|(g, (h1, h0))| g.prevalence * (h1.probability - h0.probability))
        .sum())
}

/// Probability that a case's assigned risk exceeds a non-case's, ties
/// counted half: `Σ_r H1(r) h0(r)` with `H1(r) = ½ h1(r) + Σ_{u>r} h1(u)`.
pub fn concordance(t: &GroupedModelTable) -> Result<f64> {
    let h = conditional_distributions(t)?;
    // groups are sorted by strictly increasing assigned risk
    let mut above = 0.0;
    let mut zeta = 0.0;
    for (h1, h0) in h.h1.iter().zip(&h.h0).rev() {
        zeta += (0.5 * h1.probability + above) * h0.probability;
        above += h1.probability;
    }
    Ok(zeta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttributePoint {
    pub risk: f64,
    pub prevalence: f64,
    pub mass: f64,
}

impl AttributePoint {
    pub fn bias(&self) -> f64 {
        self.risk - self.prevalence
    }
}

/// Points `(r, π(r))` with their weights, in increasing `r`.
pub fn attributes_diagram(t: &GroupedModelTable) -> Vec<AttributePoint> {
    t.groups()
        .iter()
        .map(|g| AttributePoint {
            risk: g.risk,
            prevalence: g.prevalence,
            mass: g.mass,
        })
        .collect()
}

/// Every single-model measure. The correlation-based measures are `None`
/// when the outcome prevalence is 0 or 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub groups: usize,
    pub mean: f64,
    pub bias_sq: f64,
    pub precision_loss: f64,
    pub brier: f64,
    pub prevalence_variance: f64,
    pub ro_correlation: Option<f64>,
    pub integrated_discrimination: Option<f64>,
    pub concordance: Option<f64>,
}

impl MetricsReport {
    pub fn evaluate(t: &GroupedModelTable) -> Self {
        Self {
            groups: t.len(),
            mean: t.population_mean(),
            bias_sq: calibration_bias_sq(t),
            precision_loss: precision_loss(t),
            brier: brier_score(t),
            prevalence_variance: prevalence_variance(t),
            ro_correlation: ro_correlation(t).ok(),
            integrated_discrimination: integrated_discrimination(t).ok(),
            concordance: concordance(t).ok(),
        }
    }

    pub fn bias(&self) -> f64 {
        self.bias_sq.sqrt()
    }
}
