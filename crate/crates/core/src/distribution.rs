//! Discrete distributions of true risk.
//!
//! A [`RiskDistribution`] is a finite set of distinct risk values, each
//! carrying the fraction of the population at that risk. The two extremes of
//! heterogeneity for a fixed prevalence are the constant distribution (all
//! mass at the mean) and the deterministic one (mass only at 0 and 1).

use serde::Serialize;

use crate::error::{check_finite, check_probability, Error, Result};

/// Absolute tolerance under which two risk values are treated as equal.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Allowed deviation of a total mass from 1.
pub const MASS_SUM_TOLERANCE: f64 = 1e-9;

/// Masses already summing to 1 within rounding noise are left untouched, so
/// that reloading a serialised table reproduces it bit for bit.
pub(crate) const RENORMALIZE_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskPoint {
    pub risk: f64,
    pub mass: f64,
}

/// A validated discrete distribution of true risks, sorted by risk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskDistribution {
    points: Vec<RiskPoint>,
}

impl RiskDistribution {
    /// Builds a distribution from `(risk, mass)` pairs.
    ///
    /// Zero-mass points are dropped, equal risks (within [`MERGE_TOLERANCE`])
    /// are merged, and the masses are renormalised after checking that they
    /// sum to one.
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut raw = Vec::new();
        for (risk, mass) in points {
            check_probability("risk", risk)?;
            check_finite("mass", mass)?;
            if mass < 0.0 {
                return Err(Error::NegativeMass(mass));
            }
            check_probability("mass", mass)?;
            if mass > 0.0 {
                raw.push(RiskPoint { risk, mass });
            }
        }
        if raw.is_empty() {
            return Err(Error::EmptyInput);
        }
        let total: f64 = raw.iter().map(|p| p.mass).sum();
        if (total - 1.0).abs() > MASS_SUM_TOLERANCE {
            return Err(Error::MassSumOutOfTolerance {
                sum: total,
                tolerance: MASS_SUM_TOLERANCE,
            });
        }

        raw.sort_by(|a, b| a.risk.total_cmp(&b.risk));
        let mut points: Vec<RiskPoint> = Vec::with_capacity(raw.len());
        // Runs are anchored at their first risk so merging is not transitive
        // across long chains of near-equal values.
        let mut anchor = f64::NAN;
        for p in raw {
            match points.last_mut() {
                Some(last) if (p.risk - anchor).abs() <= MERGE_TOLERANCE => {
                    let mass = last.mass + p.mass;
                    last.risk = (last.risk * last.mass + p.risk * p.mass) / mass;
                    last.mass = mass;
                }
                _ => {
                    anchor = p.risk;
                    points.push(p);
                }
            }
        }
        if (total - 1.0).abs() > RENORMALIZE_THRESHOLD {
            for p in &mut points {
                p.mass /= total;
            }
        }
        Ok(Self { points })
    }

    /// All mass at `pi`.
    pub fn constant(pi: f64) -> Result<Self> {
        check_probability("pi", pi)?;
        Self::new([(pi, 1.0)])
    }

    /// Mass `1 - pi` at risk 0 and `pi` at risk 1.
    pub fn deterministic(pi: f64) -> Result<Self> {
        check_probability("pi", pi)?;
        Self::new([(0.0, 1.0 - pi), (1.0, pi)])
    }

    pub fn points(&self) -> &[RiskPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Population prevalence of the outcome.
    pub fn mean(&self) -> f64 {
        self.points.iter().map(|p| p.mass * p.risk).sum()
    }

    /// Heterogeneity of true risks; lies in `[0, mean * (1 - mean)]`.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.points
            .iter()
            .map(|p| p.mass * (p.risk - mean).powi(2))
            .sum()
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }
}
