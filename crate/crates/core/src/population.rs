//! The four-covariate synthetic population family.
//!
//! Covariates `z0 ∈ {-1, 0, 1}` and `z1, z2, z3 ∈ {0, 1}` determine risk
//! through
//!
//! ```text
//! p = 0.1 + 0.01 * z0 * 2^(z1+z2+z3)   for z0 ∈ {-1, 0}
//! p = 0.1 + 0.08 * 2^(z1+z2+z3)        for z0 = 1
//! ```
//!
//! with `z0` distributed as (0.8, 0.1, 0.1) and each binary covariate
//! independently equal to 1 with probability `alpha`. Every member of the
//! family has mean risk 0.1 and risk variance `7.2e-4 * (1 + 3 alpha)^3`.
//! `alpha = 0.2` and `alpha = 0.8` are the worked-example populations A and B.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::distribution::RiskDistribution;
use crate::error::{Error, Result};
use crate::table::{GroupKey, GroupedModelTable, JointCell, JointModelTable};

pub const POPULATION_A: f64 = 0.2;
pub const POPULATION_B: f64 = 0.8;

const Z0_WEIGHTS: [(i8, f64); 3] = [(-1, 0.8), (0, 0.1), (1, 0.1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Covariate {
    Z0,
    Z1,
    Z2,
    Z3,
}

impl Covariate {
    pub const ALL: [Covariate; 4] = [Covariate::Z0, Covariate::Z1, Covariate::Z2, Covariate::Z3];

    fn index(self) -> usize {
        self as usize
    }
}

/// A nonempty subset of `{z0, z1, z2, z3}`, written as concatenated labels
/// such as `z0z1z2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CovariateSet(u8);

impl CovariateSet {
    pub fn new(covariates: &[Covariate]) -> Result<Self> {
        let bits = covariates.iter().fold(0u8, |acc, c| acc | 1 << c.index());
        if bits == 0 {
            return Err(Error::Parse("covariate set must be nonempty".into()));
        }
        Ok(Self(bits))
    }

    /// `{z0, z1, z2, z3}`: the perfect model.
    pub fn all() -> Self {
        Self(0b1111)
    }

    pub fn contains(self, c: Covariate) -> bool {
        self.0 & (1 << c.index()) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Covariate> {
        Covariate::ALL
            .into_iter()
            .filter(move |c| self.contains(*c))
    }

    pub fn is_subset(self, other: CovariateSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Every nonempty subset, in bitmask order.
    pub fn every() -> impl Iterator<Item = CovariateSet> {
        (1u8..16).map(CovariateSet)
    }
}

impl fmt::Display for CovariateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.iter() {
            write!(f, "z{}", c.index())?;
        }
        Ok(())
    }
}

impl FromStr for CovariateSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid covariate set {s:?}; expected e.g. z0z1z2"));
        let mut rest = s.trim();
        let mut picked = Vec::new();
        while !rest.is_empty() {
            let tail = rest.strip_prefix('z').ok_or_else(bad)?;
            let (digit, after) = tail.split_at(tail.chars().next().map_or(0, char::len_utf8));
            let c = match digit {
                "0" => Covariate::Z0,
                "1" => Covariate::Z1,
                "2" => Covariate::Z2,
                "3" => Covariate::Z3,
                _ => return Err(bad()),
            };
            if picked.contains(&c) {
                return Err(bad());
            }
            picked.push(c);
            rest = after;
        }
        Self::new(&picked)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovariateCell {
    pub z0: i8,
    pub z1: u8,
    pub z2: u8,
    pub z3: u8,
    pub mass: f64,
    pub true_risk: f64,
}

impl CovariateCell {
    fn value(&self, c: Covariate) -> i8 {
        match c {
            Covariate::Z0 => self.z0,
            Covariate::Z1 => self.z1 as i8,
            Covariate::Z2 => self.z2 as i8,
            Covariate::Z3 => self.z3 as i8,
        }
    }

    /// Label of the group this cell falls in under a model using `set`.
    pub fn label(&self, set: CovariateSet) -> String {
        set.iter()
            .map(|c| format!("z{}={}", c.index(), self.value(c)))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// True risk of a covariate combination.
pub fn true_risk(z0: i8, z1: u8, z2: u8, z3: u8) -> f64 {
    let scale = f64::from(1u32 << (z1 + z2 + z3));
    if z0 == 1 {
        0.1 + 0.08 * scale
    } else {
        0.1 + 0.01 * f64::from(z0) * scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticPopulation {
    alpha: f64,
    cells: Vec<CovariateCell>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name: "alpha",
            value: alpha,
            reason: "must lie in [0, 1]",
        })
    }
}

impl SyntheticPopulation {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let bern = |z: u8| if z == 1 { alpha } else { 1.0 - alpha };
        let mut cells = Vec::with_capacity(24);
        for (z0, tau) in Z0_WEIGHTS {
            for z1 in 0..2u8 {
                for z2 in 0..2u8 {
                    for z3 in 0..2u8 {
                        cells.push(CovariateCell {
                            z0,
                            z1,
                            z2,
                            z3,
                            mass: tau * bern(z1) * bern(z2) * bern(z3),
                            true_risk: true_risk(z0, z1, z2, z3),
                        });
                    }
                }
            }
        }
        Ok(Self { alpha, cells })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// All 24 covariate cells, including any with zero mass.
    pub fn cells(&self) -> &[CovariateCell] {
        &self.cells
    }

    /// Closed-form variance of true risks for this family.
    pub fn closed_form_variance(&self) -> f64 {
        7.2e-4 * (1.0 + 3.0 * self.alpha).powi(3)
    }

    pub fn risk_distribution(&self) -> RiskDistribution {
        RiskDistribution::new(self.cells.iter().map(|c| (c.true_risk, c.mass)))
            .expect("cell masses form a probability distribution")
    }

    /// The well-calibrated model that sees only the covariates in `set`.
    ///
    /// Cells are grouped by their values on `set`; each group is assigned its
    /// mean true risk, and groups with coinciding prevalences are merged.
    pub fn project_model(&self, set: CovariateSet) -> GroupedModelTable {
        let mut acc: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for c in self.cells.iter().filter(|c| c.mass > 0.0) {
            let e = acc.entry(c.label(set)).or_default();
            e.0 += c.mass;
            e.1 += c.mass * c.true_risk;
        }
        GroupedModelTable::calibrated(
            acc.into_iter()
                .map(|(label, (mass, weighted))| (GroupKey::new(label), mass, weighted / mass)),
        )
        .expect("projection of a valid population is a valid table")
    }

    /// The model that knows every covariate and so assigns true risks.
    pub fn perfect_model(&self) -> GroupedModelTable {
        self.project_model(CovariateSet::all())
    }

    /// Cross-classifies the models built on `first` and `second`.
    ///
    /// Each joint cell carries both models' (calibrated) assigned risks and
    /// the mean true risk of its members.
    pub fn cross_classify(&self, first: CovariateSet, second: CovariateSet) -> JointModelTable {
        let m1 = self.project_model(first);
        let m2 = self.project_model(second);
        let lookup1 = label_index(&m1);
        let lookup2 = label_index(&m2);

        let mut acc: BTreeMap<(GroupKey, GroupKey), (f64, f64, f64, f64)> = BTreeMap::new();
        for c in self.cells.iter().filter(|c| c.mass > 0.0) {
            let (k1, r1) = &lookup1[c.label(first).as_str()];
            let (k2, r2) = &lookup2[c.label(second).as_str()];
            let e = acc
                .entry(((*k1).clone(), (*k2).clone()))
                .or_insert((*r1, *r2, 0.0, 0.0));
            e.2 += c.mass;
            e.3 += c.mass * c.true_risk;
        }
        JointModelTable::new(
            acc.into_iter()
                .map(|((key1, key2), (risk1, risk2, mass, w))| JointCell {
                    key1,
                    key2,
                    risk1,
                    risk2,
                    mass,
                    prevalence: w / mass,
                }),
        )
        .expect("cross-classification of a valid population is a valid table")
    }
}

fn label_index(table: &GroupedModelTable) -> HashMap<&str, (&GroupKey, f64)> {
    table
        .groups()
        .iter()
        .flat_map(|g| {
            g.key
                .as_str()
                .split('|')
                .map(move |part| (part, (&g.key, g.risk)))
        })
        .collect()
}

/// Closed-form prevalence in the groups of the `{z0, z1}` model, or of the
/// `{z0, z1, z2}` model when `z2` is given.
pub fn closed_form_prevalence(alpha: f64, z0: i8, z1: u8, z2: Option<u8>) -> Result<f64> {
    check_alpha(alpha)?;
    let coded = |name, v: u8| {
        if v <= 1 {
            Ok(v)
        } else {
            Err(Error::ParameterOutOfRange {
                name,
                value: f64::from(v),
                reason: "binary covariate must be 0 or 1",
            })
        }
    };
    let z1 = coded("z1", z1)?;
    let (exponent, factor) = match z2 {
        None => (z1, (1.0 + alpha).powi(2)),
        Some(z2) => (z1 + coded("z2", z2)?, 1.0 + alpha),
    };
    let scale = f64::from(1u32 << exponent);
    match z0 {
        -1 => Ok(0.1 - 0.01 * factor * scale),
        0 => Ok(0.1),
        1 => Ok(0.1 + 0.08 * factor * scale),
        _ => Err(Error::ParameterOutOfRange {
            name: "z0",
            value: f64::from(z0),
            reason: "must be -1, 0 or 1",
        }),
    }
}
