//! Comparing two models on one population.
//!
//! The Brier score difference between two models splits into a calibration
//! part and a precision part. The precision part is refined group by group
//! through the cross-classified model: within each Model-1 risk group, the
//! spread of the joint-cell prevalences is what Model 2 adds.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport};
use crate::table::{Group, GroupKey, GroupedModelTable, JointCell, JointModelTable};

/// Relative tolerance on the agreement of two tables' population means.
pub const MEAN_MATCH_TOLERANCE: f64 = 1e-9;

/// Differences between two models.
///
/// Brier, bias and precision terms are Model 1 minus Model 2, so positive
/// values favour Model 2. The discrimination terms are Model 2 minus Model 1
/// (gains).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub model1: MetricsReport,
    pub model2: MetricsReport,
    pub brier_difference: f64,
    pub bias_sq_difference: f64,
    /// `PL1 - PL2 = var[π(r2)] - var[π(r1)]`.
    pub precision_difference: f64,
    /// `ρ2² - ρ1²`.
    pub idi: f64,
    pub ro_correlation_difference: f64,
    pub concordance_difference: f64,
}

pub fn compare(t1: &GroupedModelTable, t2: &GroupedModelTable) -> Result<ComparisonReport> {
    let (pi1, pi2) = (t1.population_mean(), t2.population_mean());
    if (pi1 - pi2).abs() > MEAN_MATCH_TOLERANCE * pi1.abs().max(pi2.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::MeanMismatch(pi1, pi2));
    }
    let m1 = MetricsReport::evaluate(t1);
    let m2 = MetricsReport::evaluate(t2);
    let idi = metrics::integrated_discrimination(t2)? - metrics::integrated_discrimination(t1)?;
    let ro = metrics::ro_correlation(t2)? - metrics::ro_correlation(t1)?;
    let conc = metrics::concordance(t2)? - metrics::concordance(t1)?;
    Ok(ComparisonReport {
        brier_difference: m1.brier - m2.brier,
        bias_sq_difference: m1.bias_sq - m2.bias_sq,
        precision_difference: m1.precision_loss - m2.precision_loss,
        idi,
        ro_correlation_difference: ro,
        concordance_difference: conc,
        model1: m1,
        model2: m2,
    })
}

/// Brier precision difference implied by the two models' prevalence
/// standard deviations: `sd2² - sd1²`.
pub fn precision_difference_from_sds(sd1: f64, sd2: f64) -> f64 {
    sd2 * sd2 - sd1 * sd1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellBias {
    pub key1: GroupKey,
    pub key2: GroupKey,
    pub mass: f64,
    pub prevalence: f64,
    pub risk1: f64,
    pub risk2: f64,
    /// `r1 - π(r1, r2)`.
    pub bias1: f64,
    /// `r2 - π(r1, r2)`.
    pub bias2: f64,
}

/// Per-cell calibration biases of both models, given the risks each model
/// assigns to its groups.
pub fn cross_classified_bias(
    joint: &JointModelTable,
    risks1: &BTreeMap<GroupKey, f64>,
    risks2: &BTreeMap<GroupKey, f64>,
) -> Result<Vec<CellBias>> {
    joint
        .cells()
        .iter()
        .map(|c| {
            let r1 = *risks1
                .get(&c.key1)
                .ok_or_else(|| Error::MissingAssignment(c.key1.to_string()))?;
            let r2 = *risks2
                .get(&c.key2)
                .ok_or_else(|| Error::MissingAssignment(c.key2.to_string()))?;
            Ok(CellBias {
                key1: c.key1.clone(),
                key2: c.key2.clone(),
                mass: c.mass,
                prevalence: c.prevalence,
                risk1: r1,
                risk2: r2,
                bias1: r1 - c.prevalence,
                bias2: r2 - c.prevalence,
            })
        })
        .collect()
}

/// Assigned risks of a table keyed by group, for [`cross_classified_bias`].
pub fn assigned_risks(t: &GroupedModelTable) -> BTreeMap<GroupKey, f64> {
    t.groups().iter().map(|g| (g.key.clone(), g.risk)).collect()
}

/// The joint table's own labels as each model's assigned risks.
pub fn joint_assigned_risks(
    joint: &JointModelTable,
) -> (BTreeMap<GroupKey, f64>, BTreeMap<GroupKey, f64>) {
    let mut r1 = BTreeMap::new();
    let mut r2 = BTreeMap::new();
    for c in joint.cells() {
        r1.insert(c.key1.clone(), c.risk1);
        r2.insert(c.key2.clone(), c.risk2);
    }
    (r1, r2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupGain {
    pub key1: GroupKey,
    pub risk1: f64,
    pub mass: f64,
    /// Mass-weighted mean of the joint prevalences, i.e. `π(r1)`.
    pub prevalence: f64,
    pub cells: usize,
    pub prevalence_min: f64,
    pub prevalence_max: f64,
    pub within_variance: f64,
    pub within_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupGainReport {
    /// Sorted by Model-1 assigned risk.
    pub rows: Vec<SubgroupGain>,
    /// `Σ g1(r1) var[π(r1, r2) | r1]`.
    pub total_gain: f64,
}

impl SubgroupGainReport {
    pub fn row(&self, key1: &GroupKey) -> Option<&SubgroupGain> {
        self.rows.iter().find(|r| &r.key1 == key1)
    }
}

/// Within each Model-1 group, the spread of the cross-classified
/// prevalences: the precision that group gains from Model 2.
pub fn subgroup_precision_gain(joint: &JointModelTable) -> SubgroupGainReport {
    let mut by_group: BTreeMap<&GroupKey, Vec<&JointCell>> = BTreeMap::new();
    for c in joint.cells() {
        by_group.entry(&c.key1).or_default().push(c);
    }
    let mut rows: Vec<SubgroupGain> = by_group
        .into_iter()
        .map(|(key1, cells)| {
            let mass: f64 = cells.iter().map(|c| c.mass).sum();
            let prevalence = cells.iter().map(|c| c.mass * c.prevalence).sum::<f64>() / mass;
            let within_variance = cells
                .iter()
                .map(|c| c.mass * (c.prevalence - prevalence).powi(2))
                .sum::<f64>()
                / mass;
            let (lo, hi) = cells
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    (lo.min(c.prevalence), hi.max(c.prevalence))
                });
            SubgroupGain {
                key1: key1.clone(),
                risk1: cells[0].risk1,
                mass,
                prevalence,
                cells: cells.len(),
                prevalence_min: lo,
                prevalence_max: hi,
                within_variance,
                within_sd: within_variance.sqrt(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.risk1
            .total_cmp(&b.risk1)
            .then_with(|| a.key1.cmp(&b.key1))
    });
    let total_gain = rows.iter().map(|r| r.mass * r.within_variance).sum();
    SubgroupGainReport { rows, total_gain }
}

/// Applies the risks a model was calibrated to on `source` to the groups of
/// the same model in `target`.
pub fn transfer_calibration(
    source: &GroupedModelTable,
    target: &GroupedModelTable,
) -> Result<GroupedModelTable> {
    let source_keys: Vec<&GroupKey> = source.groups().iter().map(|g| &g.key).collect();
    let mut target_keys: Vec<&GroupKey> = target.groups().iter().map(|g| &g.key).collect();
    let mut sorted_source = source_keys.clone();
    sorted_source.sort();
    target_keys.sort();
    if sorted_source != target_keys {
        let missing: Vec<String> = sorted_source
            .iter()
            .filter(|k| !target_keys.contains(k))
            .chain(target_keys.iter().filter(|k| !sorted_source.contains(k)))
            .map(|k| k.to_string())
            .collect();
        return Err(Error::GroupKeyMismatch(missing.join(", ")));
    }
    GroupedModelTable::new(target.groups().iter().map(|g| {
        let assigned = source.group(&g.key).expect("keys checked above").prevalence;
        Group::new(g.key.clone(), assigned, g.mass, g.prevalence)
    }))
}
