//! Risk models applied to a population.
//!
//! A [`GroupedModelTable`] records, for each distinct assigned risk `r`, the
//! fraction `g(r)` of the population receiving it and the outcome prevalence
//! `π(r)` among them. A [`JointModelTable`] does the same for the cells of
//! two cross-classified models.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::distribution::{MASS_SUM_TOLERANCE, MERGE_TOLERANCE, RENORMALIZE_THRESHOLD};
use crate::error::{check_finite, check_probability, Error, Result};

/// Opaque label identifying a model's risk group.
///
/// Matching between tables is by key, never by risk value: distinct groups of
/// one model can share a risk under another.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct GroupKey(String);

impl GroupKey {
    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Key of a group formed by pooling `keys`.
    pub fn merged<'a>(keys: impl IntoIterator<Item = &'a GroupKey>) -> Self {
        let mut parts: Vec<&str> = keys.into_iter().flat_map(|k| k.0.split('|')).collect();
        parts.sort_unstable();
        parts.dedup();
        Self(parts.join("|"))
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Group {
    pub key: GroupKey,
    /// Assigned risk `r`.
    pub risk: f64,
    /// Population fraction `g(r)`.
    pub mass: f64,
    /// Outcome prevalence `π(r)`.
    pub prevalence: f64,
}

impl Group {
    pub fn new(key: GroupKey, risk: f64, mass: f64, prevalence: f64) -> Self {
        Self {
            key,
            risk,
            mass,
            prevalence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupedModelTable {
    population_mean: f64,
    groups: Vec<Group>,
}

fn validate_masses<'a>(masses: impl Iterator<Item = &'a mut f64>) -> Result<()> {
    let masses: Vec<&mut f64> = masses.collect();
    let total: f64 = masses.iter().map(|m| **m).sum();
    if (total - 1.0).abs() > MASS_SUM_TOLERANCE {
        return Err(Error::MassSumOutOfTolerance {
            sum: total,
            tolerance: MASS_SUM_TOLERANCE,
        });
    }
    if (total - 1.0).abs() > RENORMALIZE_THRESHOLD {
        for m in masses {
            *m /= total;
        }
    }
    Ok(())
}

fn check_mass(mass: f64) -> Result<()> {
    check_finite("mass", mass)?;
    if mass < 0.0 {
        return Err(Error::NegativeMass(mass));
    }
    Ok(())
}

impl GroupedModelTable {
    /// Validates and normalises a list of groups.
    ///
    /// Zero-mass groups are dropped. Groups whose assigned risks agree within
    /// [`MERGE_TOLERANCE`] are one group of the model and are pooled, with the
    /// prevalence averaged by mass. Groups are returned sorted by risk.
    pub fn new(groups: impl IntoIterator<Item = Group>) -> Result<Self> {
        let mut raw = Vec::new();
        for g in groups {
            check_probability("risk", g.risk)?;
            check_probability("prevalence", g.prevalence)?;
            check_mass(g.mass)?;
            if g.mass > 0.0 {
                raw.push(g);
            }
        }
        if raw.is_empty() {
            return Err(Error::EmptyInput);
        }
        validate_masses(raw.iter_mut().map(|g| &mut g.mass))?;

        raw.sort_by(|a, b| a.risk.total_cmp(&b.risk).then_with(|| a.key.cmp(&b.key)));
        let mut runs: Vec<Vec<Group>> = Vec::new();
        for g in raw {
            match runs.last_mut() {
                Some(run) if (g.risk - run[0].risk).abs() <= MERGE_TOLERANCE => run.push(g),
                _ => runs.push(vec![g]),
            }
        }
        let groups: Vec<Group> = runs.into_iter().map(pool).collect();
        let population_mean = groups.iter().map(|g| g.mass * g.prevalence).sum();
        Ok(Self {
            population_mean,
            groups,
        })
    }

    /// A table where every assigned risk equals its prevalence.
    pub fn calibrated(groups: impl IntoIterator<Item = (GroupKey, f64, f64)>) -> Result<Self> {
        Self::new(
            groups
                .into_iter()
                .map(|(key, mass, prevalence)| Group::new(key, prevalence, mass, prevalence)),
        )
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn population_mean(&self) -> f64 {
        self.population_mean
    }

    pub fn group(&self, key: &GroupKey) -> Option<&Group> {
        self.groups.iter().find(|g| &g.key == key)
    }

    /// Same groups, masses and prevalences with new assigned-risk labels.
    pub fn relabel(&self, mut label: impl FnMut(&Group) -> f64) -> Result<Self> {
        Self::new(self.groups.iter().map(|g| Group {
            risk: label(g),
            ..g.clone()
        }))
    }

    /// The well-calibrated version of this model: `r := π(r)`.
    pub fn recalibrated(&self) -> Result<Self> {
        self.relabel(|g| g.prevalence)
    }
}

fn pool(run: Vec<Group>) -> Group {
    if run.len() == 1 {
        return run.into_iter().next().expect("nonempty run");
    }
    let mass: f64 = run.iter().map(|g| g.mass).sum();
    let risk = run.iter().map(|g| g.mass * g.risk).sum::<f64>() / mass;
    let prevalence = run.iter().map(|g| g.mass * g.prevalence).sum::<f64>() / mass;
    Group {
        key: GroupKey::merged(run.iter().map(|g| &g.key)),
        risk,
        mass,
        prevalence,
    }
}

/// One cell of a cross-classification of two models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointCell {
    pub key1: GroupKey,
    pub key2: GroupKey,
    /// Risk assigned by Model 1 to everyone in `key1`.
    pub risk1: f64,
    /// Risk assigned by Model 2 to everyone in `key2`.
    pub risk2: f64,
    pub mass: f64,
    /// Outcome prevalence `π(r1, r2)` in the cell.
    pub prevalence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointModelTable {
    population_mean: f64,
    cells: Vec<JointCell>,
}

impl JointModelTable {
    /// Validates the cells; duplicate `(key1, key2)` pairs are pooled by
    /// mass-weighted prevalence. Each model's assigned risk must be constant
    /// across the cells of one of its groups.
    pub fn new(cells: impl IntoIterator<Item = JointCell>) -> Result<Self> {
        let mut by_key: BTreeMap<(GroupKey, GroupKey), JointCell> = BTreeMap::new();
        for c in cells {
            check_probability("risk1", c.risk1)?;
            check_probability("risk2", c.risk2)?;
            check_probability("prevalence", c.prevalence)?;
            check_mass(c.mass)?;
            if c.mass == 0.0 {
                continue;
            }
            match by_key.entry((c.key1.clone(), c.key2.clone())) {
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert(c);
                }
                std::collections::btree_map::Entry::Occupied(mut o) => {
                    let cur = o.get_mut();
                    if (cur.risk1 - c.risk1).abs() > MERGE_TOLERANCE
                        || (cur.risk2 - c.risk2).abs() > MERGE_TOLERANCE
                    {
                        return Err(Error::InvariantViolation(format!(
                            "cell ({}, {}) listed with different assigned risks",
                            c.key1, c.key2
                        )));
                    }
                    let mass = cur.mass + c.mass;
                    cur.prevalence = (cur.mass * cur.prevalence + c.mass * c.prevalence) / mass;
                    cur.mass = mass;
                }
            }
        }
        let mut cells: Vec<JointCell> = by_key.into_values().collect();
        if cells.is_empty() {
            return Err(Error::EmptyInput);
        }
        validate_masses(cells.iter_mut().map(|c| &mut c.mass))?;
        check_constant_risk(&cells, |c| &c.key1, |c| c.risk1)?;
        check_constant_risk(&cells, |c| &c.key2, |c| c.risk2)?;
        cells.sort_by(|a, b| {
            a.risk1
                .total_cmp(&b.risk1)
                .then_with(|| a.key1.cmp(&b.key1))
                .then_with(|| a.risk2.total_cmp(&b.risk2))
                .then_with(|| a.key2.cmp(&b.key2))
        });
        let population_mean = cells.iter().map(|c| c.mass * c.prevalence).sum();
        Ok(Self {
            population_mean,
            cells,
        })
    }

    pub fn cells(&self) -> &[JointCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn population_mean(&self) -> f64 {
        self.population_mean
    }

    /// Model 1 as seen through the joint table.
    pub fn marginal_primary(&self) -> Result<GroupedModelTable> {
        marginal(&self.cells, |c| (&c.key1, c.risk1))
    }

    /// Model 2 as seen through the joint table.
    pub fn marginal_secondary(&self) -> Result<GroupedModelTable> {
        marginal(&self.cells, |c| (&c.key2, c.risk2))
    }

    /// The cross-classified model: every cell is its own group, assigned its
    /// outcome prevalence.
    pub fn cross_classified_model(&self) -> Result<GroupedModelTable> {
        GroupedModelTable::calibrated(self.cells.iter().map(|c| {
            (
                GroupKey::new(format!("{}&{}", c.key1, c.key2)),
                c.mass,
                c.prevalence,
            )
        }))
    }

    /// Reweights so that every Model-1 group carries equal mass, keeping the
    /// within-group proportions. Used for decile-level reporting.
    pub fn rebalance_primary(&self) -> Result<Self> {
        let mut totals: BTreeMap<&GroupKey, f64> = BTreeMap::new();
        for c in &self.cells {
            *totals.entry(&c.key1).or_default() += c.mass;
        }
        let share = 1.0 / totals.len() as f64;
        let cells: Vec<JointCell> = self
            .cells
            .iter()
            .map(|c| JointCell {
                mass: share * c.mass / totals[&c.key1],
                ..c.clone()
            })
            .collect();
        Self::new(cells)
    }

    /// Cells belonging to Model-1 group `key1`.
    pub fn cells_in_primary<'a>(
        &'a self,
        key1: &'a GroupKey,
    ) -> impl Iterator<Item = &'a JointCell> {
        self.cells.iter().filter(move |c| &c.key1 == key1)
    }
}

fn check_constant_risk(
    cells: &[JointCell],
    key: impl Fn(&JointCell) -> &GroupKey,
    risk: impl Fn(&JointCell) -> f64,
) -> Result<()> {
    let mut seen: BTreeMap<&GroupKey, f64> = BTreeMap::new();
    for c in cells {
        let r = risk(c);
        if let Some(prev) = seen.insert(key(c), r) {
            if (prev - r).abs() > MERGE_TOLERANCE {
                return Err(Error::InvariantViolation(format!(
                    "group {} has assigned risks {prev} and {r}",
                    key(c)
                )));
            }
        }
    }
    Ok(())
}

fn marginal<'a>(
    cells: &'a [JointCell],
    pick: impl Fn(&'a JointCell) -> (&'a GroupKey, f64),
) -> Result<GroupedModelTable> {
    let mut acc: BTreeMap<&GroupKey, (f64, f64, f64)> = BTreeMap::new();
    for c in cells {
        let (key, risk) = pick(c);
        let e = acc.entry(key).or_insert((risk, 0.0, 0.0));
        e.1 += c.mass;
        e.2 += c.mass * c.prevalence;
    }
    GroupedModelTable::new(
        acc.into_iter()
            .map(|(k, (risk, mass, weighted))| Group::new(k.clone(), risk, mass, weighted / mass)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(s: &str) -> GroupKey {
        GroupKey::new(s)
    }

    #[test]
    fn equal_labels_pool_by_mass() {
        let t = GroupedModelTable::new([
            Group::new(key("a"), 0.2, 0.25, 0.1),
            Group::new(key("b"), 0.2, 0.25, 0.3),
            Group::new(key("c"), 0.5, 0.5, 0.5),
        ])
        .unwrap();
        assert_eq!(t.len(), 2);
        let g = &t.groups()[0];
        assert_eq!(g.key.as_str(), "a|b");
        assert!((g.mass - 0.5).abs() < 1e-15);
        assert!((g.prevalence - 0.2).abs() < 1e-15);
        assert!((t.population_mean() - 0.35).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            GroupedModelTable::new([Group::new(key("a"), 0.2, 0.98, 0.1)]),
            Err(Error::MassSumOutOfTolerance { .. })
        ));
        assert!(matches!(
            GroupedModelTable::new([Group::new(key("a"), 0.2, 1.0, 1.1)]),
            Err(Error::RiskOutOfRange { .. })
        ));
        assert!(matches!(
            GroupedModelTable::new(Vec::new()),
            Err(Error::EmptyInput)
        ));
    }

    fn cell(k1: &str, k2: &str, r1: f64, r2: f64, mass: f64, prevalence: f64) -> JointCell {
        JointCell {
            key1: key(k1),
            key2: key(k2),
            risk1: r1,
            risk2: r2,
            mass,
            prevalence,
        }
    }

    #[test]
    fn joint_marginals_and_duplicates() {
        let j = JointModelTable::new([
            cell("a", "x", 0.1, 0.05, 0.3, 0.05),
            cell("a", "y", 0.1, 0.2, 0.2, 0.175),
            cell("a", "y", 0.1, 0.2, 0.1, 0.25),
            cell("b", "y", 0.4, 0.2, 0.4, 0.4),
        ])
        .unwrap();
        assert_eq!(j.len(), 3);
        let y = j
            .cells()
            .iter()
            .find(|c| c.key1.as_str() == "a" && c.key2.as_str() == "y")
            .unwrap();
        assert!((y.mass - 0.3).abs() < 1e-15);
        assert!((y.prevalence - 0.2).abs() < 1e-15);

        let m1 = j.marginal_primary().unwrap();
        assert_eq!(m1.len(), 2);
        assert!((m1.groups()[0].prevalence - 0.125).abs() < 1e-15);
        assert!((m1.groups()[0].mass - 0.6).abs() < 1e-15);
        let m2 = j.marginal_secondary().unwrap();
        assert_eq!(m2.len(), 2);
        assert!((m1.population_mean() - j.population_mean()).abs() < 1e-15);
        assert!((m2.population_mean() - j.population_mean()).abs() < 1e-15);
    }

    #[test]
    fn joint_rejects_inconsistent_risk() {
        let err = JointModelTable::new([
            cell("a", "x", 0.1, 0.05, 0.5, 0.05),
            cell("a", "y", 0.2, 0.2, 0.5, 0.2),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::InvariantViolation(_)));
    }

    #[test]
    fn rebalance_gives_equal_primary_mass() {
        let j = JointModelTable::new([
            cell("a", "x", 0.1, 0.05, 0.6, 0.05),
            cell("a", "y", 0.1, 0.2, 0.2, 0.2),
            cell("b", "y", 0.4, 0.2, 0.2, 0.4),
        ])
        .unwrap()
        .rebalance_primary()
        .unwrap();
        let m1 = j.marginal_primary().unwrap();
        for g in m1.groups() {
            assert!((g.mass - 0.5).abs() < 1e-15);
        }
        let ax = &j.cells()[0];
        assert!((ax.mass - 0.375).abs() < 1e-15);
    }
}
