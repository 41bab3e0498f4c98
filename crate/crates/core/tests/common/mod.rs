//! Random table generators shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use riskeval::{Group, GroupKey, GroupedModelTable, JointCell, JointModelTable};

pub fn masses(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|m| m / total).collect()
}

/// A grouped table with 1..=12 groups of distinct risks. Prevalences are drawn
/// independently of the risks, so the table is usually miscalibrated.
pub fn grouped(rng: &mut impl Rng) -> GroupedModelTable {
    let n = rng.gen_range(1..=12);
    let m = masses(rng, n);
    GroupedModelTable::new((0..n).map(|i| {
        Group::new(
            GroupKey::new(format!("g{i}")),
            rng.gen_range(0.001..0.999),
            m[i],
            rng.gen_range(0.001..0.999),
        )
    }))
    .expect("valid random table")
}

/// Like [`grouped`] but with risks on a coarse grid, so ties between
/// distinct groups are impossible yet neighbouring risks are close.
pub fn grouped_on_grid(rng: &mut impl Rng) -> GroupedModelTable {
    let n = rng.gen_range(2..=12);
    let mut grid: Vec<u32> = (1..100).collect();
    grid.shuffle(rng);
    let m = masses(rng, n);
    GroupedModelTable::new((0..n).map(|i| {
        Group::new(
            GroupKey::new(format!("g{i}")),
            f64::from(grid[i]) / 100.0,
            m[i],
            rng.gen_range(0.001..0.999),
        )
    }))
    .expect("valid random table")
}

/// A joint table over up to 5 x 5 groups, each model's risk fixed per group.
pub fn joint(rng: &mut impl Rng) -> JointModelTable {
    let k1 = rng.gen_range(1..=5);
    let k2 = rng.gen_range(1..=5);
    let r1: Vec<f64> = (0..k1).map(|_| rng.gen_range(0.001..0.999)).collect();
    let r2: Vec<f64> = (0..k2).map(|_| rng.gen_range(0.001..0.999)).collect();
    let mut pairs: Vec<(usize, usize)> =
        (0..k1).flat_map(|a| (0..k2).map(move |b| (a, b))).collect();
    pairs.shuffle(rng);
    pairs.truncate(rng.gen_range(1..=pairs.len()));
    let m = masses(rng, pairs.len());
    JointModelTable::new(pairs.iter().zip(&m).map(|(&(a, b), &mass)| JointCell {
        key1: GroupKey::new(format!("a{a}")),
        key2: GroupKey::new(format!("b{b}")),
        risk1: r1[a],
        risk2: r2[b],
        mass,
        prevalence: rng.gen_range(0.001..0.999),
    }))
    .expect("valid random joint table")
}

/// Probability that a random case has a higher assigned risk than a random
/// non-case, counting ties as one half, by direct double summation.
pub fn pair_count_concordance(t: &GroupedModelTable) -> f64 {
    let pi = t.population_mean();
    let g = t.groups();
    let mut total = 0.0;
    for a in g {
        for b in g {
            let h1 = a.mass * a.prevalence / pi;
            let h0 = b.mass * (1.0 - b.prevalence) / (1.0 - pi);
            let w = if a.risk > b.risk {
                1.0
            } else if a.risk == b.risk {
                0.5
            } else {
                0.0
            };
            total += h1 * h0 * w;
        }
    }
    total
}
