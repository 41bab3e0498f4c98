mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskeval::comparison::{compare, subgroup_precision_gain};
use riskeval::metrics::{self, concordance, ro_correlation};
use riskeval::population::{CovariateSet, SyntheticPopulation};
use riskeval::MetricsReport;

const TOL: f64 = 1e-12;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn brier_splits_into_bias_and_precision(seed: u64) {
        let t = common::grouped(&mut rng(seed));
        let m = MetricsReport::evaluate(&t);
        prop_assert!((m.brier - m.bias_sq - m.precision_loss).abs() < TOL);
        let pi = m.mean;
        prop_assert!((m.precision_loss + m.prevalence_variance - pi * (1.0 - pi)).abs() < TOL);
        prop_assert!(m.prevalence_variance >= 0.0);
        prop_assert!(m.prevalence_variance <= pi * (1.0 - pi) + TOL);
    }

    #[test]
    fn concordance_matches_pair_counting(seed: u64) {
        let t = common::grouped_on_grid(&mut rng(seed));
        let zeta = concordance(&t).unwrap();
        prop_assert!((zeta - common::pair_count_concordance(&t)).abs() < TOL);
        prop_assert!((0.0..=1.0).contains(&zeta));
    }

    #[test]
    fn increasing_relabel_keeps_discrimination(seed: u64, k in 1.0f64..5.0) {
        let t = common::grouped(&mut rng(seed));
        // slope at least 1/2, so distinct labels stay beyond the merge tolerance
        let r = t.relabel(|g| (g.risk + g.risk.powf(k)) / 2.0).unwrap();
        prop_assert!((concordance(&t).unwrap() - concordance(&r).unwrap()).abs() < TOL);
        prop_assert!((ro_correlation(&t).unwrap() - ro_correlation(&r).unwrap()).abs() < TOL);
        prop_assert!((metrics::precision_loss(&t) - metrics::precision_loss(&r)).abs() < TOL);
    }

    #[test]
    fn recalibration_removes_bias_only(seed: u64) {
        let t = common::grouped(&mut rng(seed));
        let c = t.recalibrated().unwrap();
        prop_assert!(metrics::calibration_bias_sq(&c) < TOL);
        prop_assert!((metrics::precision_loss(&t) - metrics::precision_loss(&c)).abs() < TOL);
        for p in metrics::attributes_diagram(&c) {
            prop_assert!(p.bias().abs() < TOL);
        }
    }

    #[test]
    fn two_model_identities(seed: u64) {
        let joint = common::joint(&mut rng(seed));
        let t1 = joint.marginal_primary().unwrap();
        let t2 = joint.marginal_secondary().unwrap();
        let r = compare(&t1, &t2).unwrap();
        let pi = t1.population_mean();
        prop_assert!((r.brier_difference - r.bias_sq_difference - r.precision_difference).abs() < TOL);
        prop_assert!((r.precision_difference - pi * (1.0 - pi) * r.idi).abs() < TOL);
        let rho1 = r.model1.ro_correlation.unwrap();
        let rho2 = r.model2.ro_correlation.unwrap();
        prop_assert!((r.idi - (rho2 * rho2 - rho1 * rho1)).abs() < TOL);
    }

    #[test]
    fn cross_classification_gains_are_within_group_variances(seed: u64) {
        let joint = common::joint(&mut rng(seed));
        let gain = subgroup_precision_gain(&joint);
        let e = joint.cross_classified_model().unwrap();
        let pl1 = metrics::precision_loss(&joint.marginal_primary().unwrap());
        let pl2 = metrics::precision_loss(&joint.marginal_secondary().unwrap());
        let ple = metrics::precision_loss(&e);
        prop_assert!((gain.total_gain - (pl1 - ple)).abs() < TOL);
        prop_assert!(ple <= pl1 + TOL && ple <= pl2 + TOL);
        let mass: f64 = gain.rows.iter().map(|r| r.mass).sum();
        prop_assert!((mass - 1.0).abs() < 1e-12);
        for row in &gain.rows {
            prop_assert!(row.prevalence_min <= row.prevalence + TOL);
            prop_assert!(row.prevalence <= row.prevalence_max + TOL);
            prop_assert!(row.within_sd <= (row.prevalence_max - row.prevalence_min) / 2.0 + TOL);
        }
    }

    #[test]
    fn nested_covariates_never_lose_precision(alpha in 0.0f64..=1.0) {
        let p = SyntheticPopulation::new(alpha).unwrap();
        let sigma2 = p.risk_distribution().variance();
        let sets: Vec<CovariateSet> = CovariateSet::every().collect();
        for &s in &sets {
            let vs = metrics::prevalence_variance(&p.project_model(s));
            prop_assert!(vs <= sigma2 + TOL);
            for &t in sets.iter().filter(|t| s.is_subset(**t)) {
                prop_assert!(vs <= metrics::prevalence_variance(&p.project_model(t)) + TOL);
            }
        }
    }

    #[test]
    fn cross_classifying_with_perfect_model_recovers_truth(alpha in 0.0f64..=1.0) {
        let p = SyntheticPopulation::new(alpha).unwrap();
        let s = "z0z1".parse::<CovariateSet>().unwrap();
        let joint = p.cross_classify(s, CovariateSet::all());
        let gain = subgroup_precision_gain(&joint);
        let v1 = metrics::prevalence_variance(&p.project_model(s));
        // law of total variance
        prop_assert!((v1 + gain.total_gain - p.risk_distribution().variance()).abs() < TOL);
    }
}

#[test]
fn covariance_form_of_rho() {
    // rho is the outcome / prevalence correlation: cov(Y, pi(r)) = var pi(r)
    let mut rng = rng(7);
    for _ in 0..200 {
        let t = common::grouped(&mut rng);
        let pi = t.population_mean();
        let cov: f64 = t
            .groups()
            .iter()
            .map(|g| g.mass * g.prevalence * (g.prevalence - pi))
            .sum();
        let var_pi = metrics::prevalence_variance(&t);
        if var_pi == 0.0 {
            assert_eq!(ro_correlation(&t).unwrap(), 0.0);
            continue;
        }
        let rho = cov / (var_pi.sqrt() * (pi * (1.0 - pi)).sqrt());
        assert!((rho - ro_correlation(&t).unwrap()).abs() < 1e-10);
    }
}
