//! Evaluation and comparison of probabilistic risk models for binary
//! outcomes: calibration, precision, discrimination, and the gains from
//! cross-classifying two models.

pub mod cli;
pub mod comparison;
pub mod distribution;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod population;
pub mod report;
pub mod table;

pub use comparison::{compare, ComparisonReport, SubgroupGainReport};
pub use distribution::{RiskDistribution, RiskPoint};
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use population::{CovariateSet, SyntheticPopulation};
pub use table::{Group, GroupKey, GroupedModelTable, JointCell, JointModelTable};
