//! Command-line front end.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::comparison::{self, ComparisonReport, SubgroupGainReport};
use crate::error::{Error, Result};
use crate::ingest::{self, BinScheme};
use crate::metrics::{self, MetricsReport};
use crate::population::{CovariateSet, SyntheticPopulation};
use crate::report::{opt_prob, prob, real, Cell, Format, Report, Table};
use crate::table::{GroupedModelTable, JointModelTable};

#[derive(Debug, Parser)]
#[command(
    name = "riskeval",
    version,
    about = "Evaluate and compare risk models for binary outcomes"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate models on the synthetic four-covariate populations.
    Synth(SynthArgs),
    /// Evaluate one model from a grouped, joint or individual-level file.
    Eval(EvalArgs),
    /// Compare two models through their cross-classification.
    Compare(CompareArgs),
    /// Convert annual incidence and mortality rates to an absolute risk.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Directory for output files; without it the report goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add `<column>_pct` columns rounded to 0.1 percentage points.
    #[arg(long)]
    pub percent: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Population parameters; the first is the calibration source for the
    /// transfer tables.
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.8])]
    pub alpha: Vec<f64>,
    /// Covariate subsets, e.g. z0z1,z0z1z2. Consecutive pairs are compared.
    #[arg(long, value_delimiter = ',', default_value = "z0z1,z0z1z2", value_parser = parse_covariates)]
    pub models: Vec<CovariateSet>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub input: PathBuf,
    /// Binning for individual-level input: unique, deciles or quantiles:K.
    #[arg(long, default_value = "unique", value_parser = parse_bins)]
    pub bins: BinScheme,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// A joint, cross-decile or two-risk individuals file; or two grouped
    /// files followed by a joint file.
    #[arg(required = true, num_args = 1..=3)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "unique", value_parser = parse_bins)]
    pub bins: BinScheme,
    /// Annual all-cause mortality for cross-decile input.
    #[arg(long)]
    pub mortality: Option<f64>,
    /// Risk horizon in years for cross-decile input.
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct ConvertArgs {
    /// Annual incidence rate of the outcome.
    pub incidence: f64,
    /// Annual competing mortality rate.
    pub mortality: f64,
    /// Horizon in years.
    pub horizon: f64,
}

fn parse_covariates(s: &str) -> std::result::Result<CovariateSet, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_bins(s: &str) -> std::result::Result<BinScheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Runs a parsed command, writing to `stdout` / `stderr`.
pub fn run(config: RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match config.command {
        Command::Synth(args) => {
            let report = synth(&args.alpha, &args.models, stderr)?;
            emit(&report, &args.output, stdout)
        }
        Command::Eval(args) => {
            let report = eval(&args.input, args.bins, stderr)?;
            emit(&report, &args.output, stdout)
        }
        Command::Compare(args) => {
            let report = compare(&args, stderr)?;
            emit(&report, &args.output, stdout)
        }
        Command::Convert(args) => {
            let risk = ingest::absolute_risk(args.incidence, args.mortality, args.horizon)?;
            writeln!(stdout, "risk {}", crate::report::format_number(risk))?;
            writeln!(stdout, "percent {}%", crate::report::format_percent(risk))?;
            Ok(())
        }
    }
}

fn emit(report: &Report, output: &OutputArgs, stdout: &mut dyn Write) -> Result<()> {
    for t in &report.tables {
        for cell in t.rows.iter().flatten() {
            if let Cell::Real(x) | Cell::Prob(x) = cell {
                if !x.is_finite() {
                    return Err(Error::Internal(format!(
                        "non-finite value {x} in table {}",
                        t.name
                    )));
                }
            }
        }
    }
    match &output.out {
        Some(dir) => {
            for path in report.write_to(dir, output.format, output.percent)? {
                writeln!(stdout, "wrote {}", path.display())?;
            }
        }
        None => stdout.write_all(report.render(output.format, output.percent)?.as_bytes())?,
    }
    Ok(())
}

const METRIC_COLUMNS: [&str; 10] = [
    "groups",
    "mean",
    "bias_sq",
    "bias",
    "precision_loss",
    "brier",
    "prevalence_variance",
    "ro_correlation",
    "integrated_discrimination",
    "concordance",
];

/// Identities every evaluated table satisfies; a failure is a bug, not bad
/// input.
pub(crate) fn verify_metrics(m: &MetricsReport) -> Result<()> {
    let values = [
        m.mean,
        m.bias_sq,
        m.precision_loss,
        m.brier,
        m.prevalence_variance,
    ];
    let optional = [m.ro_correlation, m.integrated_discrimination, m.concordance];
    if values
        .iter()
        .chain(optional.iter().flatten())
        .any(|x| !x.is_finite())
    {
        return Err(Error::Internal(format!("non-finite metric in {m:?}")));
    }
    let tol = 1e-9;
    if (m.brier - m.bias_sq - m.precision_loss).abs() > tol {
        return Err(Error::Internal(format!(
            "Brier score {} differs from bias^2 + precision loss {}",
            m.brier,
            m.bias_sq + m.precision_loss
        )));
    }
    let unit = -tol..=1.0 + tol;
    if optional.iter().flatten().any(|x| !unit.contains(x)) {
        return Err(Error::Internal(format!(
            "discrimination measure outside [0, 1] in {m:?}"
        )));
    }
    Ok(())
}

fn metric_cells(t: &GroupedModelTable) -> Result<Vec<Cell>> {
    let m = MetricsReport::evaluate(t);
    verify_metrics(&m)?;
    Ok(vec![
        m.groups.into(),
        prob(m.mean),
        real(m.bias_sq),
        prob(m.bias()),
        prob(m.precision_loss),
        prob(m.brier),
        prob(m.prevalence_variance),
        opt_prob(m.ro_correlation),
        opt_prob(m.integrated_discrimination),
        opt_prob(m.concordance),
    ])
}

fn columns<'a>(prefix: &[&'a str], rest: &[&'a str]) -> Vec<&'a str> {
    prefix.iter().chain(rest).copied().collect()
}

const COMPARISON_COLUMNS: [&str; 7] = [
    "brier_difference",
    "bias_sq_difference",
    "precision_difference",
    "idi",
    "ro_correlation_difference",
    "concordance_difference",
    "subgroup_total_gain",
];

fn comparison_cells(c: &ComparisonReport, gain: &SubgroupGainReport) -> Vec<Cell> {
    vec![
        prob(c.brier_difference),
        prob(c.bias_sq_difference),
        prob(c.precision_difference),
        prob(c.idi),
        prob(c.ro_correlation_difference),
        prob(c.concordance_difference),
        prob(gain.total_gain),
    ]
}

const GAIN_COLUMNS: [&str; 9] = [
    "group",
    "risk1",
    "mass",
    "prevalence",
    "cells",
    "prevalence_min",
    "prevalence_max",
    "within_variance",
    "within_sd",
];

fn gain_rows(gain: &SubgroupGainReport) -> impl Iterator<Item = Vec<Cell>> + '_ {
    gain.rows.iter().map(|r| {
        vec![
            r.key1.to_string().into(),
            prob(r.risk1),
            prob(r.mass),
            prob(r.prevalence),
            r.cells.into(),
            prob(r.prevalence_min),
            prob(r.prevalence_max),
            real(r.within_variance),
            prob(r.within_sd),
        ]
    })
}

const BIAS_COLUMNS: [&str; 8] = [
    "group1",
    "group2",
    "mass",
    "prevalence",
    "risk1",
    "risk2",
    "bias1",
    "bias2",
];

fn bias_cells(b: &comparison::CellBias) -> Vec<Cell> {
    vec![
        b.key1.to_string().into(),
        b.key2.to_string().into(),
        prob(b.mass),
        prob(b.prevalence),
        prob(b.risk1),
        prob(b.risk2),
        prob(b.bias1),
        prob(b.bias2),
    ]
}

const ATTRIBUTE_COLUMNS: [&str; 5] = ["risk", "prevalence", "mass", "bias", "group"];

fn attribute_rows(t: &GroupedModelTable) -> impl Iterator<Item = Vec<Cell>> + '_ {
    metrics::attributes_diagram(t)
        .into_iter()
        .zip(t.groups())
        .map(|(p, g)| {
            vec![
                prob(p.risk),
                prob(p.prevalence),
                prob(p.mass),
                prob(p.bias()),
                g.key.to_string().into(),
            ]
        })
}

fn alpha_cell(alpha: f64) -> Cell {
    Cell::Text(crate::report::format_number(alpha))
}

/// Risk distributions, metrics matrix, model comparisons, subgroup gains and
/// calibration-transfer data for the synthetic family.
pub fn synth(alphas: &[f64], models: &[CovariateSet], stderr: &mut dyn Write) -> Result<Report> {
    if alphas.is_empty() || models.is_empty() {
        return Err(Error::Parse("need at least one alpha and one model".into()));
    }
    let populations = alphas
        .iter()
        .map(|&a| SyntheticPopulation::new(a))
        .collect::<Result<Vec<_>>>()?;
    let mut evaluated: Vec<CovariateSet> = models.to_vec();
    if !evaluated.contains(&CovariateSet::all()) {
        evaluated.push(CovariateSet::all());
    }

    let mut dists = Table::new(
        "risk_distributions",
        &["alpha", "model", "group", "risk", "mass", "prevalence"],
    );
    let mut matrix = Table::new(
        "metrics",
        &columns(&["alpha", "model", "sigma2"], &METRIC_COLUMNS),
    );
    let mut comparisons = Table::new(
        "comparison",
        &columns(&["alpha", "model1", "model2"], &COMPARISON_COLUMNS),
    );
    let mut gains = Table::new(
        "subgroup_gain",
        &columns(&["alpha", "model1", "model2"], &GAIN_COLUMNS),
    );

    for pop in &populations {
        let a = pop.alpha();
        let truth = pop.risk_distribution();
        let sigma2 = truth.variance();
        for p in truth.points() {
            dists.push(vec![
                alpha_cell(a),
                "true".into(),
                "".into(),
                prob(p.risk),
                prob(p.mass),
                prob(p.risk),
            ]);
        }
        for &set in &evaluated {
            let t = pop.project_model(set);
            for g in t.groups() {
                dists.push(vec![
                    alpha_cell(a),
                    set.to_string().into(),
                    g.key.to_string().into(),
                    prob(g.risk),
                    prob(g.mass),
                    prob(g.prevalence),
                ]);
            }
            let mut row = vec![alpha_cell(a), set.to_string().into(), real(sigma2)];
            row.extend(metric_cells(&t)?);
            matrix.push(row);
        }
        for pair in models.windows(2) {
            let (s1, s2) = (pair[0], pair[1]);
            let report = comparison::compare(&pop.project_model(s1), &pop.project_model(s2))?;
            let gain = comparison::subgroup_precision_gain(&pop.cross_classify(s1, s2));
            let head = || vec![alpha_cell(a), s1.to_string().into(), s2.to_string().into()];
            let mut row = head();
            row.extend(comparison_cells(&report, &gain));
            comparisons.push(row);
            for g in gain_rows(&gain) {
                let mut row = head();
                row.extend(g);
                gains.push(row);
            }
        }
    }

    let mut transfer = Table::new(
        "transfer",
        &columns(&["source_alpha", "target_alpha", "model"], &METRIC_COLUMNS),
    );
    let mut attributes = Table::new(
        "attributes",
        &columns(
            &["source_alpha", "target_alpha", "model"],
            &ATTRIBUTE_COLUMNS,
        ),
    );
    let mut cross = Table::new(
        "cross_bias",
        &columns(
            &["source_alpha", "target_alpha", "model1", "model2"],
            &BIAS_COLUMNS,
        ),
    );
    let source = &populations[0];
    for target in &populations[1..] {
        let head = |m: String| {
            vec![
                alpha_cell(source.alpha()),
                alpha_cell(target.alpha()),
                m.into(),
            ]
        };
        let mut moved: BTreeMap<CovariateSet, GroupedModelTable> = BTreeMap::new();
        for &set in models {
            match comparison::transfer_calibration(&source.project_model(set), &target.project_model(set)) {
                Ok(t) => {
                    let mut row = head(set.to_string());
                    row.extend(metric_cells(&t)?);
                    transfer.push(row);
                    for p in attribute_rows(&t) {
                        let mut row = head(set.to_string());
                        row.extend(p);
                        attributes.push(row);
                    }
                    moved.insert(set, t);
                }
                Err(Error::GroupKeyMismatch(keys)) => writeln!(
                    stderr,
                    "warning: skipping transfer of {set} from alpha {} to {}: groups differ ({keys})",
                    source.alpha(),
                    target.alpha()
                )?,
                Err(e) => return Err(e),
            }
        }
        for pair in models.windows(2) {
            let (Some(t1), Some(t2)) = (moved.get(&pair[0]), moved.get(&pair[1])) else {
                continue;
            };
            let joint = target.cross_classify(pair[0], pair[1]);
            let biases = comparison::cross_classified_bias(
                &joint,
                &comparison::assigned_risks(t1),
                &comparison::assigned_risks(t2),
            )?;
            for b in &biases {
                let mut row = vec![
                    alpha_cell(source.alpha()),
                    alpha_cell(target.alpha()),
                    pair[0].to_string().into(),
                    pair[1].to_string().into(),
                ];
                row.extend(bias_cells(b));
                cross.push(row);
            }
        }
    }

    let mut report = Report::new("synth");
    report.add(dists);
    report.add(matrix);
    report.add(comparisons);
    report.add(gains);
    if populations.len() > 1 {
        report.add(transfer);
        report.add(attributes);
        report.add(cross);
    }
    Ok(report)
}

fn metrics_table(models: &[(&str, &GroupedModelTable)], declared: bool) -> Result<Table> {
    let mut t = Table::new(
        "metrics",
        &columns(&["model", "declared_calibrated"], &METRIC_COLUMNS),
    );
    for (name, table) in models {
        let mut row = vec![(*name).into(), declared.into()];
        row.extend(metric_cells(table)?);
        t.push(row);
    }
    Ok(t)
}

fn attributes_table(models: &[(&str, &GroupedModelTable)]) -> Table {
    let mut t = Table::new("attributes", &columns(&["model"], &ATTRIBUTE_COLUMNS));
    for (name, table) in models {
        for p in attribute_rows(table) {
            let mut row = vec![(*name).into()];
            row.extend(p);
            t.push(row);
        }
    }
    t
}

enum Input {
    Grouped(ingest::GroupedInput),
    Joint(JointModelTable),
    Individuals(Vec<ingest::IndividualRecord>),
    CrossDecile,
}

fn read_input(path: &Path) -> Result<Input> {
    let header = ingest::sniff_header(path)?;
    match header.as_str() {
        ingest::GROUPED_HEADER | ingest::GROUPED_HEADER_NO_PREVALENCE => {
            Ok(Input::Grouped(ingest::load_grouped(path)?))
        }
        ingest::JOINT_HEADER => Ok(Input::Joint(ingest::load_joint(path)?.table)),
        ingest::INDIVIDUALS_HEADER => Ok(Input::Individuals(ingest::load_individuals(path)?)),
        ingest::CROSS_DECILE_HEADER => Ok(Input::CrossDecile),
        other => Err(Error::Parse(format!(
            "{}: unrecognised header {other:?}",
            path.display()
        ))),
    }
}

/// Metrics and attributes-diagram points for the model(s) in one file.
pub fn eval(path: &Path, bins: BinScheme, stderr: &mut dyn Write) -> Result<Report> {
    let mut report = Report::new("eval");
    let (models, declared): (Vec<(&str, GroupedModelTable)>, bool) = match read_input(path)? {
        Input::Grouped(g) => {
            if g.prevalence_declared {
                writeln!(
                    stderr,
                    "warning: {} has no prevalence column; prevalences taken equal to assigned risks",
                    path.display()
                )?;
            }
            (vec![("model1", g.table)], g.prevalence_declared)
        }
        Input::Joint(j) => (
            vec![
                ("model1", j.marginal_primary()?),
                ("model2", j.marginal_secondary()?),
            ],
            false,
        ),
        Input::Individuals(records) => {
            let binned = ingest::bin_individuals(&records, bins)?;
            let mut models = vec![("model1", binned.model1)];
            if let Some(m2) = binned.model2 {
                models.push(("model2", m2));
            }
            (models, false)
        }
        Input::CrossDecile => {
            return Err(Error::Parse(
                "cross-decile tables are compared, not evaluated; use `compare`".into(),
            ))
        }
    };
    let refs: Vec<(&str, &GroupedModelTable)> = models.iter().map(|(n, t)| (*n, t)).collect();
    report.add(metrics_table(&refs, declared)?);
    report.add(attributes_table(&refs));
    Ok(report)
}

/// Comparison, subgroup-gain and per-cell bias reports for two models.
pub fn compare(args: &CompareArgs, stderr: &mut dyn Write) -> Result<Report> {
    let (joint, grouped, decile_view) = match args.inputs.as_slice() {
        [single] => match read_input(single)? {
            Input::Joint(j) => (j, None, false),
            Input::CrossDecile => {
                let mortality = args
                    .mortality
                    .ok_or_else(|| Error::Parse("cross-decile input needs --mortality".into()))?;
                let joint = ingest::load_cross_decile(single, mortality, args.horizon)?;
                (joint.rebalance_primary()?, None, true)
            }
            Input::Individuals(records) => {
                let binned = ingest::bin_individuals(&records, args.bins)?;
                let joint = binned.joint.ok_or_else(|| {
                    Error::Parse("individual records need a risk2 column for comparison".into())
                })?;
                (joint, None, false)
            }
            Input::Grouped(_) => return Err(Error::Parse(
                "a grouped table alone cannot be compared; pass two grouped files and a joint file"
                    .into(),
            )),
        },
        [first, second, joint_path] => {
            let g1 = ingest::load_grouped(first)?.table;
            let g2 = ingest::load_grouped(second)?.table;
            let joint = ingest::load_joint(joint_path)?.table;
            for g in [&g1, &g2] {
                let (a, b) = (g.population_mean(), joint.population_mean());
                if (a - b).abs() > comparison::MEAN_MATCH_TOLERANCE * a.max(b) {
                    return Err(Error::MeanMismatch(a, b));
                }
            }
            (joint, Some((g1, g2)), false)
        }
        _ => {
            return Err(Error::Parse(
                "compare takes one input, or two grouped files and a joint file".into(),
            ))
        }
    };

    let (t1, t2) = match grouped {
        Some(pair) => pair,
        None => (joint.marginal_primary()?, joint.marginal_secondary()?),
    };
    let report = comparison::compare(&t1, &t2)?;
    let gain = comparison::subgroup_precision_gain(&joint);
    let (r1, r2) = comparison::joint_assigned_risks(&joint);
    let biases = comparison::cross_classified_bias(&joint, &r1, &r2)?;
    if decile_view {
        writeln!(
            stderr,
            "note: Model-1 deciles weighted equally; cells within a decile weighted by person-years"
        )?;
    }

    let mut out = Report::new("compare");
    out.add(metrics_table(&[("model1", &t1), ("model2", &t2)], false)?);
    let mut c = Table::new("comparison", &COMPARISON_COLUMNS);
    c.push(comparison_cells(&report, &gain));
    out.add(c);
    let mut g = Table::new("subgroup_gain", &GAIN_COLUMNS);
    for row in gain_rows(&gain) {
        g.push(row);
    }
    out.add(g);
    let mut b = Table::new("cross_bias", &BIAS_COLUMNS);
    for cell in &biases {
        b.push(bias_cells(cell));
    }
    out.add(b);
    Ok(out)
}

/// Parses `args`, runs, and maps the outcome to a process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(stdout, "{e}")
            } else {
                write!(stderr, "{e}")
            };
            return code;
        }
    };
    let outcome =
        std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(config, stdout, stderr)))
            .unwrap_or_else(|_| Err(Error::Internal("unexpected panic".into())));
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
