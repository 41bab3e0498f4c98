//! Loading models and data from CSV files.
//!
//! Dialect: comma separated, `.` as decimal point, UTF-8, a header row whose
//! column names must match exactly. Formats:
//!
//! | file               | header                                  |
//! |--------------------|-----------------------------------------|
//! | grouped table      | `risk,mass,prevalence` (or `risk,mass`) |
//! | joint table        | `r1,r2,mass,prevalence`                 |
//! | individual records | `risk1,risk2,outcome`                   |
//! | cross-decile table | `decile1,decile2,person_years,cases`    |

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{check_finite, check_probability, Error, Result};
use crate::table::{Group, GroupKey, GroupedModelTable, JointCell, JointModelTable};

pub const GROUPED_HEADER: &str = "risk,mass,prevalence";
pub const GROUPED_HEADER_NO_PREVALENCE: &str = "risk,mass";
pub const JOINT_HEADER: &str = "r1,r2,mass,prevalence";
pub const INDIVIDUALS_HEADER: &str = "risk1,risk2,outcome";
pub const CROSS_DECILE_HEADER: &str = "decile1,decile2,person_years,cases";

/// Below this value of `(λ + μ) T` the conversion uses its Taylor series.
const SERIES_THRESHOLD: f64 = 1e-8;

/// `T`-year absolute risk of the outcome under constant annual incidence
/// `λ` and competing mortality `μ`: `λ / (λ + μ) * (1 - exp(-(λ + μ) T))`.
pub fn absolute_risk(incidence: f64, mortality: f64, horizon: f64) -> Result<f64> {
    check_finite("incidence", incidence)?;
    check_finite("mortality", mortality)?;
    check_finite("horizon", horizon)?;
    if incidence < 0.0 {
        return Err(Error::NegativeRate {
            name: "incidence",
            value: incidence,
        });
    }
    if mortality < 0.0 {
        return Err(Error::NegativeRate {
            name: "mortality",
            value: mortality,
        });
    }
    if horizon <= 0.0 {
        return Err(Error::ParameterOutOfRange {
            name: "horizon",
            value: horizon,
            reason: "must be positive",
        });
    }
    let total = incidence + mortality;
    if total == 0.0 {
        return Ok(0.0);
    }
    let x = total * horizon;
    let fraction = if x < SERIES_THRESHOLD {
        1.0 - x / 2.0 + x * x / 6.0
    } else {
        -(-x).exp_m1() / x
    };
    Ok(incidence * horizon * fraction)
}

fn open(path: &Path) -> Result<File> {
    Ok(File::open(path)?)
}

/// Header of a CSV file, for dispatching on its format.
pub fn sniff_header(path: &Path) -> Result<String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open(path)?);
    Ok(rdr
        .headers()?
        .iter()
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(","))
}

struct Rows<R: Read> {
    rdr: csv::Reader<R>,
    columns: usize,
}

impl<R: Read> Rows<R> {
    fn new(reader: R, accepted: &[&str]) -> Result<(Self, String)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let header = rdr
            .headers()?
            .iter()
            .map(str::trim)
            .collect::<Vec<_>>()
            .join(",");
        if header.is_empty() {
            return Err(Error::Parse("missing header row".into()));
        }
        if !accepted.contains(&header.as_str()) {
            return Err(Error::Parse(format!(
                "unexpected header {header:?}; expected {}",
                accepted.join(" or ")
            )));
        }
        let columns = header.split(',').count();
        Ok((Self { rdr, columns }, header))
    }

    /// Every data row, with its 1-based line number.
    fn records(&mut self) -> Result<Vec<(u64, Vec<String>)>> {
        let mut out = Vec::new();
        for rec in self.rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != self.columns {
                return Err(Error::Parse(format!(
                    "line {line}: expected {} fields",
                    self.columns
                )));
            }
            out.push((line, rec.iter().map(|s| s.trim().to_owned()).collect()));
        }
        if out.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        Ok(out)
    }
}

fn number(line: u64, field: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: {field} {raw:?} is not a number")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedInput {
    pub table: GroupedModelTable,
    /// True when the file had no prevalence column and each prevalence was
    /// taken to equal its assigned risk.
    pub prevalence_declared: bool,
}

pub fn load_grouped(path: impl AsRef<Path>) -> Result<GroupedInput> {
    read_grouped(open(path.as_ref())?)
}

pub fn read_grouped(reader: impl Read) -> Result<GroupedInput> {
    let (mut rows, header) = Rows::new(reader, &[GROUPED_HEADER, GROUPED_HEADER_NO_PREVALENCE])?;
    let declared = header == GROUPED_HEADER_NO_PREVALENCE;
    let mut groups = Vec::new();
    for (i, (line, fields)) in rows.records()?.into_iter().enumerate() {
        let risk = number(line, "risk", &fields[0])?;
        let mass = number(line, "mass", &fields[1])?;
        let prevalence = if declared {
            risk
        } else {
            number(line, "prevalence", &fields[2])?
        };
        groups.push(Group::new(
            GroupKey::new(format!("row{}", i + 1)),
            risk,
            mass,
            prevalence,
        ));
    }
    Ok(GroupedInput {
        table: GroupedModelTable::new(groups)?,
        prevalence_declared: declared,
    })
}

/// Writes `risk,mass,prevalence` with shortest round-trip formatting.
pub fn write_grouped(table: &GroupedModelTable, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(GROUPED_HEADER.split(','))?;
    for g in table.groups() {
        w.write_record([g.risk, g.mass, g.prevalence].map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointInput {
    pub table: JointModelTable,
    pub model1: GroupedModelTable,
    pub model2: GroupedModelTable,
}

impl JointInput {
    fn from_table(table: JointModelTable) -> Result<Self> {
        Ok(Self {
            model1: table.marginal_primary()?,
            model2: table.marginal_secondary()?,
            table,
        })
    }

    /// Squared calibration bias of each model's labels against the
    /// marginal prevalences.
    pub fn marginal_bias_sq(&self) -> (f64, f64) {
        (
            crate::metrics::calibration_bias_sq(&self.model1),
            crate::metrics::calibration_bias_sq(&self.model2),
        )
    }
}

fn risk_key(prefix: &str, value: f64) -> GroupKey {
    GroupKey::new(format!("{prefix}={value}"))
}

pub fn load_joint(path: impl AsRef<Path>) -> Result<JointInput> {
    read_joint(open(path.as_ref())?)
}

/// Model groups are identified by their assigned risk values; rows sharing
/// `(r1, r2)` are pooled.
pub fn read_joint(reader: impl Read) -> Result<JointInput> {
    let (mut rows, _) = Rows::new(reader, &[JOINT_HEADER])?;
    let mut cells = Vec::new();
    for (line, f) in rows.records()? {
        let risk1 = check_probability("r1", number(line, "r1", &f[0])?)?;
        let risk2 = check_probability("r2", number(line, "r2", &f[1])?)?;
        cells.push(JointCell {
            key1: risk_key("r1", risk1),
            key2: risk_key("r2", risk2),
            risk1,
            risk2,
            mass: number(line, "mass", &f[2])?,
            prevalence: number(line, "prevalence", &f[3])?,
        });
    }
    JointInput::from_table(JointModelTable::new(cells)?)
}

pub fn write_joint(table: &JointModelTable, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(JOINT_HEADER.split(','))?;
    for c in table.cells() {
        w.write_record([c.risk1, c.risk2, c.mass, c.prevalence].map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndividualRecord {
    pub risk1: f64,
    pub risk2: Option<f64>,
    pub outcome: bool,
}

impl IndividualRecord {
    pub fn new(risk1: f64, risk2: Option<f64>, outcome: bool) -> Result<Self> {
        check_probability("risk1", risk1)?;
        if let Some(r) = risk2 {
            check_probability("risk2", r)?;
        }
        Ok(Self {
            risk1,
            risk2,
            outcome,
        })
    }
}

pub fn load_individuals(path: impl AsRef<Path>) -> Result<Vec<IndividualRecord>> {
    read_individuals(open(path.as_ref())?)
}

pub fn read_individuals(reader: impl Read) -> Result<Vec<IndividualRecord>> {
    let (mut rows, _) = Rows::new(reader, &[INDIVIDUALS_HEADER])?;
    rows.records()?
        .into_iter()
        .map(|(line, f)| {
            let risk1 = number(line, "risk1", &f[0])?;
            let risk2 = if f[1].is_empty() {
                None
            } else {
                Some(number(line, "risk2", &f[1])?)
            };
            let outcome = match f[2].as_str() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse(format!(
                        "line {line}: outcome {other:?} is not 0 or 1"
                    )))
                }
            };
            IndividualRecord::new(risk1, risk2, outcome)
        })
        .collect()
}

/// How individual assigned risks are grouped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinScheme {
    /// One group per distinct risk value.
    UniqueValues,
    /// `k` mass-balanced bins; tied risks stay together in the lower bin.
    Quantiles(usize),
}

impl FromStr for BinScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let k = match s {
            "unique" | "unique-values" => return Ok(Self::UniqueValues),
            "deciles" => 10,
            "quintiles" => 5,
            "quartiles" => 4,
            _ => s
                .strip_prefix("quantiles:")
                .or_else(|| {
                    s.strip_prefix("quantiles(")
                        .and_then(|r| r.strip_suffix(')'))
                })
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "invalid bin scheme {s:?}; expected unique, deciles or quantiles:K"
                    ))
                })?,
        };
        Ok(Self::Quantiles(k))
    }
}

impl fmt::Display for BinScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UniqueValues => f.write_str("unique"),
            Self::Quantiles(k) => write!(f, "quantiles:{k}"),
        }
    }
}

/// Bin index for each value.
fn assign_bins(values: &[f64], scheme: BinScheme) -> Result<Vec<usize>> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut bins = vec![0usize; n];

    match scheme {
        BinScheme::UniqueValues => {
            let mut bin = 0;
            for (pos, &i) in order.iter().enumerate() {
                if pos > 0 && values[i] != values[order[pos - 1]] {
                    bin += 1;
                }
                bins[i] = bin;
            }
        }
        BinScheme::Quantiles(k) => {
            if k < 2 {
                return Err(Error::ParameterOutOfRange {
                    name: "bins",
                    value: k as f64,
                    reason: "quantile binning needs at least 2 bins",
                });
            }
            let distinct = 1 + order
                .windows(2)
                .filter(|w| values[w[0]] != values[w[1]])
                .count();
            if distinct < k {
                return Err(Error::DegenerateBins { distinct, bins: k });
            }
            let mut current = 0;
            for (pos, &i) in order.iter().enumerate() {
                let tied = pos > 0 && values[i] == values[order[pos - 1]];
                if !tied {
                    current = pos * k / n;
                }
                bins[i] = current;
            }
        }
    }
    Ok(bins)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedModels {
    pub model1: GroupedModelTable,
    pub model2: Option<GroupedModelTable>,
    pub joint: Option<JointModelTable>,
}

struct Tally {
    count: usize,
    risk_sum: f64,
    risk_min: f64,
    risk_max: f64,
    cases: usize,
}

impl Default for Tally {
    fn default() -> Self {
        Self {
            count: 0,
            risk_sum: 0.0,
            risk_min: f64::INFINITY,
            risk_max: f64::NEG_INFINITY,
            cases: 0,
        }
    }
}

impl Tally {
    /// Mean risk in the bin, exact when every member shares one value.
    fn risk(&self) -> f64 {
        if self.risk_min == self.risk_max {
            self.risk_min
        } else {
            (self.risk_sum / self.count as f64).clamp(self.risk_min, self.risk_max)
        }
    }
}

fn bin_key(bin: usize) -> GroupKey {
    GroupKey::new(format!("bin{:02}", bin + 1))
}

fn tally(
    bins: &[usize],
    risks: impl Iterator<Item = f64>,
    records: &[IndividualRecord],
) -> BTreeMap<usize, Tally> {
    let mut acc: BTreeMap<usize, Tally> = BTreeMap::new();
    for ((&b, r), rec) in bins.iter().zip(risks).zip(records) {
        let t = acc.entry(b).or_default();
        t.count += 1;
        t.risk_sum += r;
        t.risk_min = t.risk_min.min(r);
        t.risk_max = t.risk_max.max(r);
        t.cases += usize::from(rec.outcome);
    }
    acc
}

fn grouped_from_tally(acc: &BTreeMap<usize, Tally>, n: usize) -> Result<GroupedModelTable> {
    GroupedModelTable::new(acc.iter().map(|(&b, t)| {
        Group::new(
            bin_key(b),
            t.risk(),
            t.count as f64 / n as f64,
            t.cases as f64 / t.count as f64,
        )
    }))
}

/// Groups individuals into model risk groups. When every record carries a
/// second risk, the second model and the cross-classification are built too.
pub fn bin_individuals(records: &[IndividualRecord], scheme: BinScheme) -> Result<BinnedModels> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = records.len();
    let risks1: Vec<f64> = records.iter().map(|r| r.risk1).collect();
    let bins1 = assign_bins(&risks1, scheme)?;
    let tally1 = tally(&bins1, risks1.iter().copied(), records);
    let model1 = grouped_from_tally(&tally1, n)?;

    let with_second = records.iter().filter(|r| r.risk2.is_some()).count();
    if with_second == 0 {
        return Ok(BinnedModels {
            model1,
            model2: None,
            joint: None,
        });
    }
    if with_second != n {
        return Err(Error::InvariantViolation(
            "risk2 must be given for all records or for none".into(),
        ));
    }
    let risks2: Vec<f64> = records.iter().map(|r| r.risk2.expect("checked")).collect();
    let bins2 = assign_bins(&risks2, scheme)?;
    let tally2 = tally(&bins2, risks2.iter().copied(), records);
    let model2 = grouped_from_tally(&tally2, n)?;

    let mut cells: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for ((&b1, &b2), rec) in bins1.iter().zip(&bins2).zip(records) {
        let e = cells.entry((b1, b2)).or_default();
        e.0 += 1;
        e.1 += usize::from(rec.outcome);
    }
    let joint = JointModelTable::new(cells.into_iter().map(|((b1, b2), (count, cases))| {
        let t1 = &tally1[&b1];
        let t2 = &tally2[&b2];
        JointCell {
            key1: bin_key(b1),
            key2: bin_key(b2),
            risk1: t1.risk(),
            risk2: t2.risk(),
            mass: count as f64 / n as f64,
            prevalence: cases as f64 / count as f64,
        }
    }))?;
    Ok(BinnedModels {
        model1,
        model2: Some(model2),
        joint: Some(joint),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossDecileCell {
    pub decile1: u32,
    pub decile2: u32,
    pub person_years: f64,
    pub cases: u64,
}

impl CrossDecileCell {
    pub fn incidence(&self) -> f64 {
        self.cases as f64 / self.person_years
    }
}

/// Case counts and follow-up cross-classified by the deciles of two models,
/// with the competing mortality and horizon used to turn rates into risks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossDecileTable {
    pub cells: Vec<CrossDecileCell>,
    pub annual_mortality_rate: f64,
    pub horizon_years: f64,
}

impl CrossDecileTable {
    pub fn new(
        cells: Vec<CrossDecileCell>,
        annual_mortality_rate: f64,
        horizon_years: f64,
    ) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptyInput);
        }
        // validates the rates and horizon
        absolute_risk(0.0, annual_mortality_rate, horizon_years)?;
        for c in &cells {
            for (name, d) in [("decile1", c.decile1), ("decile2", c.decile2)] {
                if !(1..=10).contains(&d) {
                    return Err(Error::ParameterOutOfRange {
                        name,
                        value: f64::from(d),
                        reason: "deciles are numbered 1 to 10",
                    });
                }
            }
            check_finite("person_years", c.person_years)?;
            if c.person_years <= 0.0 {
                return Err(Error::ZeroPersonYears {
                    decile1: c.decile1,
                    decile2: c.decile2,
                });
            }
            if c.cases as f64 > c.person_years {
                return Err(Error::InvariantViolation(format!(
                    "cell ({}, {}) has more cases than person-years",
                    c.decile1, c.decile2
                )));
            }
        }
        Ok(Self {
            cells,
            annual_mortality_rate,
            horizon_years,
        })
    }

    pub fn read(reader: impl Read, mortality: f64, horizon: f64) -> Result<Self> {
        let (mut rows, _) = Rows::new(reader, &[CROSS_DECILE_HEADER])?;
        let mut cells = Vec::new();
        for (line, f) in rows.records()? {
            let int = |field: &str, raw: &str| {
                raw.parse::<u64>().map_err(|_| {
                    Error::Parse(format!(
                        "line {line}: {field} {raw:?} is not a nonnegative integer"
                    ))
                })
            };
            cells.push(CrossDecileCell {
                decile1: int("decile1", &f[0])? as u32,
                decile2: int("decile2", &f[1])? as u32,
                person_years: number(line, "person_years", &f[2])?,
                cases: int("cases", &f[3])?,
            });
        }
        Self::new(cells, mortality, horizon)
    }

    /// The cross-classified model: cell prevalence is the absolute risk
    /// implied by the cell's incidence, cell mass its share of person-years.
    /// Each model's decile is assigned its marginal prevalence.
    pub fn joint(&self) -> Result<JointModelTable> {
        let total: f64 = self.cells.iter().map(|c| c.person_years).sum();
        let mut prevalences = Vec::with_capacity(self.cells.len());
        for c in &self.cells {
            prevalences.push(absolute_risk(
                c.incidence(),
                self.annual_mortality_rate,
                self.horizon_years,
            )?);
        }
        let marginal = |pick: fn(&CrossDecileCell) -> u32| {
            let mut acc: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
            for (c, p) in self.cells.iter().zip(&prevalences) {
                let e = acc.entry(pick(c)).or_default();
                e.0 += c.person_years;
                e.1 += c.person_years * p;
            }
            acc.into_iter()
                .map(|(d, (py, w))| (d, w / py))
                .collect::<BTreeMap<u32, f64>>()
        };
        let risk1 = marginal(|c| c.decile1);
        let risk2 = marginal(|c| c.decile2);
        JointModelTable::new(
            self.cells
                .iter()
                .zip(&prevalences)
                .map(|(c, &p)| JointCell {
                    key1: decile_key(1, c.decile1),
                    key2: decile_key(2, c.decile2),
                    risk1: risk1[&c.decile1],
                    risk2: risk2[&c.decile2],
                    mass: c.person_years / total,
                    prevalence: p,
                }),
        )
    }
}

pub fn decile_key(model: u8, decile: u32) -> GroupKey {
    GroupKey::new(format!("m{model}d{decile:02}"))
}

pub fn load_cross_decile(
    path: impl AsRef<Path>,
    mortality: f64,
    horizon: f64,
) -> Result<JointModelTable> {
    CrossDecileTable::read(open(path.as_ref())?, mortality, horizon)?.joint()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_conversion() {
        let r = absolute_risk(0.0021, 0.0053, 10.0).unwrap();
        assert!((r - 0.0202418166126).abs() < 1e-12);
        assert_eq!(absolute_risk(0.0, 0.0053, 10.0).unwrap(), 0.0);
        assert_eq!(absolute_risk(0.0, 0.0, 10.0).unwrap(), 0.0);
        let no_death = absolute_risk(0.0021, 0.0, 10.0).unwrap();
        assert!((no_death - (1.0 - (-0.021f64).exp())).abs() < 1e-15);
        assert!(matches!(
            absolute_risk(-0.1, 0.0, 1.0),
            Err(Error::NegativeRate { .. })
        ));
        assert!(matches!(
            absolute_risk(0.1, -0.01, 1.0),
            Err(Error::NegativeRate { .. })
        ));
        assert!(absolute_risk(0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn rate_conversion_series_branch_is_continuous() {
        let lam = 3e-10;
        let mu = 2e-10;
        let below = absolute_risk(lam, mu, 10.0).unwrap();
        let exact = lam / (lam + mu) * -(-(lam + mu) * 10.0f64).exp_m1();
        assert!((below - exact).abs() < 1e-22);
        assert!((below - lam * 10.0).abs() < 1e-17);
    }

    #[test]
    fn grouped_parsing() {
        let t = read_grouped("risk,mass,prevalence\n0.1,1.0,0.1\n".as_bytes()).unwrap();
        assert_eq!(t.table.len(), 1);
        assert!(!t.prevalence_declared);

        let d = read_grouped("risk,mass\n0.05,0.5\n0.15,0.5\n".as_bytes()).unwrap();
        assert!(d.prevalence_declared);
        assert_eq!(crate::metrics::calibration_bias_sq(&d.table), 0.0);

        assert!(matches!(
            read_grouped("risk,mass,prevalence\n0.1,0.49,0.1\n0.2,0.49,0.2\n".as_bytes()),
            Err(Error::MassSumOutOfTolerance { .. })
        ));
        assert!(matches!(read_grouped("".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(
            read_grouped("risk,mass,prevalence\n".as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            read_grouped("risk,prevalence,mass\n0.1,0.1,1\n".as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            read_grouped("risk,mass,prevalence\n0.1,x,0.1\n".as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            read_grouped("risk,mass,prevalence\n1.1,1,0.1\n".as_bytes()),
            Err(Error::RiskOutOfRange { .. })
        ));
    }

    #[test]
    fn joint_parsing_merges_duplicates() {
        let j = read_joint(
            "r1,r2,mass,prevalence\n0.1,0.1,0.25,0.1\n0.1,0.1,0.25,0.3\n0.3,0.2,0.5,0.2\n"
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(j.table.len(), 2);
        assert!((j.table.cells()[0].prevalence - 0.2).abs() < 1e-15);
        assert!(matches!(read_joint("".as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn individuals_parsing() {
        let recs = read_individuals("risk1,risk2,outcome\n0.1,,0\n0.2,0.3,1\n".as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].risk2, None);
        assert!(recs[1].outcome);
        assert!(read_individuals("risk1,risk2,outcome\n0.1,,2\n".as_bytes()).is_err());
    }

    #[test]
    fn bin_scheme_parsing() {
        assert_eq!(
            "unique".parse::<BinScheme>().unwrap(),
            BinScheme::UniqueValues
        );
        assert_eq!(
            "deciles".parse::<BinScheme>().unwrap(),
            BinScheme::Quantiles(10)
        );
        assert_eq!(
            "quantiles:7".parse::<BinScheme>().unwrap(),
            BinScheme::Quantiles(7)
        );
        assert_eq!(
            "quantiles(3)".parse::<BinScheme>().unwrap(),
            BinScheme::Quantiles(3)
        );
        assert!("tertiles".parse::<BinScheme>().is_err());
    }

    #[test]
    fn constant_risk_single_group() {
        let recs: Vec<_> = (0..100)
            .map(|i| IndividualRecord::new(0.1, None, i % 10 == 0).unwrap())
            .collect();
        let b = bin_individuals(&recs, BinScheme::UniqueValues).unwrap();
        assert_eq!(b.model1.len(), 1);
        let g = &b.model1.groups()[0];
        assert_eq!((g.risk, g.mass, g.prevalence), (0.1, 1.0, 0.1));
        assert!(b.joint.is_none());
        assert!(matches!(
            bin_individuals(&recs, BinScheme::Quantiles(10)),
            Err(Error::DegenerateBins {
                distinct: 1,
                bins: 10
            })
        ));
        assert!(matches!(
            bin_individuals(&[], BinScheme::UniqueValues),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn quantile_ties_go_to_lower_bin() {
        // sorted positions 0..6 over 3 bins: 0,0,1,1,2,2 without ties
        let values = [0.1, 0.2, 0.2, 0.2, 0.5, 0.6];
        let bins = assign_bins(&values, BinScheme::Quantiles(3)).unwrap();
        assert_eq!(bins, vec![0, 0, 0, 0, 2, 2]);
        assert!(assign_bins(&values, BinScheme::Quantiles(1)).is_err());
    }

    #[test]
    fn cross_decile_pooled_cell() {
        let csv = "decile1,decile2,person_years,cases\n1,1,476581,1559\n";
        let joint = CrossDecileTable::read(csv.as_bytes(), 0.0053, 10.0)
            .unwrap()
            .joint()
            .unwrap();
        let lam: f64 = 1559.0 / 476581.0;
        let expected = lam / (lam + 0.0053) * (1.0 - (-(lam + 0.0053) * 10.0).exp());
        assert!((joint.cells()[0].prevalence - expected).abs() < 1e-15);
        assert!((joint.cells()[0].prevalence - 0.03135).abs() < 5e-5);
    }

    #[test]
    fn cross_decile_validation() {
        let zero_cases = "decile1,decile2,person_years,cases\n1,1,1000,0\n2,1,1000,3\n";
        let j = CrossDecileTable::read(zero_cases.as_bytes(), 0.005, 10.0)
            .unwrap()
            .joint()
            .unwrap();
        assert_eq!(j.cells()[0].prevalence, 0.0);

        let zero_py = "decile1,decile2,person_years,cases\n1,1,0,0\n";
        assert!(matches!(
            CrossDecileTable::read(zero_py.as_bytes(), 0.005, 10.0),
            Err(Error::ZeroPersonYears { .. })
        ));
        let bad_decile = "decile1,decile2,person_years,cases\n11,1,10,0\n";
        assert!(CrossDecileTable::read(bad_decile.as_bytes(), 0.005, 10.0).is_err());
        let neg_rate = "decile1,decile2,person_years,cases\n1,1,10,0\n";
        assert!(CrossDecileTable::read(neg_rate.as_bytes(), -0.005, 10.0).is_err());
    }
}
