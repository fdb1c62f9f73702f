//! Check outcomes, criterion records, CSV tables and the run report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `value < bound`
    Below,
    /// `value > bound`
    Above,
    /// `value >= bound`
    AtLeast,
    /// `lo <= value <= hi`, with `bound = lo` and `upper = hi`.
    Between,
}

/// One named numerical check with its bar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// `None` when the computed value was not finite.
    pub value: Option<f64>,
    pub relation: Relation,
    pub bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn make(name: impl Into<String>, value: f64, relation: Relation, bound: f64, upper: Option<f64>) -> Self {
        let pass = value.is_finite()
            && match relation {
                Relation::Below => value < bound,
                Relation::Above => value > bound,
                Relation::AtLeast => value >= bound,
                Relation::Between => value >= bound && value <= upper.unwrap_or(f64::INFINITY),
            };
        Check {
            name: name.into(),
            value: value.is_finite().then_some(value),
            relation,
            bound,
            upper,
            pass,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::make(name, value, Relation::Below, bound, None)
    }

    pub fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::make(name, value, Relation::Above, bound, None)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::make(name, value, Relation::AtLeast, bound, None)
    }

    pub fn between(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self::make(name, value, Relation::Between, lo, Some(hi))
    }

    /// A yes/no property, recorded as value 1 or 0 against `>= 1`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

/// A plot-ready table written as CSV next to the report.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// File name without directory, e.g. `born_sweep.csv`.
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Table {
            file: file.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(dir.join(&self.file))
            .map_err(csv_error)?;
        w.write_record(&self.header).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::Error::Numeric(format!("csv: {other:?}")),
    }
}

/// Result of one acceptance criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    /// Reported quantities that are not pass/fail bars.
    pub data: BTreeMap<String, Value>,
    pub pass: bool,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl CriterionOutcome {
    pub fn new(id: u8, title: impl Into<String>) -> Self {
        CriterionOutcome {
            id,
            title: title.into(),
            checks: Vec::new(),
            data: BTreeMap::new(),
            pass: true,
            tables: Vec::new(),
        }
    }

    pub fn check(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    pub fn datum(&mut self, key: impl Into<String>, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.data.insert(key.into(), v);
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// One line: `criterion  3 PASS  action routes agree (10 checks)`.
    pub fn summary_line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let tail = if failed > 0 {
            format!("{failed} of {} checks failed", self.checks.len())
        } else {
            format!("{} checks", self.checks.len())
        };
        format!("criterion {:>2} {status}  {} ({tail})", self.id, self.title)
    }
}

/// Everything `run` writes to `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    /// The resolved configuration, defaults filled in.
    pub config: Value,
    pub criteria: Vec<CriterionOutcome>,
    /// CSV files written next to the report.
    pub tables: Vec<String>,
    pub passed: bool,
    /// Seconds per criterion. The only field that varies between identical runs.
    pub wall_clock: BTreeMap<String, f64>,
}

impl Report {
    /// The report with `wall_clock` cleared, for reproducibility comparisons.
    pub fn payload(&self) -> Report {
        Report {
            wall_clock: BTreeMap::new(),
            ..self.clone()
        }
    }
}

pub fn version_string() -> String {
    match option_env!("HE_GIT_DESCRIBE") {
        Some(g) if !g.is_empty() => format!("{} ({g})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_values_fail() {
        let c = Check::below("x", f64::NAN, 1.0);
        assert!(!c.pass);
        assert_eq!(c.value, None);
        assert!(!Check::at_least("y", f64::INFINITY, 0.0).pass);
    }

    #[test]
    fn relations() {
        assert!(Check::below("a", 0.5, 1.0).pass);
        assert!(!Check::below("a", 1.0, 1.0).pass);
        assert!(Check::at_least("b", 1.0, 1.0).pass);
        assert!(Check::between("c", 2.0, 1.8, 2.2).pass);
        assert!(!Check::between("c", 2.3, 1.8, 2.2).pass);
        assert!(!Check::holds("d", false).pass);
    }

    #[test]
    fn one_failed_check_fails_the_criterion() {
        let mut o = CriterionOutcome::new(1, "t");
        o.check(Check::below("a", 0.0, 1.0));
        assert!(o.pass);
        o.check(Check::above("b", 0.0, 1.0));
        assert!(!o.pass);
        assert!(o.summary_line().contains("FAIL"));
        assert_eq!(o.failed_checks().count(), 1);
    }

    #[test]
    fn table_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("t.csv", &["a", "b"]);
        t.push(vec![0.5, -1e-9]);
        t.write(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "a,b\n0.5,-0.000000001\n");
    }
}
