//! Report rows, CSV output and the JSON summary.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// One line of a verification report.
///
/// Rows with a bound are pass/fail; rows without one are recorded
/// statistics. `degenerate` marks `0/0` ratios, which are reported as 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub check: String,
    pub params: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub bound: Option<f64>,
    pub pass: Option<bool>,
    #[serde(skip)]
    pub degenerate: bool,
}

fn ratio_of(lhs: f64, rhs: f64) -> (f64, bool) {
    if lhs == 0.0 && rhs == 0.0 {
        (1.0, true)
    } else {
        (lhs / rhs, false)
    }
}

impl ReportRow {
    /// `lhs / rhs` against `bound`; passes iff `ratio <= bound`.
    pub fn bounded(check: &str, params: String, lhs: f64, rhs: f64, bound: f64) -> Self {
        let (ratio, degenerate) = ratio_of(lhs, rhs);
        Self::build(
            check,
            params,
            lhs,
            rhs,
            ratio,
            Some(bound),
            Some(ratio <= bound),
            degenerate,
        )
    }

    /// A recorded ratio with no pass contract.
    pub fn recorded(check: &str, params: String, lhs: f64, rhs: f64) -> Self {
        let (ratio, degenerate) = ratio_of(lhs, rhs);
        Self::build(check, params, lhs, rhs, ratio, None, None, degenerate)
    }

    /// A residual against a tolerance. `reference` is the size of the
    /// quantity the residual is measured against.
    pub fn residual(check: &str, params: String, residual: f64, reference: f64, tolerance: f64) -> Self {
        Self::build(
            check,
            params,
            residual,
            reference,
            residual,
            Some(tolerance),
            Some(residual <= tolerance),
            false,
        )
    }

    /// A bounded row whose pass flag carries its own slack.
    pub fn with_pass(
        check: &str,
        params: String,
        lhs: f64,
        rhs: f64,
        bound: Option<f64>,
        pass: bool,
    ) -> Self {
        let (ratio, degenerate) = ratio_of(lhs, rhs);
        Self::build(check, params, lhs, rhs, ratio, bound, Some(pass), degenerate)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        check: &str,
        params: String,
        lhs: f64,
        rhs: f64,
        ratio: f64,
        bound: Option<f64>,
        pass: Option<bool>,
        degenerate: bool,
    ) -> Self {
        debug_assert!(!params.contains(','), "params must not contain commas");
        Self {
            check: check.to_owned(),
            params: if degenerate {
                format!("{params};degenerate")
            } else {
                params
            },
            lhs,
            rhs,
            ratio,
            bound,
            pass,
            degenerate,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.pass.is_some()
    }

    pub fn failed(&self) -> bool {
        self.pass == Some(false)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CheckSummary {
    pub rows: usize,
    pub bounded: usize,
    pub failed: usize,
    pub degenerate: usize,
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub rows: usize,
    pub bounded: usize,
    pub failed: usize,
    pub all_pass: bool,
    pub checks: BTreeMap<String, CheckSummary>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    rows: Vec<ReportRow>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ReportRow>) {
        self.rows.extend(rows);
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    pub fn rows_for<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.check == check)
    }

    /// True iff every bounded row passes.
    pub fn all_pass(&self) -> bool {
        !self.rows.iter().any(ReportRow::failed)
    }

    pub fn summary(&self) -> Summary {
        let mut checks: BTreeMap<String, CheckSummary> = BTreeMap::new();
        for row in &self.rows {
            let c = checks.entry(row.check.clone()).or_default();
            c.rows += 1;
            c.bounded += row.is_bounded() as usize;
            c.failed += row.failed() as usize;
            c.degenerate += row.degenerate as usize;
            if row.ratio.is_finite() || row.ratio.is_infinite() {
                c.max_ratio = Some(c.max_ratio.map_or(row.ratio, |m| m.max(row.ratio)));
            }
        }
        Summary {
            rows: self.rows.len(),
            bounded: checks.values().map(|c| c.bounded).sum(),
            failed: checks.values().map(|c| c.failed).sum(),
            all_pass: self.all_pass(),
            checks,
        }
    }

    /// CSV with header `check,params,lhs,rhs,ratio,bound,pass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.summary())?;
        Ok(())
    }
}
