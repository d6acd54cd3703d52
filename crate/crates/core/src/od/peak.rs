//! Region-to-region peak-period trip matrix for the 20 regions of the
//! 2011-2012 Transportation Tomorrow Survey area, as published (cells
//! rounded to the nearest 100 trips).
//!
//! Cells printed as "." ship as `suppressed`; cells left blank in the
//! publication ship as empty fields. Both are treated as suppressed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ODMatrix;
use crate::error::{Error, Result};

pub const PEAK_OD_CSV: &str = include_str!("../../fixtures/peak_region_od.csv");

/// Toronto plus the five surrounding regions, in matrix order.
pub const CORE_REGIONS: [&str; 6] = [
    "City of Toronto",
    "Region of Durham",
    "Region of York",
    "Region of Peel",
    "Region of Halton",
    "City of Hamilton",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PeakOd {
    pub matrix: ODMatrix,
    /// Cells that were blank rather than "." in the publication.
    pub blank: BTreeSet<(usize, usize)>,
    pub printed_row_totals: Vec<f64>,
    pub printed_col_totals: Vec<f64>,
    pub printed_grand_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheck {
    /// `row`, `column` or `grand`.
    pub axis: String,
    pub label: String,
    pub printed: f64,
    pub computed: f64,
    pub difference: f64,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: "peak_region_od.csv".into(),
        line: line as u64,
        message: message.into(),
    }
}

fn number(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("bad number '{s}'")))
}

/// Parse the bundled fixture.
pub fn peak_od() -> Result<PeakOd> {
    let mut lines = PEAK_OD_CSV.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty fixture"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "origin" || *cols.last().unwrap() != "Region Totals" {
        return Err(parse_err(1, "unexpected header"));
    }
    let labels: Vec<String> = cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect();
    let n = labels.len();
    let mut matrix = ODMatrix::zeros(labels.clone());
    let mut blank = BTreeSet::new();
    let mut printed_row_totals = Vec::with_capacity(n);
    let mut printed_col_totals = Vec::new();
    let mut printed_grand_total = 0.0;

    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != n + 2 {
            return Err(parse_err(lineno, format!("expected {} fields, got {}", n + 2, f.len())));
        }
        if f[0] == "Region Totals" {
            for v in &f[1..=n] {
                printed_col_totals.push(number(v, lineno)?);
            }
            printed_grand_total = number(f[n + 1], lineno)?;
            continue;
        }
        let i = printed_row_totals.len();
        if i >= n || f[0] != labels[i] {
            return Err(parse_err(lineno, format!("row '{}' out of order", f[0])));
        }
        for (j, v) in f[1..=n].iter().enumerate() {
            match *v {
                "" => {
                    blank.insert((i, j));
                    matrix.suppressed.insert((i, j));
                }
                "suppressed" => {
                    matrix.suppressed.insert((i, j));
                }
                s => matrix.cells[i][j] = number(s, lineno)?,
            }
        }
        printed_row_totals.push(number(f[n + 1], lineno)?);
    }
    if printed_row_totals.len() != n || printed_col_totals.len() != n {
        return Err(parse_err(0, "fixture is missing rows or the totals row"));
    }
    Ok(PeakOd {
        matrix,
        blank,
        printed_row_totals,
        printed_col_totals,
        printed_grand_total,
    })
}

impl PeakOd {
    /// Recomputed marginals against the printed totals.
    pub fn marginal_checks(&self) -> Vec<MarginalCheck> {
        let mk = |axis: &str, label: &str, printed: f64, computed: f64| MarginalCheck {
            axis: axis.into(),
            label: label.into(),
            printed,
            computed,
            difference: computed - printed,
        };
        let rows = self.matrix.row_totals();
        let cols = self.matrix.col_totals();
        let labels = &self.matrix.labels;
        let mut out: Vec<MarginalCheck> = labels
            .iter()
            .zip(rows.iter().zip(&self.printed_row_totals))
            .map(|(l, (c, p))| mk("row", l, *p, *c))
            .collect();
        out.extend(
            labels
                .iter()
                .zip(cols.iter().zip(&self.printed_col_totals))
                .map(|(l, (c, p))| mk("column", l, *p, *c)),
        );
        out.push(mk("grand", "all", self.printed_grand_total, self.matrix.total()));
        out
    }

    /// Marginals that differ from print by more than `tolerance`. Each one is
    /// logged as a warning.
    pub fn discrepancies(&self, tolerance: f64) -> Vec<MarginalCheck> {
        let bad: Vec<_> = self
            .marginal_checks()
            .into_iter()
            .filter(|c| c.difference.abs() > tolerance)
            .collect();
        for c in &bad {
            log::warn!(
                "peak matrix {} total for {}: printed {} vs computed {}",
                c.axis,
                c.label,
                c.printed,
                c.computed
            );
        }
        bad
    }

    pub fn core(&self) -> Result<ODMatrix> {
        self.matrix.submatrix(&CORE_REGIONS)
    }
}
