//! Origin-destination matrices built from trip records, and the per-cell
//! sampling requirements derived from them.

mod peak;
mod sweep;

pub use peak::{peak_od, MarginalCheck, PeakOd, CORE_REGIONS, PEAK_OD_CSV};
pub use sweep::{disaggregation_sweep, SweepRow, SWEEP_LEVELS};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{Dimension, Mode, Period, Purpose, TripRecord};
use crate::stats::{coefficient_of_variation, interchange_rate, SizeSpec};

/// Optional filter on the three trip dimensions; `None` matches anything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub period: Option<Period>,
    pub mode: Option<Mode>,
    pub purpose: Option<Purpose>,
}

impl Slice {
    pub fn matches(&self, t: &TripRecord) -> bool {
        self.period.is_none_or(|p| p == t.period)
            && self.mode.is_none_or(|m| m == t.mode)
            && self.purpose.is_none_or(|p| p == t.purpose)
    }

    pub fn is_all(&self) -> bool {
        *self == Slice::default()
    }
}

/// Zone to region mapping with a fixed region order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub regions: Vec<String>,
    pub zone_to_region: BTreeMap<String, String>,
}

impl Partition {
    /// Every zone is its own region, in the given order.
    pub fn identity<S: AsRef<str>>(zones: &[S]) -> Self {
        let regions: Vec<String> = zones.iter().map(|z| z.as_ref().to_string()).collect();
        let zone_to_region = regions.iter().map(|z| (z.clone(), z.clone())).collect();
        Self {
            regions,
            zone_to_region,
        }
    }

    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, S)]) -> Self {
        let mut regions: Vec<String> = Vec::new();
        let mut zone_to_region = BTreeMap::new();
        for (z, r) in pairs {
            let r = r.as_ref().to_string();
            if !regions.contains(&r) {
                regions.push(r.clone());
            }
            zone_to_region.insert(z.as_ref().to_string(), r);
        }
        Self {
            regions,
            zone_to_region,
        }
    }

    pub(crate) fn region_index(&self) -> HashMap<&str, usize> {
        let pos: HashMap<&str, usize> = self
            .regions
            .iter()
            .enumerate()
            .map(|(i, r)| (r.as_str(), i))
            .collect();
        self.zone_to_region
            .iter()
            .filter_map(|(z, r)| pos.get(r.as_str()).map(|&i| (z.as_str(), i)))
            .collect()
    }
}

/// Square matrix of trip totals over a list of spatial units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ODMatrix {
    pub labels: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    /// Cells below the publication threshold; excluded from statistics.
    pub suppressed: BTreeSet<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<Slice>,
}

impl ODMatrix {
    pub fn zeros(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            cells: vec![vec![0.0; n]; n],
            suppressed: BTreeSet::new(),
            slice: None,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn get(&self, origin: &str, destination: &str) -> Option<f64> {
        let (i, j) = (self.index_of(origin)?, self.index_of(destination)?);
        (!self.suppressed.contains(&(i, j))).then(|| self.cells[i][j])
    }

    pub fn is_suppressed(&self, i: usize, j: usize) -> bool {
        self.suppressed.contains(&(i, j))
    }

    /// Unsuppressed cells in row-major order.
    pub fn available_cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells.iter().enumerate().flat_map(move |(i, row)| {
            row.iter()
                .enumerate()
                .filter(move |(j, _)| !self.suppressed.contains(&(i, *j)))
                .map(move |(j, &v)| (i, j, v))
        })
    }

    pub fn row_totals(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.len()];
        self.available_cells().for_each(|(i, _, v)| t[i] += v);
        t
    }

    pub fn col_totals(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.len()];
        self.available_cells().for_each(|(_, j, v)| t[j] += v);
        t
    }

    pub fn total(&self) -> f64 {
        self.available_cells().map(|(_, _, v)| v).sum()
    }

    /// Restrict to the given labels, in the given order.
    pub fn submatrix<S: AsRef<str>>(&self, labels: &[S]) -> Result<ODMatrix> {
        let idx = labels
            .iter()
            .map(|l| {
                self.index_of(l.as_ref())
                    .ok_or_else(|| Error::Validation(format!("unknown label {}", l.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = ODMatrix::zeros(labels.iter().map(|l| l.as_ref().to_string()).collect());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.cells[a][b] = self.cells[i][j];
                if self.is_suppressed(i, j) {
                    out.suppressed.insert((a, b));
                }
            }
        }
        out.slice = self.slice;
        Ok(out)
    }

    /// CV over the unsuppressed cell values.
    pub fn cell_cv(&self) -> Result<f64> {
        let v: Vec<f64> = self.available_cells().map(|(_, _, v)| v).collect();
        coefficient_of_variation(&v)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("origin");
        for l in &self.labels {
            out.push(',');
            out.push_str(&csv_field(l));
        }
        out.push('\n');
        for (i, row) in self.cells.iter().enumerate() {
            out.push_str(&csv_field(&self.labels[i]));
            for (j, v) in row.iter().enumerate() {
                out.push(',');
                if self.is_suppressed(i, j) {
                    out.push_str("suppressed");
                } else {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Weighted trip totals per (origin region, destination region) for trips
/// in `slice`.
pub fn build_od_matrix(trips: &[TripRecord], partition: &Partition, slice: Slice) -> Result<ODMatrix> {
    let idx = partition.region_index();
    let lookup = |z: &str| {
        idx.get(z)
            .copied()
            .ok_or_else(|| Error::Validation(format!("zone '{z}' is not mapped to a region")))
    };
    let mut m = ODMatrix::zeros(partition.regions.clone());
    m.slice = (!slice.is_all()).then_some(slice);
    for t in trips {
        let (o, d) = (lookup(&t.origin_zone)?, lookup(&t.destination_zone)?);
        if slice.matches(t) {
            m.cells[o][d] += t.weight;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    pub labels: Vec<String>,
    pub cv: f64,
    pub spec: SizeSpec,
    /// `None` where the cell is suppressed or holds no trips.
    pub rates: Vec<Vec<Option<f64>>>,
}

impl RateMatrix {
    pub fn get(&self, origin: &str, destination: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == origin)?;
        let j = self.labels.iter().position(|l| l == destination)?;
        self.rates[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("origin");
        for l in &self.labels {
            out.push(',');
            out.push_str(&csv_field(l));
        }
        out.push('\n');
        for (i, row) in self.rates.iter().enumerate() {
            out.push_str(&csv_field(&self.labels[i]));
            for r in row {
                out.push(',');
                match r {
                    Some(v) => out.push_str(&v.to_string()),
                    None => out.push_str("unavailable"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Per-cell required sampling rate. Cell totals are rounded to whole trips.
pub fn cell_required_rates(matrix: &ODMatrix, cv: f64, spec: &SizeSpec) -> Result<RateMatrix> {
    let n = matrix.len();
    let mut rates = vec![vec![None; n]; n];
    for (i, j, v) in matrix.available_cells() {
        let total = v.round();
        if total >= 1.0 {
            rates[i][j] = Some(interchange_rate(total as u64, cv, spec)?);
        }
    }
    Ok(RateMatrix {
        labels: matrix.labels.clone(),
        cv,
        spec: *spec,
        rates,
    })
}

/// Weighted trip totals per category combination over `dims`, keyed by the
/// category tokens. Only observed combinations appear.
pub fn group_totals(trips: &[TripRecord], dims: &[Dimension]) -> BTreeMap<Vec<&'static str>, f64> {
    let mut out: BTreeMap<Vec<&'static str>, f64> = BTreeMap::new();
    for t in trips {
        let key = dims.iter().map(|d| t.category(*d)).collect();
        *out.entry(key).or_default() += t.weight;
    }
    out
}

/// CV of trip totals across the category combinations of `dims`.
pub fn matrix_cv(trips: &[TripRecord], dims: &[Dimension]) -> Result<f64> {
    let totals: Vec<f64> = group_totals(trips, dims)
        .into_values()
        .filter(|v| *v > 0.0)
        .collect();
    if totals.len() < 2 {
        return Err(Error::Degenerate(format!(
            "grouping by {dims:?} leaves {} nonzero groups; need at least 2",
            totals.len()
        )));
    }
    coefficient_of_variation(&totals)
}

/// Mean absolute percentage error over cells where the reference is
/// positive and neither matrix suppresses the cell.
pub fn mape(estimate: &ODMatrix, reference: &ODMatrix) -> Result<f64> {
    if estimate.labels != reference.labels {
        return Err(Error::Schema("matrices have different labels".into()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, j, r) in reference.available_cells() {
        if r > 0.0 && !estimate.is_suppressed(i, j) {
            sum += (estimate.cells[i][j] - r).abs() / r;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Degenerate("no reference cell is positive".into()));
    }
    Ok(sum / n as f64 * 100.0)
}
