//! Percent RMSE of survey marginals against reference marginals.
//!
//! Squared relative errors are averaged over the categories of each
//! variable, then over variables, then rooted and scaled to percent.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{HouseholdRecord, TripRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalTable {
    pub variable: String,
    pub categories: Vec<Category>,
}

impl MarginalTable {
    pub fn new<S: Into<String>>(variable: S, categories: &[(&str, f64)]) -> Self {
        Self {
            variable: variable.into(),
            categories: categories
                .iter()
                .map(|(l, v)| Category {
                    label: l.to_string(),
                    value: *v,
                })
                .collect(),
        }
    }

    fn values(&self) -> Result<HashMap<&str, f64>> {
        let mut map = HashMap::with_capacity(self.categories.len());
        for c in &self.categories {
            if !(c.value >= 0.0 && c.value.is_finite()) {
                return Err(Error::Validation(format!(
                    "{}/{}: value must be finite and >= 0, got {}",
                    self.variable, c.label, c.value
                )));
            }
            if map.insert(c.label.as_str(), c.value).is_some() {
                return Err(Error::Schema(format!(
                    "duplicate category '{}' in variable {}",
                    c.label, self.variable
                )));
            }
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryError {
    pub variable: String,
    pub category: String,
    pub reference: f64,
    pub sample: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedCategory {
    pub variable: String,
    pub category: String,
    pub sample: f64,
    /// `uncoverable` (reference 0, sample > 0) or `empty` (both 0).
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableErrors {
    pub included: Vec<CategoryError>,
    pub excluded: Vec<ExcludedCategory>,
}

/// Signed `(r - s) / r` per category, in the reference's category order.
pub fn relative_errors(reference: &MarginalTable, sample: &MarginalTable) -> Result<VariableErrors> {
    if reference.variable != sample.variable {
        return Err(Error::Schema(format!(
            "comparing variable {} with {}",
            reference.variable, sample.variable
        )));
    }
    let r = reference.values()?;
    let s = sample.values()?;
    let rk: BTreeSet<&str> = r.keys().copied().collect();
    let sk: BTreeSet<&str> = s.keys().copied().collect();
    if rk != sk {
        let only_ref: Vec<_> = rk.difference(&sk).collect();
        let only_sample: Vec<_> = sk.difference(&rk).collect();
        return Err(Error::Schema(format!(
            "variable {}: categories only in reference {:?}, only in sample {:?}",
            reference.variable, only_ref, only_sample
        )));
    }
    let mut out = VariableErrors {
        included: Vec::new(),
        excluded: Vec::new(),
    };
    for c in &reference.categories {
        let sv = s[c.label.as_str()];
        if c.value == 0.0 {
            out.excluded.push(ExcludedCategory {
                variable: reference.variable.clone(),
                category: c.label.clone(),
                sample: sv,
                reason: if sv > 0.0 { "uncoverable" } else { "empty" }.into(),
            });
            continue;
        }
        out.included.push(CategoryError {
            variable: reference.variable.clone(),
            category: c.label.clone(),
            reference: c.value,
            sample: sv,
            relative_error: (c.value - sv) / c.value,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RmseMode {
    /// Category means within variables, then the mean over variables.
    #[default]
    Nested,
    /// One mean over every category of every variable.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativenessReport {
    pub geography: Option<String>,
    pub mode: RmseMode,
    /// `expanded` when sample values carry expansion weights.
    pub weighting: String,
    pub per_category: Vec<CategoryError>,
    pub per_variable_rmse: BTreeMap<String, f64>,
    pub overall_percent_rmse: f64,
    pub excluded: Vec<ExcludedCategory>,
    pub warnings: Vec<String>,
}

fn pair_by_variable<'a>(
    references: &'a [MarginalTable],
    samples: &'a [MarginalTable],
) -> Result<BTreeMap<&'a str, (&'a MarginalTable, &'a MarginalTable)>> {
    let mut smap: HashMap<&str, &MarginalTable> = HashMap::new();
    for s in samples {
        if smap.insert(s.variable.as_str(), s).is_some() {
            return Err(Error::Schema(format!("duplicate sample variable {}", s.variable)));
        }
    }
    let mut pairs = BTreeMap::new();
    for r in references {
        let s = smap.remove(r.variable.as_str()).ok_or_else(|| {
            Error::Schema(format!("variable {} has no sample marginal", r.variable))
        })?;
        if pairs.insert(r.variable.as_str(), (r, s)).is_some() {
            return Err(Error::Schema(format!("duplicate reference variable {}", r.variable)));
        }
    }
    if !smap.is_empty() {
        let mut extra: Vec<_> = smap.keys().collect();
        extra.sort();
        return Err(Error::Schema(format!("sample variables without reference: {extra:?}")));
    }
    Ok(pairs)
}

fn mean_sq(errs: &[CategoryError]) -> f64 {
    errs.iter().map(|e| e.relative_error * e.relative_error).sum::<f64>() / errs.len() as f64
}

/// Full report for paired variable lists. Variables are processed in name
/// order so the result does not depend on input order.
pub fn rmse_report(
    references: &[MarginalTable],
    samples: &[MarginalTable],
    mode: RmseMode,
) -> Result<RepresentativenessReport> {
    let pairs = pair_by_variable(references, samples)?;
    let mut report = RepresentativenessReport {
        geography: None,
        mode,
        weighting: "unweighted".into(),
        per_category: Vec::new(),
        per_variable_rmse: BTreeMap::new(),
        overall_percent_rmse: 0.0,
        excluded: Vec::new(),
        warnings: Vec::new(),
    };
    let mut variable_means = Vec::new();
    for (name, (r, s)) in pairs {
        let ve = relative_errors(r, s)?;
        if ve.included.is_empty() {
            report
                .warnings
                .push(format!("variable {name} has no category with a positive reference; skipped"));
        } else {
            let m = mean_sq(&ve.included);
            report.per_variable_rmse.insert(name.to_string(), m.sqrt() * 100.0);
            variable_means.push(m);
        }
        report.per_category.extend(ve.included);
        report.excluded.extend(ve.excluded);
    }
    if !report.excluded.is_empty() {
        report.warnings.push(format!(
            "{} categories excluded for zero reference",
            report.excluded.len()
        ));
    }
    if variable_means.is_empty() {
        return Err(Error::Degenerate("no variable has an includable category".into()));
    }
    let ms = match mode {
        RmseMode::Nested => variable_means.iter().sum::<f64>() / variable_means.len() as f64,
        RmseMode::Pooled => mean_sq(&report.per_category),
    };
    report.overall_percent_rmse = ms.sqrt() * 100.0;
    Ok(report)
}

/// Percent RMSE over paired variable lists.
pub fn percent_rmse(references: &[MarginalTable], samples: &[MarginalTable]) -> Result<f64> {
    Ok(rmse_report(references, samples, RmseMode::Nested)?.overall_percent_rmse)
}

/// Variables the audit can build from household and trip microdata.
pub const AUDIT_VARIABLES: &[&str] = &["household_size", "vehicles", "income", "mode"];

/// Numeric income band parsed from a label: `<b`, `a-b` or `a+`, half-open.
fn income_band(label: &str) -> Option<(f64, f64)> {
    let l = label.trim();
    if let Some(hi) = l.strip_prefix('<') {
        return Some((f64::NEG_INFINITY, hi.parse().ok()?));
    }
    if let Some(lo) = l.strip_suffix('+') {
        return Some((lo.parse().ok()?, f64::INFINITY));
    }
    let (lo, hi) = l.split_once('-')?;
    Some((lo.parse().ok()?, hi.parse().ok()?))
}

fn income_label(h: &HouseholdRecord, bands: &[(String, (f64, f64))]) -> String {
    if let Ok(x) = h.income_class.trim().parse::<f64>() {
        if let Some((l, _)) = bands.iter().find(|(_, (lo, hi))| x >= *lo && x < *hi) {
            return l.clone();
        }
    }
    h.income_class.clone()
}

fn size_class(size: u32) -> &'static str {
    match size {
        0 | 1 => "1",
        2 => "2",
        3 => "3",
        4 | 5 => "4-5",
        _ => "6+",
    }
}

fn vehicle_class(v: u32) -> &'static str {
    match v {
        0 => "0",
        1 => "1",
        2 => "2",
        _ => "3+",
    }
}

/// Sample marginals for `variable` restricted to the reference's labels.
/// Returns `None` when the microdata cannot produce the variable.
pub fn sample_marginal(
    variable: &str,
    labels: &[String],
    households: &[&HouseholdRecord],
    trips: &[&TripRecord],
) -> Option<MarginalTable> {
    let mut tally: HashMap<String, f64> = HashMap::new();
    match variable {
        "household_size" => households
            .iter()
            .for_each(|h| *tally.entry(size_class(h.size).into()).or_default() += h.weight),
        "vehicles" => households
            .iter()
            .for_each(|h| *tally.entry(vehicle_class(h.vehicles).into()).or_default() += h.weight),
        "income" => {
            // numeric incomes fall into banded labels when every label is a band
            let bands: Vec<(String, (f64, f64))> = labels
                .iter()
                .map_while(|l| income_band(l).map(|b| (l.clone(), b)))
                .collect();
            let bands = if bands.len() == labels.len() { bands } else { Vec::new() };
            households
                .iter()
                .for_each(|h| *tally.entry(income_label(h, &bands)).or_default() += h.weight)
        }
        "mode" => trips
            .iter()
            .for_each(|t| *tally.entry(t.mode.as_str().into()).or_default() += t.weight),
        _ => return None,
    }
    Some(MarginalTable {
        variable: variable.to_string(),
        categories: labels
            .iter()
            .map(|l| Category {
                label: l.clone(),
                value: tally.get(l).copied().unwrap_or(0.0),
            })
            .collect(),
    })
}

/// Reference marginals keyed by geography; `None` means the whole study
/// area.
pub type ReferenceSet = BTreeMap<Option<String>, Vec<MarginalTable>>;

/// Audit microdata against reference marginals, one report per geography.
/// A geography matches households by `region`. Reference variables the
/// microdata cannot produce are skipped with a warning.
pub fn audit(
    households: &[HouseholdRecord],
    trips: &[TripRecord],
    references: &ReferenceSet,
    geography: Option<&str>,
    mode: RmseMode,
) -> Result<Vec<RepresentativenessReport>> {
    let weighted = households.iter().any(|h| h.weight != 1.0) || trips.iter().any(|t| t.weight != 1.0);
    let mut reports = Vec::new();
    for (geo, tables) in references {
        if let (Some(want), Some(have)) = (geography, geo.as_deref()) {
            if want != have {
                continue;
            }
        }
        let hs: Vec<&HouseholdRecord> = households
            .iter()
            .filter(|h| geo.as_ref().is_none_or(|g| &h.region == g))
            .collect();
        let ids: BTreeSet<&str> = hs.iter().map(|h| h.household_id.as_str()).collect();
        let ts: Vec<&TripRecord> = trips
            .iter()
            .filter(|t| ids.contains(t.household_id.as_str()))
            .collect();
        let mut warnings = Vec::new();
        let mut refs = Vec::new();
        let mut samples = Vec::new();
        for r in tables {
            let labels: Vec<String> = r.categories.iter().map(|c| c.label.clone()).collect();
            match sample_marginal(&r.variable, &labels, &hs, &ts) {
                Some(s) => {
                    refs.push(r.clone());
                    samples.push(s);
                }
                None => warnings.push(format!(
                    "variable {} not available in microdata; skipped",
                    r.variable
                )),
            }
        }
        let mut report = rmse_report(&refs, &samples, mode)?;
        report.geography = geo.clone();
        report.weighting = if weighted { "expanded" } else { "unweighted" }.into();
        warnings.append(&mut report.warnings);
        report.warnings = warnings;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(Error::Validation(match geography {
            Some(g) => format!("no reference marginals for geography {g}"),
            None => "no reference marginals".into(),
        }));
    }
    Ok(reports)
}

/// Tertile bands when every income is numeric, otherwise the distinct
/// labels in sorted order.
fn income_labels(households: &[HouseholdRecord]) -> Vec<String> {
    let numeric: Option<Vec<f64>> = households
        .iter()
        .map(|h| h.income_class.trim().parse::<f64>().ok())
        .collect();
    if let Some(mut v) = numeric.filter(|v| !v.is_empty()) {
        v.sort_by(f64::total_cmp);
        let (a, b) = (v[v.len() / 3], v[2 * v.len() / 3]);
        if a < b {
            return vec![format!("<{a}"), format!("{a}-{b}"), format!("{b}+")];
        }
    }
    let set: BTreeSet<String> = households.iter().map(|h| h.income_class.clone()).collect();
    set.into_iter().collect()
}

/// Marginals of full microdata, the shape the audit compares against.
pub fn marginals_from_microdata(
    households: &[HouseholdRecord],
    trips: &[TripRecord],
) -> Vec<MarginalTable> {
    let hs: Vec<&HouseholdRecord> = households.iter().collect();
    let ts: Vec<&TripRecord> = trips.iter().collect();
    let labels = |v: &str| -> Vec<String> {
        match v {
            "household_size" => ["1", "2", "3", "4-5", "6+"].map(String::from).to_vec(),
            "vehicles" => ["0", "1", "2", "3+"].map(String::from).to_vec(),
            "mode" => crate::records::Mode::ALL.iter().map(|m| m.to_string()).collect(),
            _ => income_labels(households),
        }
    };
    AUDIT_VARIABLES
        .iter()
        .filter_map(|v| sample_marginal(v, &labels(v), &hs, &ts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_relative_error() {
        let r = MarginalTable::new("x", &[("a", 100.0)]);
        let s = MarginalTable::new("x", &[("a", 80.0)]);
        let e = relative_errors(&r, &s).unwrap();
        assert!((e.included[0].relative_error - 0.2).abs() < 1e-15);
        assert_eq!(percent_rmse(&[r], &[s]).unwrap(), 20.0);
    }

    #[test]
    fn signed_errors() {
        let r = MarginalTable::new("x", &[("a", 60.0), ("b", 40.0)]);
        let s = MarginalTable::new("x", &[("a", 50.0), ("b", 50.0)]);
        let e = relative_errors(&r, &s).unwrap();
        assert!((e.included[0].relative_error - 1.0 / 6.0).abs() < 1e-15);
        assert!((e.included[1].relative_error + 0.25).abs() < 1e-15);
    }

    #[test]
    fn perfect_agreement_is_zero() {
        let r = MarginalTable::new("x", &[("a", 60.0), ("b", 40.0)]);
        assert_eq!(percent_rmse(std::slice::from_ref(&r), std::slice::from_ref(&r)).unwrap(), 0.0);
    }

    #[test]
    fn two_variable_example() {
        let refs = [
            MarginalTable::new("A", &[("a", 60.0), ("b", 40.0)]),
            MarginalTable::new("B", &[("c", 10.0)]),
        ];
        let samples = [
            MarginalTable::new("A", &[("a", 50.0), ("b", 50.0)]),
            MarginalTable::new("B", &[("c", 12.0)]),
        ];
        let v = percent_rmse(&refs, &samples).unwrap();
        let expected = (((1.0f64 / 36.0 + 0.0625) / 2.0 + 0.04) / 2.0).sqrt() * 100.0;
        assert!((v - expected).abs() < 1e-12, "{v}");
        assert!((v - 20.632_364_005_233_246).abs() < 1e-9, "{v}");
    }

    #[test]
    fn mismatched_categories() {
        let r = MarginalTable::new("x", &[("a", 1.0), ("b", 1.0)]);
        let s = MarginalTable::new("x", &[("a", 1.0), ("c", 1.0)]);
        let err = relative_errors(&r, &s).unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.contains("\"b\"") && m.contains("\"c\"")));
    }

    #[test]
    fn zero_reference_excluded() {
        let r = MarginalTable::new("x", &[("a", 100.0), ("b", 0.0)]);
        let s = MarginalTable::new("x", &[("a", 90.0), ("b", 5.0)]);
        let rep = rmse_report(&[r], &[s], RmseMode::Nested).unwrap();
        assert_eq!(rep.excluded.len(), 1);
        assert_eq!(rep.excluded[0].reason, "uncoverable");
        assert!((rep.overall_percent_rmse - 10.0).abs() < 1e-12);
    }

    #[test]
    fn pooled_differs_from_nested() {
        let refs = [
            MarginalTable::new("A", &[("a", 60.0), ("b", 40.0)]),
            MarginalTable::new("B", &[("c", 10.0)]),
        ];
        let samples = [
            MarginalTable::new("A", &[("a", 50.0), ("b", 50.0)]),
            MarginalTable::new("B", &[("c", 12.0)]),
        ];
        let p = rmse_report(&refs, &samples, RmseMode::Pooled).unwrap();
        let expected = ((1.0f64 / 36.0 + 0.0625 + 0.04) / 3.0).sqrt() * 100.0;
        assert!((p.overall_percent_rmse - expected).abs() < 1e-12);
    }

    #[test]
    fn unpaired_variables_rejected() {
        let r = MarginalTable::new("x", &[("a", 1.0)]);
        let s = MarginalTable::new("y", &[("a", 1.0)]);
        assert!(matches!(percent_rmse(&[r], &[s]), Err(Error::Schema(_))));
    }

    #[test]
    fn income_bands_bin_numeric_incomes() {
        assert_eq!(income_band("<40"), Some((f64::NEG_INFINITY, 40.0)));
        assert_eq!(income_band("40-90"), Some((40.0, 90.0)));
        assert_eq!(income_band("90+"), Some((90.0, f64::INFINITY)));
        assert_eq!(income_band("high"), None);
        let hh: Vec<HouseholdRecord> = [10.0, 50.0, 95.0, 200.0]
            .iter()
            .enumerate()
            .map(|(i, x)| HouseholdRecord {
                household_id: i.to_string(),
                region: "r".into(),
                zone: "z".into(),
                size: 1,
                income_class: x.to_string(),
                vehicles: 0,
                weight: 1.0,
                trip_count: 0,
            })
            .collect();
        let refs: Vec<&HouseholdRecord> = hh.iter().collect();
        let labels: Vec<String> = ["<40", "40-90", "90+"].map(String::from).to_vec();
        let m = sample_marginal("income", &labels, &refs, &[]).unwrap();
        let v: Vec<f64> = m.categories.iter().map(|c| c.value).collect();
        assert_eq!(v, vec![1.0, 1.0, 2.0]);
        assert_eq!(income_labels(&hh).len(), 3);
    }
}
