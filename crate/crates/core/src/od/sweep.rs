//! Household sampling rate needed at each trip disaggregation level.
//!
//! For a level (a subset of time, mode and purpose), every category
//! combination acts as a stratum whose values are the households' trip
//! counts in that combination. Stratum frequency is the combination's share
//! of all trips; the overall mean is the mean count per household per
//! combination. The stratified allocator then sizes the sample.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{Dimension, HouseholdRecord, TripRecord};
use crate::smith::{plan_from_table, SmithOptions, StratumInput, StratumTable};
use crate::stats::SizeSpec;

pub const SWEEP_LEVELS: [(&str, &[Dimension]); 7] = [
    ("by mode", &[Dimension::Mode]),
    ("by purpose", &[Dimension::Purpose]),
    ("by time", &[Dimension::Period]),
    ("by time & mode", &[Dimension::Period, Dimension::Mode]),
    ("by time & purpose", &[Dimension::Period, Dimension::Purpose]),
    ("by purpose & mode", &[Dimension::Purpose, Dimension::Mode]),
    (
        "by time, purpose & mode",
        &[Dimension::Period, Dimension::Purpose, Dimension::Mode],
    ),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: String,
    pub dimensions: Vec<Dimension>,
    pub categories: usize,
    pub c_star: Option<f64>,
    pub cv_max: Option<f64>,
    #[serde(rename = "F")]
    pub initial_size: Option<f64>,
    pub rho: Option<f64>,
    pub final_total_rounded: Option<u64>,
    /// Required share of households.
    pub sampling_rate: Option<f64>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

fn combos(dims: &[Dimension]) -> Vec<Vec<&'static str>> {
    dims.iter().fold(vec![Vec::new()], |acc, d| {
        acc.into_iter()
            .flat_map(|prefix| {
                d.categories().into_iter().map(move |c| {
                    let mut k = prefix.clone();
                    k.push(c);
                    k
                })
            })
            .collect()
    })
}

fn level_table(
    dims: &[Dimension],
    households: &[HouseholdRecord],
    hh_trips: &[Vec<&TripRecord>],
    opts: SmithOptions,
    warnings: &mut Vec<String>,
) -> Result<StratumTable> {
    let mut counts: BTreeMap<Vec<&'static str>, Vec<f64>> = BTreeMap::new();
    for (h, trips) in hh_trips.iter().enumerate() {
        for t in trips {
            let key: Vec<&'static str> = dims.iter().map(|d| t.category(*d)).collect();
            counts
                .entry(key)
                .or_insert_with(|| vec![0.0; households.len()])[h] += 1.0;
        }
    }
    let all = combos(dims);
    let empty: Vec<String> = all
        .iter()
        .filter(|k| !counts.contains_key(*k))
        .map(|k| k.join("/"))
        .collect();
    if !empty.is_empty() {
        warnings.push(format!("dropped {} empty combinations: {}", empty.len(), empty.join(", ")));
    }
    let total_trips: f64 = counts.values().flatten().sum();
    if counts.is_empty() || total_trips == 0.0 {
        return Err(Error::Degenerate("no trips to classify".into()));
    }
    let k = counts.len() as f64;
    let overall = total_trips / (households.len() as f64 * k);
    let inputs = all
        .into_iter()
        .filter_map(|key| {
            counts.remove(&key).map(|values| StratumInput {
                key: key.iter().map(|s| s.to_string()).collect(),
                frequency: values.iter().sum::<f64>() / total_trips,
                values,
            })
        })
        .collect();
    StratumTable::from_groups(
        dims.iter().map(|d| d.label().to_string()).collect(),
        inputs,
        overall,
        opts,
    )
}

/// One row per nonempty subset of {time, mode, purpose}, in the fixed
/// [`SWEEP_LEVELS`] order. Degenerate levels carry an `error` instead of a
/// rate.
pub fn disaggregation_sweep(
    households: &[HouseholdRecord],
    trips: &[TripRecord],
    spec: &SizeSpec,
    opts: SmithOptions,
) -> Result<Vec<SweepRow>> {
    if households.is_empty() {
        return Err(Error::Validation("no households".into()));
    }
    let index: HashMap<&str, usize> = households
        .iter()
        .enumerate()
        .map(|(i, h)| (h.household_id.as_str(), i))
        .collect();
    let mut hh_trips: Vec<Vec<&TripRecord>> = vec![Vec::new(); households.len()];
    let mut orphans = 0usize;
    for t in trips {
        match index.get(t.household_id.as_str()) {
            Some(&i) => hh_trips[i].push(t),
            None => orphans += 1,
        }
    }
    let population: f64 = households.iter().map(|h| h.weight).sum();

    let rows = SWEEP_LEVELS
        .par_iter()
        .map(|(name, dims)| {
            let mut warnings = Vec::new();
            if orphans > 0 {
                warnings.push(format!("{orphans} trips reference unknown households; ignored"));
            }
            let result = level_table(dims, households, &hh_trips, opts, &mut warnings)
                .and_then(|t| plan_from_table(&t, spec, population).map(|p| (t, p)));
            let mut row = SweepRow {
                level: name.to_string(),
                dimensions: dims.to_vec(),
                categories: 0,
                c_star: None,
                cv_max: None,
                initial_size: None,
                rho: None,
                final_total_rounded: None,
                sampling_rate: None,
                error: None,
                warnings,
            };
            match result {
                Ok((table, plan)) => {
                    row.categories = table.strata.len();
                    row.c_star = Some(plan.c_star);
                    row.cv_max = Some(table.max_cv());
                    row.initial_size = Some(plan.initial_size);
                    row.rho = Some(plan.rho);
                    row.final_total_rounded = Some(plan.final_total_rounded);
                    row.sampling_rate = Some(plan.sampling_rate);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_levels_cover_all_subsets() {
        assert_eq!(SWEEP_LEVELS.len(), 7);
        let sizes: Vec<usize> = SWEEP_LEVELS
            .iter()
            .map(|(_, d)| combos(d).len())
            .collect();
        assert_eq!(sizes, vec![4, 5, 2, 8, 10, 20, 40]);
    }
}
