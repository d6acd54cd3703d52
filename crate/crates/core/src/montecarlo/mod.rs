//! Monte Carlo check of the analytic sampling rates.
//!
//! Each replication draws a simple random sample of households, expands
//! their trips by `H / n`, and compares the selected O-D cells with the
//! population totals. Replication `r` uses a ChaCha8 stream `r` keyed by the
//! master seed, so results do not depend on thread count.

mod synth;

pub use synth::{synth_population, Population, SynthConfig};

use std::collections::HashMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::od::{Partition, Slice};
use crate::records::{Mode, Period, Purpose};
use crate::stats::{interchange_rate, SizeSpec};

/// Which O-D cells a simulation tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSelector {
    pub partition: Partition,
    #[serde(default)]
    pub slice: Slice,
    /// Explicit (origin, destination) labels; `None` selects every cell
    /// holding at least `min_total` trips.
    #[serde(default)]
    pub cells: Option<Vec<(String, String)>>,
    #[serde(default = "one")]
    pub min_total: f64,
}

fn one() -> f64 {
    1.0
}

impl CellSelector {
    pub fn all(partition: Partition, slice: Slice) -> Self {
        Self {
            partition,
            slice,
            cells: None,
            min_total: 1.0,
        }
    }

    pub fn cell(partition: Partition, slice: Slice, origin: &str, destination: &str) -> Self {
        Self {
            partition,
            slice,
            cells: Some(vec![(origin.to_string(), destination.to_string())]),
            min_total: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub origin: String,
    pub destination: String,
    pub true_total: f64,
    pub mean_estimate: f64,
    pub std_estimate: f64,
    /// Household-clustered trip CV: the value that makes the analytic rate
    /// exact for household sampling of this cell.
    pub effective_cv: f64,
    pub analytic_rate: f64,
    pub expected_sample_trips: f64,
    pub empirical_coverage: f64,
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub seed: u64,
    pub replications: usize,
    pub rate: f64,
    pub sample_size: usize,
    pub population_households: usize,
    pub spec: SizeSpec,
    pub cells: Vec<CellResult>,
    /// Share of (cell, replication) pairs within the margin of error.
    pub coverage: f64,
    /// Mean over replications of the per-replication MAPE, in percent.
    pub mape: f64,
    pub warnings: Vec<String>,
}

/// Per-household trip counts in the selected cells, plus cell labels and
/// population totals.
struct Tabulation {
    labels: Vec<(String, String)>,
    totals: Vec<f64>,
    contributions: Vec<Vec<(usize, f64)>>,
}

fn tabulate(pop: &Population, sel: &CellSelector) -> Result<Tabulation> {
    let idx = sel.partition.region_index();
    let n_reg = sel.partition.regions.len();
    let hh: HashMap<&str, usize> = pop
        .households
        .iter()
        .enumerate()
        .map(|(i, h)| (h.household_id.as_str(), i))
        .collect();
    let lookup = |z: &str| {
        idx.get(z)
            .copied()
            .ok_or_else(|| Error::Validation(format!("zone '{z}' is not mapped to a region")))
    };

    let mut per_hh: Vec<HashMap<usize, f64>> = vec![HashMap::new(); pop.households.len()];
    let mut full = vec![0.0; n_reg * n_reg];
    for t in pop.trips.iter().filter(|t| sel.slice.matches(t)) {
        let h = *hh.get(t.household_id.as_str()).ok_or_else(|| {
            Error::Validation(format!("trip references unknown household {}", t.household_id))
        })?;
        let cell = lookup(&t.origin_zone)? * n_reg + lookup(&t.destination_zone)?;
        full[cell] += 1.0;
        *per_hh[h].entry(cell).or_default() += 1.0;
    }

    let chosen: Vec<usize> = match &sel.cells {
        Some(list) => list
            .iter()
            .map(|(o, d)| {
                let pos = |l: &str| {
                    sel.partition
                        .regions
                        .iter()
                        .position(|r| r == l)
                        .ok_or_else(|| Error::Validation(format!("unknown region '{l}'")))
                };
                let c = pos(o)? * n_reg + pos(d)?;
                if full[c] <= 0.0 {
                    return Err(Error::Validation(format!("cell {o} -> {d} holds no trips")));
                }
                Ok(c)
            })
            .collect::<Result<_>>()?,
        None => (0..full.len())
            .filter(|&c| full[c] >= sel.min_total.max(1.0))
            .collect(),
    };
    if chosen.is_empty() {
        return Err(Error::Degenerate("selector matches no populated cell".into()));
    }
    let slot: HashMap<usize, usize> = chosen.iter().enumerate().map(|(s, &c)| (c, s)).collect();
    let contributions = per_hh
        .into_iter()
        .map(|m| {
            let mut v: Vec<(usize, f64)> = m
                .into_iter()
                .filter_map(|(c, k)| slot.get(&c).map(|&s| (s, k)))
                .collect();
            v.sort_by_key(|p| p.0);
            v
        })
        .collect();
    let regions = &sel.partition.regions;
    Ok(Tabulation {
        labels: chosen
            .iter()
            .map(|&c| (regions[c / n_reg].clone(), regions[c % n_reg].clone()))
            .collect(),
        totals: chosen.iter().map(|&c| full[c]).collect(),
        contributions,
    })
}

fn replicate(tab: &Tabulation, h_count: usize, n: usize, seed: u64, rep: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    let expansion = h_count as f64 / n as f64;
    let mut est = vec![0.0; tab.totals.len()];
    for h in index::sample(&mut rng, h_count, n) {
        for &(s, k) in &tab.contributions[h] {
            est[s] += k;
        }
    }
    est.iter_mut().for_each(|v| *v *= expansion);
    est
}

/// Sample `rate` of households `replications` times and score the selected
/// cells against the margin of error in `spec`.
pub fn simulate_sampling(
    pop: &Population,
    rate: f64,
    replications: usize,
    spec: &SizeSpec,
    selector: &CellSelector,
    seed: u64,
) -> Result<SimulationResult> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Domain(format!("rate must lie in (0, 1], got {rate}")));
    }
    if replications < 1 {
        return Err(Error::Domain("replications must be at least 1".into()));
    }
    let h_count = pop.households.len();
    let tab = tabulate(pop, selector)?;
    let n = ((rate * h_count as f64).round() as usize).clamp(1, h_count);
    let e = spec.margin_of_error();

    let estimates: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|r| replicate(&tab, h_count, n, seed, r))
        .collect();

    let reps = replications as f64;
    let mut warnings = Vec::new();
    let mut cells = Vec::with_capacity(tab.totals.len());
    for (s, ((o, d), &y)) in tab.labels.iter().zip(&tab.totals).enumerate() {
        let vals: Vec<f64> = estimates.iter().map(|est| est[s]).collect();
        let mean = vals.iter().sum::<f64>() / reps;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / reps;
        let rel: Vec<f64> = vals.iter().map(|v| (v - y).abs() / y).collect();
        let covered = rel.iter().filter(|r| **r <= e + 1e-12).count();

        // S² over all households, zeros included
        let (mut sum, mut sq) = (0.0, 0.0);
        for c in &tab.contributions {
            if let Some(&(_, k)) = c.iter().find(|p| p.0 == s) {
                sum += k;
                sq += k * k;
            }
        }
        let hf = h_count as f64;
        let s2 = if h_count > 1 {
            (sq - sum * sum / hf) / (hf - 1.0)
        } else {
            0.0
        };
        let effective_cv = (hf * s2 / y).max(0.0).sqrt();
        let analytic_rate = if effective_cv > 0.0 {
            interchange_rate(y.round() as u64, effective_cv, spec)?
        } else {
            0.0
        };
        let expected = y * n as f64 / hf;
        if expected < 1.0 {
            warnings.push(format!(
                "cell {o} -> {d}: expected {expected:.3} sampled trips per replication"
            ));
        }
        cells.push(CellResult {
            origin: o.clone(),
            destination: d.clone(),
            true_total: y,
            mean_estimate: mean,
            std_estimate: var.sqrt(),
            effective_cv,
            analytic_rate,
            expected_sample_trips: expected,
            empirical_coverage: covered as f64 / reps,
            mape: rel.iter().sum::<f64>() / reps * 100.0,
        });
    }
    let k = cells.len() as f64;
    Ok(SimulationResult {
        seed,
        replications,
        rate,
        sample_size: n,
        population_households: h_count,
        spec: *spec,
        coverage: cells.iter().map(|c| c.empirical_coverage).sum::<f64>() / k,
        mape: cells.iter().map(|c| c.mape).sum::<f64>() / k,
        cells,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub rate: f64,
    pub sample_size: usize,
    pub coverage: f64,
    pub mape: f64,
}

/// [`simulate_sampling`] at each rate. Rate `i` uses master seed
/// `seed + i`.
pub fn coverage_curve(
    pop: &Population,
    spec: &SizeSpec,
    rates: &[f64],
    replications: usize,
    selector: &CellSelector,
    seed: u64,
) -> Result<Vec<CoveragePoint>> {
    rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            let r = simulate_sampling(pop, rate, replications, spec, selector, seed.wrapping_add(i as u64))?;
            Ok(CoveragePoint {
                rate,
                sample_size: r.sample_size,
                coverage: r.coverage,
                mape: r.mape,
            })
        })
        .collect()
}

/// Population for the MAPE experiment: large, few regions, and a selector
/// for weekday peak auto commuting between regions.
pub fn commuter_auto_peak(seed: u64) -> (SynthConfig, Slice) {
    let config = SynthConfig {
        n_households: 200_000,
        n_zones: 24,
        n_regions: 4,
        heterogeneity: 0.8,
        mean_trip_rate: 6.0,
        modal_split: [0.70, 0.15, 0.11, 0.04],
        purpose_split: [0.26, 0.38, 0.08, 0.16, 0.12],
        peak_share: 0.5,
        expansion_weight: 1.0,
        seed,
    };
    let slice = Slice {
        period: Some(Period::Peak),
        mode: Some(Mode::Auto),
        purpose: Some(Purpose::Work),
    };
    (config, slice)
}

/// Population for the coverage experiment: CV of household trip counts
/// near 1 and zone cells of roughly a thousand trips.
pub fn coverage_population(seed: u64) -> SynthConfig {
    SynthConfig {
        n_households: 40_000,
        n_zones: 15,
        n_regions: 3,
        heterogeneity: 1.0,
        mean_trip_rate: 6.0,
        modal_split: [0.70, 0.15, 0.11, 0.04],
        purpose_split: [0.24, 0.38, 0.08, 0.18, 0.12],
        peak_share: 0.45,
        expansion_weight: 1.0,
        seed,
    }
}

/// The zone-level cell whose total is closest to `target` trips.
pub fn cell_nearest(pop: &Population, slice: Slice, target: f64) -> Result<CellSelector> {
    let part = pop.zone_partition();
    let m = crate::od::build_od_matrix(&pop.trips, &part, slice)?;
    let (i, j, _) = m
        .available_cells()
        .filter(|c| c.2 > 0.0)
        .min_by(|a, b| (a.2 - target).abs().total_cmp(&(b.2 - target).abs()))
        .ok_or_else(|| Error::Degenerate("no populated cell".into()))?;
    let (o, d) = (m.labels[i].clone(), m.labels[j].clone());
    Ok(CellSelector::cell(part, slice, &o, &d))
}
