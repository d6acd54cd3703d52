//! Deterministic synthetic household and trip populations.
//!
//! Household trip counts are rounded log-normal draws whose log-scale is
//! tuned by bisection until the realized coefficient of variation matches
//! the heterogeneity target. Part of the log-rate variance comes from a
//! household attribute score (size and vehicles), so strata differ in mean
//! as well as spread.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::od::Partition;
use crate::records::{HouseholdRecord, Mode, Period, Purpose, TripRecord};
use crate::stats::coefficient_of_variation;

/// Share of log-rate variance explained by household attributes.
const ATTRIBUTE_LOADING: f64 = 0.6;
/// Probability that a trip uses the household's habitual mode.
const MODE_PERSISTENCE: f64 = 0.5;
const CV_TOLERANCE: f64 = 0.10;

fn default_regions() -> usize {
    1
}
fn default_mean_trip_rate() -> f64 {
    6.0
}
fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_households: usize,
    pub n_zones: usize,
    #[serde(default = "default_regions")]
    pub n_regions: usize,
    /// Target CV of household trip counts.
    pub heterogeneity: f64,
    #[serde(default = "default_mean_trip_rate")]
    pub mean_trip_rate: f64,
    /// auto, transit, active, other.
    pub modal_split: [f64; 4],
    /// work, home, school, recreation, other.
    pub purpose_split: [f64; 5],
    pub peak_share: f64,
    /// Expansion weight written on every household and trip.
    #[serde(default = "default_weight")]
    pub expansion_weight: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Mid-sized city used for the bundled fixture.
    pub fn small_city(seed: u64) -> Self {
        Self {
            n_households: 8_000,
            n_zones: 12,
            n_regions: 3,
            heterogeneity: 0.7,
            mean_trip_rate: 6.0,
            modal_split: [0.72, 0.14, 0.10, 0.04],
            purpose_split: [0.22, 0.40, 0.08, 0.18, 0.12],
            peak_share: 0.45,
            expansion_weight: 20.0,
            seed,
        }
    }

    /// Large city with strongly heterogeneous travel and skewed mode, purpose
    /// and period splits.
    pub fn big_city(seed: u64) -> Self {
        Self {
            n_households: 8_000,
            n_zones: 30,
            n_regions: 6,
            heterogeneity: 1.2,
            mean_trip_rate: 6.0,
            modal_split: [0.78, 0.14, 0.06, 0.02],
            purpose_split: [0.20, 0.50, 0.05, 0.17, 0.08],
            peak_share: 0.30,
            expansion_weight: 130.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_households == 0 || self.n_zones == 0 {
            return bad("n_households and n_zones must be positive".into());
        }
        if self.n_regions == 0 || self.n_regions > self.n_zones {
            return bad(format!("n_regions must lie in 1..={}", self.n_zones));
        }
        if !(self.heterogeneity >= 0.0 && self.heterogeneity.is_finite()) {
            return bad(format!("heterogeneity must be >= 0, got {}", self.heterogeneity));
        }
        if !(self.mean_trip_rate > 0.0) && self.heterogeneity > 0.0 {
            return bad("a positive heterogeneity needs a positive mean trip rate".into());
        }
        if !(self.mean_trip_rate >= 0.0) {
            return bad("mean trip rate must be >= 0".into());
        }
        for (name, split) in [
            ("modal_split", &self.modal_split[..]),
            ("purpose_split", &self.purpose_split[..]),
        ] {
            if split.iter().any(|v| !(*v >= 0.0)) || (split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("{name} must be nonnegative and sum to 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.peak_share) {
            return bad("peak_share must lie in [0, 1]".into());
        }
        if !(self.expansion_weight > 0.0) {
            return bad("expansion_weight must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub config: SynthConfig,
    pub households: Vec<HouseholdRecord>,
    pub trips: Vec<TripRecord>,
    pub zones: Vec<String>,
    /// Zones grouped into `n_regions` contiguous regions.
    pub regions: Partition,
    pub realized_cv: f64,
}

impl Population {
    pub fn zone_partition(&self) -> Partition {
        Partition::identity(&self.zones)
    }
}

fn zone_name(z: usize) -> String {
    format!("Z{:03}", z + 1)
}

fn region_name(r: usize) -> String {
    format!("R{}", r + 1)
}

fn rounded_counts(scores: &[f64], noise: &[f64], mean: f64, sigma: f64) -> Vec<u32> {
    let w = ATTRIBUTE_LOADING;
    let v = (1.0 - w * w).sqrt();
    scores
        .iter()
        .zip(noise)
        .map(|(a, z)| {
            let x = sigma * (w * a + v * z) - 0.5 * sigma * sigma;
            (mean * x.exp()).round() as u32
        })
        .collect()
}

fn counts_cv(counts: &[u32]) -> f64 {
    let v: Vec<f64> = counts.iter().map(|&c| f64::from(c)).collect();
    coefficient_of_variation(&v).unwrap_or(0.0)
}

/// Log-scale parameter whose rounded counts hit `target` CV.
fn tune_sigma(scores: &[f64], noise: &[f64], mean: f64, target: f64) -> f64 {
    if target == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 4.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if counts_cv(&rounded_counts(scores, noise, mean, mid)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const SIZE_WEIGHTS: [f64; 6] = [0.27, 0.31, 0.16, 0.15, 0.06, 0.05];
const VEHICLE_WEIGHTS: [[f64; 4]; 3] = [
    [0.35, 0.50, 0.13, 0.02],
    [0.15, 0.45, 0.33, 0.07],
    [0.08, 0.32, 0.42, 0.18],
];

fn depart_time(rng: &mut ChaCha8Rng, peak: bool) -> u16 {
    // minutes since midnight within the peak windows (480 min) or the rest (960 min)
    let minute = if peak {
        let m = rng.random_range(0..480u16);
        if m < 240 { 360 + m } else { 900 + m - 240 }
    } else {
        let m = rng.random_range(0..960u16);
        match m {
            0..360 => m,
            360..660 => 600 + m - 360,
            _ => 1140 + m - 660,
        }
    };
    (minute / 60) * 100 + minute % 60
}

/// Generate a population. Identical configs give identical output.
pub fn synth_population(config: &SynthConfig) -> Result<Population> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let h_count = config.n_households;

    let zones: Vec<String> = (0..config.n_zones).map(zone_name).collect();
    let zone_region: Vec<usize> = (0..config.n_zones)
        .map(|z| z * config.n_regions / config.n_zones)
        .collect();
    let pairs: Vec<(String, String)> = zones
        .iter()
        .zip(&zone_region)
        .map(|(z, r)| (z.clone(), region_name(*r)))
        .collect();
    let regions = Partition::from_pairs(&pairs);

    // zone attractiveness and residential weight
    let attract: Vec<f64> = (0..config.n_zones)
        .map(|_| (rng.sample::<f64, _>(StandardNormal)).exp())
        .collect();
    let resid: Vec<f64> = (0..config.n_zones)
        .map(|_| (0.5 * rng.sample::<f64, _>(StandardNormal)).exp())
        .collect();
    let home_dist = WeightedIndex::new(&resid).expect("positive weights");
    let size_dist = WeightedIndex::new(SIZE_WEIGHTS).expect("positive weights");
    let veh_dists: Vec<_> = VEHICLE_WEIGHTS
        .iter()
        .map(|w| WeightedIndex::new(w).expect("positive weights"))
        .collect();
    let mode_dist = WeightedIndex::new(config.modal_split).map_err(|e| Error::Config(e.to_string()))?;
    let purpose_dist =
        WeightedIndex::new(config.purpose_split).map_err(|e| Error::Config(e.to_string()))?;

    struct Draft {
        zone: usize,
        size: u32,
        vehicles: u32,
        income: f64,
    }
    let drafts: Vec<Draft> = (0..h_count)
        .map(|_| {
            let size = size_dist.sample(&mut rng) as u32 + 1;
            let vehicles = veh_dists[(size as usize - 1).min(2)].sample(&mut rng) as u32;
            let z: f64 = rng.sample(StandardNormal);
            let income = (80.0 * (0.25 * f64::from(vehicles) - 0.3 + 0.5 * z).exp()).round();
            Draft {
                zone: home_dist.sample(&mut rng),
                size,
                vehicles,
                income,
            }
        })
        .collect();

    let raw: Vec<f64> = drafts
        .iter()
        .map(|d| f64::from(d.size) + 0.5 * f64::from(d.vehicles))
        .collect();
    let mean = raw.iter().sum::<f64>() / h_count as f64;
    let sd = (raw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / h_count as f64).sqrt();
    let scores: Vec<f64> = raw
        .iter()
        .map(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 })
        .collect();
    let noise: Vec<f64> = (0..h_count).map(|_| rng.sample(StandardNormal)).collect();
    let sigma = tune_sigma(&scores, &noise, config.mean_trip_rate, config.heterogeneity);
    let counts = rounded_counts(&scores, &noise, config.mean_trip_rate, sigma);
    let realized_cv = if h_count >= 2 { counts_cv(&counts) } else { 0.0 };
    if (realized_cv - config.heterogeneity).abs() > CV_TOLERANCE * config.heterogeneity {
        return Err(Error::Config(format!(
            "heterogeneity {} unattainable: realized cv {realized_cv:.4}",
            config.heterogeneity
        )));
    }

    let mut households = Vec::with_capacity(h_count);
    let mut trips = Vec::new();
    for (h, (d, &k)) in drafts.iter().zip(&counts).enumerate() {
        let id = format!("H{:06}", h + 1);
        // gravity: attractiveness damped by region distance
        let dest_weights: Vec<f64> = (0..config.n_zones)
            .map(|z| {
                let gap = zone_region[z].abs_diff(zone_region[d.zone]) as f64;
                let same = if z == d.zone { 3.0 } else { 1.0 };
                attract[z] * same * (-0.8 * gap).exp()
            })
            .collect();
        let dest_dist = WeightedIndex::new(&dest_weights).expect("positive weights");
        let habitual = mode_dist.sample(&mut rng);
        for _ in 0..k {
            let mode = if rng.random::<f64>() < MODE_PERSISTENCE {
                habitual
            } else {
                mode_dist.sample(&mut rng)
            };
            let purpose = Purpose::ALL[purpose_dist.sample(&mut rng)];
            let peak = rng.random::<f64>() < config.peak_share;
            let depart = depart_time(&mut rng, peak);
            let other = zones[dest_dist.sample(&mut rng)].clone();
            let home = zones[d.zone].clone();
            let (origin_zone, destination_zone) = if purpose == Purpose::Home {
                (other, home)
            } else {
                (home, other)
            };
            trips.push(TripRecord {
                household_id: id.clone(),
                origin_zone,
                destination_zone,
                mode: Mode::ALL[mode],
                purpose,
                period: if peak { Period::Peak } else { Period::Offpeak },
                depart_hhmm: depart,
                weight: config.expansion_weight,
            });
        }
        households.push(HouseholdRecord {
            household_id: id,
            region: region_name(zone_region[d.zone]),
            zone: zones[d.zone].clone(),
            size: d.size,
            income_class: format!("{}", d.income),
            vehicles: d.vehicles,
            weight: config.expansion_weight,
            trip_count: k,
        });
    }

    Ok(Population {
        config: config.clone(),
        households,
        trips,
        zones,
        regions,
        realized_cv,
    })
}
