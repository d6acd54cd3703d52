#![allow(dead_code)]

use std::path::PathBuf;

use hts_core::io::{ingest_survey, FixtureManifest};
use hts_core::smith::{SmithOptions, StratumInput, StratumTable};
use hts_core::{HouseholdRecord, TripRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn small_city() -> (Vec<HouseholdRecord>, Vec<TripRecord>) {
    let (hh, t) = ingest_survey(
        &fixture("small_city_households.csv"),
        &fixture("small_city_trips.csv"),
    )
    .expect("bundled fixture loads");
    assert!(t.orphans.is_empty());
    (hh, t.trips)
}

pub fn small_city_manifest() -> FixtureManifest {
    let text = std::fs::read_to_string(fixture("small_city_manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// A random stratum table with 1..=12 strata of 2..=40 nonnegative trip
/// counts each; frequencies follow the stratum sizes.
pub fn random_table(rng: &mut ChaCha8Rng) -> StratumTable {
    loop {
        let k = rng.random_range(1..=12);
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let n = rng.random_range(2..=40);
                let scale = rng.random_range(0.5..12.0);
                (0..n).map(|_| (rng.random::<f64>() * scale).round()).collect()
            })
            .collect();
        let total: usize = groups.iter().map(Vec::len).sum();
        let sum: f64 = groups.iter().flatten().sum();
        if sum == 0.0 {
            continue;
        }
        let inputs = groups
            .into_iter()
            .enumerate()
            .map(|(i, values)| StratumInput {
                key: vec![format!("s{i:02}")],
                frequency: values.len() as f64 / total as f64,
                values,
            })
            .collect();
        let t = StratumTable::from_groups(vec!["x".into()], inputs, sum / total as f64, SmithOptions::default())
            .unwrap();
        if t.c_star > 0.0 {
            return t;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
