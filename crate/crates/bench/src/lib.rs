//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use hts_core::io::ingest_survey;
use hts_core::{HouseholdRecord, TripRecord};

/// The bundled small-city survey.
pub fn small_city() -> (Vec<HouseholdRecord>, Vec<TripRecord>) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures");
    let (hh, trips) = ingest_survey(
        &dir.join("small_city_households.csv"),
        &dir.join("small_city_trips.csv"),
    )
    .expect("bundled fixture loads");
    (hh, trips.trips)
}
