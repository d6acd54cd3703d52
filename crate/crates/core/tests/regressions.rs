//! Bundled fixtures against independent recomputations and pinned values.

mod common;

use std::collections::{BTreeMap, HashMap};

use hts_core::montecarlo::{
    coverage_curve, synth_population, CellSelector, SynthConfig,
};
use hts_core::od::{
    build_od_matrix, cell_required_rates, disaggregation_sweep, matrix_cv, peak_od, Partition, Slice, CORE_REGIONS,
};
use hts_core::planner::{
    combine_plan, plan_augment, plan_core, AugmentTarget, Cohort, OverlapPolicy, RegionAugments, RegionProfile,
    TargetPlan,
};
use hts_core::rmse::{audit, marginals_from_microdata, ReferenceSet, RmseMode};
use hts_core::smith::{smith_plan, stratify, SmithOptions, StratificationScheme};
use hts_core::stats::z_quantile;
use hts_core::{Dimension, HouseholdRecord, Mode, Period, Purpose, SizeSpec, TripRecord};
use rand::seq::index;

use common::{small_city, small_city_manifest};

fn spec95() -> SizeSpec {
    SizeSpec::new(0.95, 0.05).unwrap()
}

fn scheme() -> StratificationScheme {
    StratificationScheme::from_names("size,income,vehicles").unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

#[test]
fn fixture_matches_manifest() {
    let (hh, trips) = small_city();
    let m = small_city_manifest();
    assert_eq!(hh.len(), m.households);
    assert_eq!(trips.len(), m.trips);
    let mut by_mode: BTreeMap<String, usize> = BTreeMap::new();
    for t in &trips {
        *by_mode.entry(t.mode.to_string()).or_default() += 1;
    }
    assert_eq!(by_mode, m.trips_by_mode);
    let regenerated = synth_population(&m.generator).unwrap();
    assert_eq!(regenerated.households, hh);
    assert_eq!(regenerated.trips, trips);
}

/// Strata by hand: tertile cut points from sorted incomes, then a plain
/// group-by and spreadsheet-style sums.
#[test]
fn strata_match_independent_group_by() {
    let (hh, _) = small_city();
    let mut inc: Vec<f64> = hh.iter().map(|h| h.income_class.parse().unwrap()).collect();
    inc.sort_by(f64::total_cmp);
    let n = inc.len();
    let (t1, t2) = (inc[n / 3], inc[2 * n / 3]);
    let mut groups: HashMap<(u32, u32, u32), Vec<f64>> = HashMap::new();
    for h in &hh {
        let x: f64 = h.income_class.parse().unwrap();
        let i = if x < t1 { 0 } else if x < t2 { 1 } else { 2 };
        groups
            .entry((h.size.min(3), i, h.vehicles.min(2)))
            .or_default()
            .push(f64::from(h.trip_count));
    }
    let overall = hh.iter().map(|h| f64::from(h.trip_count)).sum::<f64>() / n as f64;
    let c_star: f64 = groups
        .values()
        .map(|v| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt();
            v.len() as f64 / n as f64 * sd / overall
        })
        .sum();

    let table = stratify(&hh, &scheme(), SmithOptions::default()).unwrap();
    assert_eq!(groups.len(), 27);
    assert_eq!(table.strata.len(), 27);
    let freq: f64 = table.strata.iter().map(|s| s.frequency).sum();
    assert!((freq - 1.0).abs() < 1e-9);
    assert!(close(table.c_star, c_star, 1e-12), "{} vs {c_star}", table.c_star);
    for s in &table.strata {
        assert_eq!(s.weighted_cv, s.frequency * s.cv);
    }
}

#[test]
fn small_city_plan_regression() {
    let (hh, _) = small_city();
    let plan = smith_plan(&hh, &scheme(), &spec95(), SmithOptions::default()).unwrap();
    let z = z_quantile(0.95).unwrap();
    let alloc: f64 = plan.strata.iter().map(|s| s.optimal).sum();
    assert!(close(alloc, plan.initial_size, 1e-6));
    let closed = plan.c_star * plan.rho * plan.c_star * z * z / (0.05 * 0.05);
    assert!(close(plan.final_total, closed, 1e-6));
    assert!(close(plan.c_star, 0.572290796723291, 1e-12));
    assert!(close(plan.initial_size, 503.25685252631723, 1e-12));
    assert!(close(plan.rho, 1.6301640246130098, 1e-12));
    assert_eq!(plan.final_total_rounded, 821);
    assert_eq!(plan.critical, vec!["3+", "mid", "2+"]);
    assert!((0.003..=0.010).contains(&plan.sampling_rate), "{}", plan.sampling_rate);
    assert!(close(plan.sampling_rate, 0.00513125, 1e-12));
}

#[test]
fn big_city_plan_regression() {
    let pop = synth_population(&SynthConfig::big_city(2012)).unwrap();
    let plan = smith_plan(&pop.households, &scheme(), &spec95(), SmithOptions::default()).unwrap();
    assert_eq!(plan.strata.len(), 27);
    assert!(close(plan.c_star, 0.942_932_896_350_318_7, 1e-12));
    assert!(close(plan.rho, 1.991_254_988_531_191_6, 1e-12));
    assert_eq!(plan.final_total_rounded, 2721);
}

#[test]
fn sweep_regression() {
    let (hh, trips) = small_city();
    let rows = disaggregation_sweep(&hh, &trips, &spec95(), SmithOptions::default()).unwrap();
    let pinned: [(&str, usize, u64, f64); 7] = [
        ("by mode", 4, 7045, 0.04403125),
        ("by purpose", 5, 3416, 0.02135),
        ("by time", 2, 1089, 0.00680625),
        ("by time & mode", 8, 10355, 0.06471875),
        ("by time & purpose", 10, 5786, 0.0361625),
        ("by purpose & mode", 20, 32290, 0.2018125),
        ("by time, purpose & mode", 40, 55841, 0.34900625),
    ];
    assert_eq!(rows.len(), 7);
    for (row, (level, k, total, rate)) in rows.iter().zip(pinned) {
        assert_eq!(row.level, level);
        assert_eq!(row.categories, k);
        assert_eq!(row.final_total_rounded, Some(total));
        assert!(close(row.sampling_rate.unwrap(), rate, 1e-12));
        assert!(row.rho.unwrap() >= 1.0);
    }
    assert!(rows[0].sampling_rate <= rows[5].sampling_rate);
}

#[test]
fn homogeneous_sweep_rows_are_degenerate() {
    let hh: Vec<HouseholdRecord> = (0..10)
        .map(|i| HouseholdRecord {
            household_id: format!("h{i}"),
            region: "R".into(),
            zone: "z".into(),
            size: 2,
            income_class: "50".into(),
            vehicles: 1,
            weight: 1.0,
            trip_count: 2,
        })
        .collect();
    let trips: Vec<TripRecord> = hh
        .iter()
        .flat_map(|h| {
            [(Purpose::Work, 800), (Purpose::Home, 1700)].map(|(p, t)| TripRecord {
                household_id: h.household_id.clone(),
                origin_zone: "z".into(),
                destination_zone: "z".into(),
                mode: Mode::Auto,
                purpose: p,
                period: Period::from_hhmm(t).unwrap(),
                depart_hhmm: t,
                weight: 1.0,
            })
        })
        .collect();
    let rows = disaggregation_sweep(&hh, &trips, &spec95(), SmithOptions::default()).unwrap();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r.error.is_some() && r.sampling_rate.is_none()));
}

#[test]
fn peak_slice_matches_filter_and_count() {
    let (_, trips) = small_city();
    let zones: Vec<String> = (1..=12).map(|z| format!("Z{z:03}")).collect();
    let slice = Slice {
        period: Some(Period::Peak),
        mode: Some(Mode::Auto),
        purpose: Some(Purpose::Work),
    };
    let m = build_od_matrix(&trips, &Partition::identity(&zones), slice).unwrap();
    let mut counts: HashMap<(&str, &str), f64> = HashMap::new();
    for t in &trips {
        let hour = t.depart_hhmm / 100;
        let peak = (6..10).contains(&hour) || (15..19).contains(&hour);
        if peak && t.mode.as_str() == "auto" && t.purpose.as_str() == "work" {
            *counts.entry((&t.origin_zone, &t.destination_zone)).or_default() += t.weight;
        }
    }
    for o in &zones {
        for d in &zones {
            let want = counts.get(&(o.as_str(), d.as_str())).copied().unwrap_or(0.0);
            assert_eq!(m.get(o, d), Some(want), "{o} -> {d}");
        }
    }
}

#[test]
fn peak_matrix_constants() {
    let f = peak_od().unwrap();
    let core = f.core().unwrap();
    let cv = core.cell_cv().unwrap();
    assert!((cv - 2.011_842_510_789_619).abs() < 1e-12, "{cv}");
    let r = cell_required_rates(&f.matrix, 0.5, &SizeSpec::new(0.9, 0.25).unwrap()).unwrap();
    let dh = r.get("Region of Durham", "Region of Halton").unwrap();
    assert!((dh - 0.03481789501534999).abs() < 1e-15);
    assert!((dh - 10.822_173_816_381_65 / 310.822_173_816_381_6).abs() < 1e-12);
    assert!(f.discrepancies(200.0).is_empty());
    assert_eq!(core.labels, CORE_REGIONS);
}

#[test]
fn big_city_combination_cv_near_two() {
    let pop = synth_population(&SynthConfig::big_city(2012)).unwrap();
    let cv = matrix_cv(&pop.trips, &[Dimension::Period, Dimension::Mode, Dimension::Purpose]).unwrap();
    assert!((1.8..=2.2).contains(&cv), "{cv}");
}

#[test]
fn core_rate_over_six_regions() {
    let pops = [1_047_000u64, 230_000, 345_000, 431_000, 180_000, 205_500];
    let regions: Vec<RegionProfile> = CORE_REGIONS
        .iter()
        .zip(pops)
        .map(|(n, p)| RegionProfile {
            name: n.to_string(),
            household_population: p,
            households: vec![],
            trips: vec![],
            targets: vec![],
        })
        .collect();
    let core = plan_core(&regions, 0.05).unwrap();
    for (c, p) in core.iter().zip(pops) {
        // integer ceiling of p/20
        assert_eq!(c.core_size, p.div_ceil(20));
    }
    let plan = combine_plan(&core, &[], OverlapPolicy::Additive).unwrap();
    assert_eq!(plan.study_total, pops.iter().map(|p| p.div_ceil(20)).sum::<u64>());
}

fn big_city_region() -> RegionProfile {
    let pop = synth_population(&SynthConfig::big_city(2012)).unwrap();
    let population = pop.households.iter().map(|h| h.weight).sum::<f64>() as u64;
    RegionProfile {
        name: "big".into(),
        household_population: population,
        households: pop.households,
        trips: pop.trips,
        targets: vec![
            AugmentTarget {
                name: "all".into(),
                cohort: Cohort::All,
                scheme: scheme(),
            },
            AugmentTarget {
                name: "transit".into(),
                cohort: Cohort::ModeUsers { mode: Mode::Transit },
                scheme: scheme(),
            },
        ],
    }
}

#[test]
fn augment_targets() {
    let region = big_city_region();
    let direct = smith_plan(&region.households, &scheme(), &spec95(), SmithOptions::default()).unwrap();
    let aug = plan_augment(&region, &spec95(), SmithOptions::default()).unwrap();
    let names: Vec<&str> = aug.plans.iter().map(|p| p.target.as_str()).collect();
    assert_eq!(names, ["all", "transit"]);
    assert_eq!(aug.plans[0].plan, direct);
    let (all, transit) = (&aug.plans[0].plan, &aug.plans[1].plan);
    assert!(transit.c_star < all.c_star);
    assert!(transit.final_total_rounded <= all.final_total_rounded);
    assert_eq!(transit.final_total_rounded, 1909);
}

#[test]
fn core_plus_augment() {
    let region = RegionProfile {
        name: "Toronto".into(),
        household_population: 1_000_000,
        households: vec![],
        trips: vec![],
        targets: vec![],
    };
    let core = plan_core(&[region], 0.04).unwrap();
    assert_eq!(core[0].core_size, 40_000);
    let mut plan = plan_augment(&big_city_region(), &spec95(), SmithOptions::default())
        .unwrap()
        .plans
        .remove(0)
        .plan;
    plan.final_total_rounded = 5_344;
    let aug = |share: f64| RegionAugments {
        region: "Toronto".into(),
        plans: vec![TargetPlan {
            target: "augment".into(),
            cohort: Cohort::All,
            cohort_share: share,
            plan: plan.clone(),
        }],
        warnings: vec![],
    };
    let additive = combine_plan(&core, &[aug(0.2)], OverlapPolicy::Additive).unwrap();
    assert_eq!(additive.regions[0].total, 45_344);
    let credited = combine_plan(&core, &[aug(0.5)], OverlapPolicy::CreditCore).unwrap();
    assert_eq!(credited.regions[0].augments[0].contribution, 0);
    assert_eq!(credited.regions[0].total, 40_000);
}

fn references(hh: &[HouseholdRecord], trips: &[TripRecord]) -> ReferenceSet {
    let mut refs = ReferenceSet::new();
    refs.insert(None, marginals_from_microdata(hh, trips));
    refs
}

/// Households drawn at `rate` and re-weighted by the inverse rate, with
/// their trips.
fn subsample(
    hh: &[HouseholdRecord],
    trips: &[TripRecord],
    rate: f64,
    seed: u64,
    keep_trip: impl Fn(&TripRecord, &mut rand_chacha::ChaCha8Rng) -> bool,
) -> (Vec<HouseholdRecord>, Vec<TripRecord>) {
    let mut rng = common::rng(seed);
    let n = (rate * hh.len() as f64).round() as usize;
    let w = hh.len() as f64 / n as f64;
    let mut picked: Vec<usize> = index::sample(&mut rng, hh.len(), n).into_vec();
    picked.sort_unstable();
    let sample: Vec<HouseholdRecord> = picked
        .iter()
        .map(|&i| HouseholdRecord {
            weight: hh[i].weight * w,
            ..hh[i].clone()
        })
        .collect();
    let ids: std::collections::HashSet<&str> = sample.iter().map(|h| h.household_id.as_str()).collect();
    let kept = trips
        .iter()
        .filter(|t| ids.contains(t.household_id.as_str()))
        .filter(|t| keep_trip(t, &mut rng))
        .map(|t| TripRecord {
            weight: t.weight * w,
            ..t.clone()
        })
        .collect();
    (sample, kept)
}

#[test]
fn audit_of_a_fair_sample_is_tight() {
    let pop = synth_population(&SynthConfig {
        n_households: 200_000,
        ..SynthConfig::small_city(77)
    })
    .unwrap();
    let refs = references(&pop.households, &pop.trips);
    let (hh, trips) = subsample(&pop.households, &pop.trips, 0.05, 3, |_, _| true);
    let report = &audit(&hh, &trips, &refs, None, RmseMode::Nested).unwrap()[0];
    assert!(report.overall_percent_rmse < 3.0, "{}", report.overall_percent_rmse);
    assert_eq!(report.per_variable_rmse.len(), 4);
    let within_20 = report.per_category.iter().filter(|c| c.relative_error.abs() < 0.2).count();
    assert!(within_20 * 2 > report.per_category.len());
}

#[test]
fn biased_sample_raises_mode_error() {
    let pop = synth_population(&SynthConfig {
        n_households: 50_000,
        ..SynthConfig::small_city(78)
    })
    .unwrap();
    let refs = references(&pop.households, &pop.trips);
    let fair = subsample(&pop.households, &pop.trips, 0.05, 4, |_, _| true);
    let biased = subsample(&pop.households, &pop.trips, 0.05, 4, |t, rng| {
        use rand::Rng;
        t.mode != Mode::Transit || rng.random::<f64>() < 0.5
    });
    let mode_rmse = |(h, t): &(Vec<HouseholdRecord>, Vec<TripRecord>)| {
        audit(h, t, &refs, None, RmseMode::Nested).unwrap()[0].per_variable_rmse["mode"]
    };
    assert!(mode_rmse(&biased) > mode_rmse(&fair));
}

#[test]
fn mape_falls_as_rate_rises() {
    let pop = synth_population(&SynthConfig {
        n_households: 20_000,
        ..SynthConfig::small_city(5)
    })
    .unwrap();
    let sel = CellSelector::all(pop.regions.clone(), Slice::default());
    let rates = [0.005, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64, 1.0];
    let curve = coverage_curve(&pop, &SizeSpec::new(0.9, 0.25).unwrap(), &rates, 60, &sel, 21).unwrap();
    let inversions = curve.windows(2).filter(|w| w[1].mape > w[0].mape).count();
    assert!(inversions <= 1, "{curve:?}");
    assert_eq!(curve.last().unwrap().coverage, 1.0);
    assert_eq!(curve.last().unwrap().mape, 0.0);
}
