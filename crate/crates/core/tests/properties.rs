use proptest::prelude::*;

use hts_core::od::{build_od_matrix, Partition, Slice};
use hts_core::planner::{combine_plan, plan_core, OverlapPolicy, RegionAugments, RegionProfile, TargetPlan, Cohort};
use hts_core::rmse::{percent_rmse, rmse_report, MarginalTable, RmseMode};
use hts_core::smith::{allocate, initial_sample_size, plan_from_table, SmithOptions, StratumInput, StratumTable};
use hts_core::stats::{base_sample_size, coefficient_of_variation, fpc_sample_size, interchange_rate};
use hts_core::{Mode, Period, Purpose, SizeSpec, TripRecord};

fn spec_strategy() -> impl Strategy<Value = SizeSpec> {
    (0.5f64..0.999, 0.01f64..0.5).prop_map(|(c, e)| SizeSpec::new(c, e).unwrap())
}

proptest! {
    #[test]
    fn rate_is_a_fraction(n in 1u64..10_000_000, cv in 0.01f64..5.0, spec in spec_strategy()) {
        let r = interchange_rate(n, cv, &spec).unwrap();
        prop_assert!(r > 0.0 && r <= 1.0);
    }

    #[test]
    fn rate_falls_with_trips(n in 1u64..1_000_000, k in 2u64..50, cv in 0.05f64..3.0, spec in spec_strategy()) {
        let a = interchange_rate(n, cv, &spec).unwrap();
        let b = interchange_rate(n * k, cv, &spec).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn rate_rises_with_cv_and_confidence(n in 10u64..1_000_000, cv in 0.05f64..3.0, c in 0.5f64..0.95, e in 0.02f64..0.5) {
        let spec = SizeSpec::new(c, e).unwrap();
        let tighter = SizeSpec::new(c + 0.04, e).unwrap();
        let base = interchange_rate(n, cv, &spec).unwrap();
        prop_assert!(interchange_rate(n, cv * 1.1, &spec).unwrap() > base);
        prop_assert!(interchange_rate(n, cv, &tighter).unwrap() > base);
    }

    #[test]
    fn fpc_is_bounded(n0 in 0.0f64..1e9, pop in 1u64..10_000_000) {
        let n = fpc_sample_size(n0, pop).unwrap();
        prop_assert!(n <= n0 + 1e-9 && n <= pop as f64 + 1e-9 && n >= 0.0);
    }

    #[test]
    fn base_size_scales_quadratically(cv in 0.01f64..3.0, k in 0.1f64..10.0, spec in spec_strategy()) {
        let a = base_sample_size(cv, &spec).unwrap();
        let b = base_sample_size(cv * k, &spec).unwrap();
        prop_assert!((b / a - k * k).abs() < 1e-9 * k * k);
    }

    #[test]
    fn cv_is_scale_and_order_invariant(mut v in prop::collection::vec(0.0f64..100.0, 2..50), k in 0.01f64..100.0) {
        prop_assume!(v.iter().sum::<f64>() > 0.0);
        let a = coefficient_of_variation(&v).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
        prop_assert!((coefficient_of_variation(&scaled).unwrap() - a).abs() < 1e-9 * (1.0 + a));
        v.reverse();
        prop_assert!((coefficient_of_variation(&v).unwrap() - a).abs() < 1e-12 * (1.0 + a));
    }

    #[test]
    fn allocation_identities(
        groups in prop::collection::vec(prop::collection::vec(0u32..20, 2..30), 1..10),
        spec in spec_strategy(),
    ) {
        let total: usize = groups.iter().map(Vec::len).sum();
        let sum: f64 = groups.iter().flatten().map(|&x| f64::from(x)).sum();
        prop_assume!(sum > 0.0);
        let inputs = groups.iter().enumerate().map(|(i, g)| StratumInput {
            key: vec![i.to_string()],
            values: g.iter().map(|&x| f64::from(x)).collect(),
            frequency: g.len() as f64 / total as f64,
        }).collect();
        let table = StratumTable::from_groups(vec!["x".into()], inputs, sum / total as f64, SmithOptions::default()).unwrap();
        prop_assume!(table.c_star > 0.0);
        let f = initial_sample_size(table.c_star, &spec).unwrap();
        let alloc = allocate(&table, f).unwrap();
        let w: f64 = alloc.iter().map(|a| a.weight).sum();
        let opt: f64 = alloc.iter().map(|a| a.optimal).sum();
        let exp: f64 = alloc.iter().map(|a| a.expected).sum();
        prop_assert!((w - 1.0).abs() < 1e-9);
        prop_assert!((opt - f).abs() <= 1e-6 * f);
        prop_assert!((exp - f).abs() <= 1e-6 * f);
        prop_assert!(table.c_star <= table.max_cv() + 1e-12);
        let plan = plan_from_table(&table, &spec, 1e6).unwrap();
        prop_assert!(plan.rho >= 1.0 - 1e-12);
        prop_assert!((plan.final_total - plan.closed_form_total).abs() <= 1e-6 * plan.closed_form_total);
        prop_assert!(plan.final_total_rounded as f64 >= plan.final_total - 1e-9);
    }

    #[test]
    fn rmse_zero_iff_equal(vals in prop::collection::vec(1.0f64..1000.0, 1..8), k in 0.5f64..2.0) {
        let labels: Vec<String> = (0..vals.len()).map(|i| format!("c{i}")).collect();
        let table = |scale: f64| MarginalTable::new("v", &labels.iter().zip(&vals).map(|(l, v)| (l.as_str(), v * scale)).collect::<Vec<_>>());
        prop_assert_eq!(percent_rmse(&[table(1.0)], &[table(1.0)]).unwrap(), 0.0);
        // uniform scaling by k gives relative error |1-k| everywhere
        let r = percent_rmse(&[table(1.0)], &[table(k)]).unwrap();
        prop_assert!((r - (1.0 - k).abs() * 100.0).abs() < 1e-9);
    }

    #[test]
    fn rmse_ignores_variable_order(a in prop::collection::vec(1.0f64..100.0, 2), b in prop::collection::vec(1.0f64..100.0, 2)) {
        let r1 = MarginalTable::new("a", &[("x", 50.0), ("y", 50.0)]);
        let r2 = MarginalTable::new("b", &[("x", 30.0), ("y", 70.0)]);
        let s1 = MarginalTable::new("a", &[("x", a[0]), ("y", a[1])]);
        let s2 = MarginalTable::new("b", &[("x", b[0]), ("y", b[1])]);
        let fwd = rmse_report(&[r1.clone(), r2.clone()], &[s1.clone(), s2.clone()], RmseMode::Nested).unwrap();
        let rev = rmse_report(&[r2, r1], &[s2, s1], RmseMode::Nested).unwrap();
        prop_assert_eq!(fwd.overall_percent_rmse, rev.overall_percent_rmse);
        // equal category counts make nested and pooled agree
        let pooled = rmse_report(&[MarginalTable::new("a", &[("x", 50.0), ("y", 50.0)]), MarginalTable::new("b", &[("x", 30.0), ("y", 70.0)])],
            &[MarginalTable::new("a", &[("x", a[0]), ("y", a[1])]), MarginalTable::new("b", &[("x", b[0]), ("y", b[1])])], RmseMode::Pooled).unwrap();
        prop_assert!((pooled.overall_percent_rmse - fwd.overall_percent_rmse).abs() < 1e-9);
    }

    #[test]
    fn mode_slices_sum_to_whole(raw in prop::collection::vec((0usize..3, 0usize..3, 0usize..4, 0usize..5, 0u16..24), 0..200)) {
        let zones = ["a", "b", "c"];
        let trips: Vec<TripRecord> = raw.iter().map(|&(o, d, m, p, h)| TripRecord {
            household_id: "h".into(),
            origin_zone: zones[o].into(),
            destination_zone: zones[d].into(),
            mode: Mode::ALL[m],
            purpose: Purpose::ALL[p],
            period: Period::from_hhmm(h * 100).unwrap(),
            depart_hhmm: h * 100,
            weight: 1.0,
        }).collect();
        let part = Partition::identity(&zones);
        let whole = build_od_matrix(&trips, &part, Slice::default()).unwrap();
        let mut sum = vec![vec![0.0; 3]; 3];
        for &m in Mode::ALL.iter() {
            let s = build_od_matrix(&trips, &part, Slice { mode: Some(m), ..Default::default() }).unwrap();
            for (row, cells) in sum.iter_mut().zip(&s.cells) { for (a, b) in row.iter_mut().zip(cells) { *a += b; } }
        }
        prop_assert_eq!(sum, whole.cells.clone());
        prop_assert_eq!(whole.total(), trips.len() as f64);
    }

    #[test]
    fn credit_core_never_negative(pop in 100u64..1_000_000, need in 0u64..100_000, share in 0.0f64..1.0) {
        let region = RegionProfile { name: "r".into(), household_population: pop, households: vec![], trips: vec![], targets: vec![] };
        let core = plan_core(&[region], 0.04).unwrap();
        let mut rng = common_rng();
        let mut plan = plan_from_table(&random_table(&mut rng), &SizeSpec::new(0.95, 0.05).unwrap(), pop as f64).unwrap();
        plan.final_total_rounded = need;
        let aug = RegionAugments { region: "r".into(), plans: vec![TargetPlan { target: "t".into(), cohort: Cohort::All, cohort_share: share, plan }], warnings: vec![] };
        let add = combine_plan(&core, std::slice::from_ref(&aug), OverlapPolicy::Additive).unwrap();
        let cred = combine_plan(&core, &[aug], OverlapPolicy::CreditCore).unwrap();
        prop_assert_eq!(add.regions[0].total, core[0].core_size + need);
        prop_assert!(cred.regions[0].total >= core[0].core_size);
        prop_assert!(cred.regions[0].total <= add.regions[0].total);
    }
}

mod common;
use common::random_table;

fn common_rng() -> rand_chacha::ChaCha8Rng {
    common::rng(5)
}
