//! Stratified augment-sample sizing.
//!
//! Households are grouped into strata, each stratum's trip-rate dispersion
//! is normalized by the overall mean trip rate and weighted by the stratum's
//! share of households. The weighted sum `C*` drives the initial size
//! `F = C*² z² / e²`, which is allocated across strata and then inflated so
//! the most dispersed ("critical") stratum receives its optimal share under
//! a proportional (full random) sample.

mod scheme;

pub use scheme::{Attribute, Bin, ClassRule, ResolvedScheme, StratVariable, StratificationScheme};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::HouseholdRecord;
use crate::stats::{mean_and_std, Dispersion, SizeSpec};

/// Denominator of a stratum's CV.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvDenominator {
    /// Overall mean trip rate across all strata.
    #[default]
    Overall,
    /// The stratum's own mean trip rate.
    Stratum,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmithOptions {
    pub cv_denominator: CvDenominator,
    pub dispersion: Dispersion,
    /// Pool strata with fewer than two households into one `other` stratum.
    pub merge_thin: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumStats {
    pub key: Vec<String>,
    pub count: usize,
    pub frequency: f64,
    pub mean_trip_rate: f64,
    pub std_trip_rate: f64,
    pub cv: f64,
    pub weighted_cv: f64,
    /// Fewer than two households; std forced to zero.
    pub thin: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumTable {
    pub variables: Vec<String>,
    pub strata: Vec<StratumStats>,
    pub overall_mean_trip_rate: f64,
    pub c_star: f64,
}

/// Raw input for one stratum: its key, its per-unit values and its share of
/// the population.
#[derive(Debug, Clone)]
pub struct StratumInput {
    pub key: Vec<String>,
    pub values: Vec<f64>,
    pub frequency: f64,
}

impl StratumTable {
    /// Build the table from pre-grouped values. Strata keep the given order.
    pub fn from_groups(
        variables: Vec<String>,
        groups: Vec<StratumInput>,
        overall_mean: f64,
        opts: SmithOptions,
    ) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Degenerate("no strata".into()));
        }
        if !(overall_mean > 0.0) {
            return Err(Error::Degenerate(
                "overall mean trip rate is zero; every household reports no trips".into(),
            ));
        }
        let strata = groups
            .into_iter()
            .map(|g| {
                let mut values = g.values;
                values.sort_by(f64::total_cmp);
                let thin = values.len() < 2;
                let (mean, std) = if thin {
                    (values.first().copied().unwrap_or(0.0), 0.0)
                } else {
                    mean_and_std(&values, opts.dispersion)
                };
                let denom = match opts.cv_denominator {
                    CvDenominator::Overall => overall_mean,
                    CvDenominator::Stratum => mean,
                };
                let cv = if std == 0.0 { 0.0 } else { std / denom };
                StratumStats {
                    key: g.key,
                    count: values.len(),
                    frequency: g.frequency,
                    mean_trip_rate: mean,
                    std_trip_rate: std,
                    cv,
                    weighted_cv: g.frequency * cv,
                    thin,
                }
            })
            .collect::<Vec<_>>();
        let c_star = strata.iter().map(|s| s.weighted_cv).sum();
        Ok(Self {
            variables,
            strata,
            overall_mean_trip_rate: overall_mean,
            c_star,
        })
    }

    pub fn max_cv(&self) -> f64 {
        self.strata.iter().map(|s| s.cv).fold(0.0, f64::max)
    }
}

/// Households grouped by class-index tuple, in deterministic key order.
#[derive(Debug, Clone)]
pub struct Grouped {
    pub scheme: ResolvedScheme,
    pub groups: BTreeMap<Vec<usize>, Vec<f64>>,
    pub total: usize,
}

pub fn group(households: &[HouseholdRecord], scheme: &StratificationScheme) -> Result<Grouped> {
    if households.is_empty() {
        return Err(Error::Validation("no households to stratify".into()));
    }
    let resolved = scheme.resolve(households)?;
    let mut groups: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    for h in households {
        groups
            .entry(resolved.classify(h)?)
            .or_default()
            .push(f64::from(h.trip_count));
    }
    Ok(Grouped {
        scheme: resolved,
        groups,
        total: households.len(),
    })
}

/// Per-stratum statistics and `C*` for grouped households.
pub fn compute_stats(grouped: &Grouped, opts: SmithOptions) -> Result<StratumTable> {
    let mut all: Vec<f64> = grouped.groups.values().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    let overall = all.iter().sum::<f64>() / all.len() as f64;
    let total = grouped.total as f64;

    let mut inputs = Vec::new();
    let mut thin_pool = Vec::new();
    for (idx, values) in &grouped.groups {
        if opts.merge_thin && values.len() < 2 {
            thin_pool.extend_from_slice(values);
            continue;
        }
        inputs.push(StratumInput {
            key: grouped.scheme.labels(idx),
            values: values.clone(),
            frequency: values.len() as f64 / total,
        });
    }
    if !thin_pool.is_empty() {
        inputs.push(StratumInput {
            key: vec!["other".to_string(); grouped.scheme.variables.len()],
            frequency: thin_pool.len() as f64 / total,
            values: thin_pool,
        });
    }
    StratumTable::from_groups(grouped.scheme.variable_names(), inputs, overall, opts)
}

/// One stratum per nonempty class combination.
pub fn stratify(
    households: &[HouseholdRecord],
    scheme: &StratificationScheme,
    opts: SmithOptions,
) -> Result<StratumTable> {
    compute_stats(&group(households, scheme)?, opts)
}

/// `F = C*² z² / e²`.
pub fn initial_sample_size(c_star: f64, spec: &SizeSpec) -> Result<f64> {
    if !(c_star >= 0.0 && c_star.is_finite()) {
        return Err(Error::Domain(format!("C* must be finite and >= 0, got {c_star}")));
    }
    Ok(c_star * c_star * spec.precision_factor())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub weight: f64,
    pub optimal: f64,
    pub expected: f64,
}

/// Weights `weighted_cv / C*`, optimal allocation `weight · F` and
/// proportional allocation `frequency · F`, in table order.
pub fn allocate(table: &StratumTable, initial_size: f64) -> Result<Vec<Allocation>> {
    if !(initial_size >= 0.0) {
        return Err(Error::Domain(format!("initial size must be >= 0, got {initial_size}")));
    }
    if !(table.c_star > 0.0) {
        return Err(Error::Degenerate(
            "C* is zero: no within-stratum dispersion, any sample suffices".into(),
        ));
    }
    Ok(table
        .strata
        .iter()
        .map(|s| {
            let weight = s.weighted_cv / table.c_star;
            Allocation {
                weight,
                optimal: weight * initial_size,
                expected: s.frequency * initial_size,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStratum {
    pub key: Vec<String>,
    pub count: usize,
    pub frequency: f64,
    pub mean: f64,
    pub std: f64,
    pub cv: f64,
    pub weighted_cv: f64,
    pub weight: f64,
    pub optimal: f64,
    pub expected: f64,
    #[serde(rename = "final")]
    pub final_required: f64,
    pub final_rounded: u64,
    pub thin: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPlan {
    pub spec: SizeSpec,
    pub variables: Vec<String>,
    pub strata: Vec<PlanStratum>,
    pub overall_mean_trip_rate: f64,
    pub c_star: f64,
    #[serde(rename = "F")]
    pub initial_size: f64,
    pub critical: Vec<String>,
    pub tied_critical: bool,
    pub rho: f64,
    pub final_total: f64,
    pub final_total_rounded: u64,
    /// `C* · CV_max · z² / e²`, the closed form of `final_total`.
    pub closed_form_total: f64,
    pub population: f64,
    pub sampling_rate: f64,
    pub warnings: Vec<String>,
}

const CLOSED_FORM_TOL: f64 = 1e-9;

/// Pick the critical stratum (largest CV, first in key order on ties),
/// inflate the proportional allocation by `rho = optimal / expected` of that
/// stratum and round up only at the end.
pub fn critical_inflation(
    table: &StratumTable,
    allocations: &[Allocation],
    initial_size: f64,
    spec: &SizeSpec,
    population: f64,
) -> Result<AugmentPlan> {
    if allocations.len() != table.strata.len() {
        return Err(Error::Schema(format!(
            "{} allocations for {} strata",
            allocations.len(),
            table.strata.len()
        )));
    }
    if !(population > 0.0) {
        return Err(Error::Domain("household population must be positive".into()));
    }
    let max_cv = table.max_cv();
    let crit = table
        .strata
        .iter()
        .position(|s| s.cv == max_cv)
        .ok_or_else(|| Error::Degenerate("no strata".into()))?;
    let ties = table.strata.iter().filter(|s| s.cv == max_cv).count();

    let mut warnings = Vec::new();
    if ties > 1 {
        warnings.push(format!(
            "tied-critical: {ties} strata share the largest cv {max_cv}; using {:?}",
            table.strata[crit].key
        ));
    }
    let thin = table.strata.iter().filter(|s| s.thin).count();
    if thin > 0 {
        warnings.push(format!("{thin} thin strata (fewer than 2 households) with std set to 0"));
    }

    let rho = allocations[crit].optimal / allocations[crit].expected;
    let strata = table
        .strata
        .iter()
        .zip(allocations)
        .map(|(s, a)| {
            let final_required = a.expected * rho;
            PlanStratum {
                key: s.key.clone(),
                count: s.count,
                frequency: s.frequency,
                mean: s.mean_trip_rate,
                std: s.std_trip_rate,
                cv: s.cv,
                weighted_cv: s.weighted_cv,
                weight: a.weight,
                optimal: a.optimal,
                expected: a.expected,
                final_required,
                final_rounded: ceil_count(final_required),
                thin: s.thin,
            }
        })
        .collect();

    let final_total = initial_size * rho;
    let closed_form_total = table.c_star * max_cv * spec.precision_factor();
    let denom = closed_form_total.abs().max(f64::MIN_POSITIVE);
    if (final_total - closed_form_total).abs() / denom > CLOSED_FORM_TOL {
        return Err(Error::Validation(format!(
            "pipeline total {final_total} disagrees with closed form {closed_form_total}"
        )));
    }
    let final_total_rounded = ceil_count(final_total);
    Ok(AugmentPlan {
        spec: *spec,
        variables: table.variables.clone(),
        strata,
        overall_mean_trip_rate: table.overall_mean_trip_rate,
        c_star: table.c_star,
        initial_size,
        critical: table.strata[crit].key.clone(),
        tied_critical: ties > 1,
        rho,
        final_total,
        final_total_rounded,
        closed_form_total,
        population,
        sampling_rate: final_total_rounded as f64 / population,
        warnings,
    })
}

/// Ceiling that ignores floating-point fuzz just above an integer.
fn ceil_count(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Steps from a finished table to the inflated plan.
pub fn plan_from_table(table: &StratumTable, spec: &SizeSpec, population: f64) -> Result<AugmentPlan> {
    let f = initial_sample_size(table.c_star, spec)?;
    let alloc = allocate(table, f)?;
    critical_inflation(table, &alloc, f, spec, population)
}

/// The whole procedure. The household population is the sum of expansion
/// weights.
pub fn smith_plan(
    households: &[HouseholdRecord],
    scheme: &StratificationScheme,
    spec: &SizeSpec,
    opts: SmithOptions,
) -> Result<AugmentPlan> {
    let table = stratify(households, scheme, opts)?;
    let population: f64 = households.iter().map(|h| h.weight).sum();
    plan_from_table(&table, spec, population)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hh(id: usize, size: u32, income: &str, vehicles: u32, trips: u32) -> HouseholdRecord {
        HouseholdRecord {
            household_id: format!("h{id}"),
            region: "R".into(),
            zone: "Z1".into(),
            size,
            income_class: income.into(),
            vehicles,
            weight: 1.0,
            trip_count: trips,
        }
    }

    fn table(groups: &[(&str, &[f64])]) -> StratumTable {
        let total: usize = groups.iter().map(|g| g.1.len()).sum();
        let all: Vec<f64> = groups.iter().flat_map(|g| g.1.iter().copied()).collect();
        let overall = all.iter().sum::<f64>() / all.len() as f64;
        let inputs = groups
            .iter()
            .map(|(k, v)| StratumInput {
                key: vec![k.to_string()],
                values: v.to_vec(),
                frequency: v.len() as f64 / total as f64,
            })
            .collect();
        StratumTable::from_groups(vec!["k".into()], inputs, overall, SmithOptions::default())
            .unwrap()
    }

    #[test]
    fn two_households_two_strata() {
        let hs = [hh(1, 1, "a", 0, 3), hh(2, 2, "a", 0, 5)];
        let scheme = StratificationScheme::from_names("size").unwrap();
        let t = stratify(&hs, &scheme, SmithOptions::default()).unwrap();
        assert_eq!(t.strata.len(), 2);
        assert_eq!(t.strata[0].frequency, 0.5);
        assert_eq!(t.strata[1].frequency, 0.5);
        assert!(t.strata.iter().all(|s| s.thin));
    }

    #[test]
    fn out_of_range_income_is_rejected() {
        let scheme = StratificationScheme::new(vec![StratVariable {
            attribute: Attribute::Income,
            classes: ClassRule::Bins(vec![
                Bin::new("low", Some(0.0), Some(50.0)),
                Bin::new("high", Some(50.0), Some(200.0)),
            ]),
        }])
        .unwrap();
        let hs = [hh(1, 1, "20", 0, 3), hh(2, 1, "250", 0, 2)];
        let err = stratify(&hs, &scheme, SmithOptions::default()).unwrap_err();
        assert!(matches!(&err, Error::Validation(m) if m.contains("h2")), "{err}");
    }

    #[test]
    fn all_zero_trips_is_degenerate() {
        let hs = [hh(1, 1, "a", 0, 0), hh(2, 2, "a", 0, 0)];
        let scheme = StratificationScheme::from_names("size").unwrap();
        assert!(matches!(
            stratify(&hs, &scheme, SmithOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn single_stratum_arithmetic() {
        let t = table(&[("a", &[2.0, 4.0])]);
        let s = &t.strata[0];
        assert_eq!((s.mean_trip_rate, s.std_trip_rate), (3.0, 1.0));
        assert!((s.cv - 1.0 / 3.0).abs() < 1e-15);
        assert!((t.c_star - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_within_dispersion() {
        let t = table(&[("a", &[2.0, 2.0]), ("b", &[4.0, 4.0])]);
        assert_eq!(t.c_star, 0.0);
        assert!(matches!(allocate(&t, 10.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn initial_size_examples() {
        let s95 = SizeSpec::new(0.95, 0.05).unwrap();
        assert!((initial_sample_size(1.0, &s95).unwrap() - 1_536.583_528_277_65).abs() < 1e-8);
        assert_eq!(initial_sample_size(0.0, &s95).unwrap(), 0.0);
        let s90 = SizeSpec::new(0.90, 0.25).unwrap();
        assert!((initial_sample_size(0.5, &s90).unwrap() - 10.822_173_816_381_65).abs() < 1e-9);
    }

    fn manual_table(freqs: &[f64], cvs: &[f64]) -> StratumTable {
        let strata: Vec<StratumStats> = freqs
            .iter()
            .zip(cvs)
            .enumerate()
            .map(|(i, (&f, &cv))| StratumStats {
                key: vec![format!("s{i}")],
                count: 10,
                frequency: f,
                mean_trip_rate: 1.0,
                std_trip_rate: cv,
                cv,
                weighted_cv: f * cv,
                thin: false,
            })
            .collect();
        let c_star = strata.iter().map(|s| s.weighted_cv).sum();
        StratumTable {
            variables: vec!["k".into()],
            strata,
            overall_mean_trip_rate: 1.0,
            c_star,
        }
    }

    #[test]
    fn two_strata_weights_and_rho() {
        let t = manual_table(&[0.5, 0.5], &[0.2, 0.6]);
        let a = allocate(&t, 100.0).unwrap();
        assert!((a[0].weight - 0.25).abs() < 1e-12);
        assert!((a[1].weight - 0.75).abs() < 1e-12);
        let spec = SizeSpec::new(0.95, 0.05).unwrap();
        let plan = plan_from_table(&t, &spec, 1e6).unwrap();
        assert!((plan.rho - 1.5).abs() < 1e-12);
        assert_eq!(plan.critical, vec!["s1".to_string()]);
    }

    #[test]
    fn single_stratum_allocation() {
        let t = manual_table(&[1.0], &[0.7]);
        let a = allocate(&t, 42.0).unwrap();
        assert_eq!(a[0].weight, 1.0);
        assert_eq!(a[0].optimal, 42.0);
        assert_eq!(a[0].expected, 42.0);
    }

    #[test]
    fn equal_cvs_give_unit_rho_and_tie_warning() {
        let t = manual_table(&[0.3, 0.7], &[0.4, 0.4]);
        let spec = SizeSpec::new(0.95, 0.05).unwrap();
        let plan = plan_from_table(&t, &spec, 1e5).unwrap();
        assert!((plan.rho - 1.0).abs() < 1e-12);
        assert!((plan.final_total - plan.initial_size).abs() < 1e-9);
        assert!(plan.tied_critical);
        assert_eq!(plan.critical, vec!["s0".to_string()]);
    }

    #[test]
    fn homogeneous_population_is_degenerate() {
        let hs: Vec<_> = (0..10).map(|i| hh(i, 1 + (i % 3) as u32, "a", 0, 4)).collect();
        let scheme = StratificationScheme::from_names("size").unwrap();
        let spec = SizeSpec::new(0.95, 0.05).unwrap();
        assert!(matches!(
            smith_plan(&hs, &scheme, &spec, SmithOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn merge_thin_pools_singletons() {
        let hs = [
            hh(1, 1, "a", 0, 3),
            hh(2, 1, "a", 0, 5),
            hh(3, 2, "a", 0, 1),
            hh(4, 3, "a", 0, 7),
        ];
        let scheme = StratificationScheme::from_names("size").unwrap();
        let opts = SmithOptions {
            merge_thin: true,
            ..Default::default()
        };
        let t = stratify(&hs, &scheme, opts).unwrap();
        assert_eq!(t.strata.len(), 2);
        assert_eq!(t.strata[1].key, vec!["other".to_string()]);
        assert_eq!(t.strata[1].count, 2);
        assert!(!t.strata[1].thin);
    }

    #[test]
    fn stratum_denominator_flag() {
        let hs = [hh(1, 1, "a", 0, 2), hh(2, 1, "a", 0, 4), hh(3, 2, "a", 0, 10), hh(4, 2, "a", 0, 10)];
        let scheme = StratificationScheme::from_names("size").unwrap();
        let opts = SmithOptions {
            cv_denominator: CvDenominator::Stratum,
            ..Default::default()
        };
        let t = stratify(&hs, &scheme, opts).unwrap();
        assert!((t.strata[0].cv - 1.0 / 3.0).abs() < 1e-15);
        let t = stratify(&hs, &scheme, SmithOptions::default()).unwrap();
        assert!((t.strata[0].cv - 1.0 / 6.5).abs() < 1e-15);
    }

    #[test]
    fn ceil_ignores_fuzz() {
        assert_eq!(ceil_count(41.000_000_000_01), 41);
        assert_eq!(ceil_count(41.2), 42);
        assert_eq!(ceil_count(0.0), 0);
    }
}
