//! Core-augment survey design: a uniform core sampling rate in every region,
//! plus per-region augment samples sized by the stratified allocator.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{HouseholdRecord, Mode, TripRecord};
use crate::smith::{plan_from_table, stratify, AugmentPlan, SmithOptions, StratificationScheme};
use crate::stats::SizeSpec;

pub const DEFAULT_CORE_RATE: f64 = 0.04;

/// Households an augment sample targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cohort {
    All,
    /// Households with at least one trip by `mode` (choice-based).
    ModeUsers { mode: Mode },
    ZeroVehicle,
}

impl Cohort {
    fn select(
        &self,
        households: &[HouseholdRecord],
        trips: &[TripRecord],
    ) -> Vec<HouseholdRecord> {
        match self {
            Cohort::All => households.to_vec(),
            Cohort::ZeroVehicle => households.iter().filter(|h| h.vehicles == 0).cloned().collect(),
            Cohort::ModeUsers { mode } => {
                let users: HashSet<&str> = trips
                    .iter()
                    .filter(|t| t.mode == *mode)
                    .map(|t| t.household_id.as_str())
                    .collect();
                households
                    .iter()
                    .filter(|h| users.contains(h.household_id.as_str()))
                    .cloned()
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentTarget {
    pub name: String,
    pub cohort: Cohort,
    pub scheme: StratificationScheme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionProfile {
    pub name: String,
    pub household_population: u64,
    /// Microdata with `trip_count` already linked.
    pub households: Vec<HouseholdRecord>,
    pub trips: Vec<TripRecord>,
    pub targets: Vec<AugmentTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreSize {
    pub region: String,
    pub household_population: u64,
    pub core_rate: f64,
    pub core_unrounded: f64,
    pub core_size: u64,
}

/// How augment samples count against the core sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapPolicy {
    /// Augments are drawn on top of the core.
    #[default]
    Additive,
    /// Subtract the core's expected coverage of the cohort, floored at 0.
    CreditCore,
}

impl FromStr for OverlapPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(Self::Additive),
            "credit-core" => Ok(Self::CreditCore),
            other => Err(Error::Config(format!(
                "unknown overlap policy '{other}' (expected additive or credit-core)"
            ))),
        }
    }
}

impl fmt::Display for OverlapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Additive => "additive",
            Self::CreditCore => "credit-core",
        })
    }
}

/// `ceil(core_rate × population)` per region. The core is meant to be drawn
/// by stratified random sampling.
pub fn plan_core(regions: &[RegionProfile], core_rate: f64) -> Result<Vec<CoreSize>> {
    if !(core_rate > 0.0 && core_rate < 1.0) {
        return Err(Error::Domain(format!("core rate must lie in (0, 1), got {core_rate}")));
    }
    regions
        .iter()
        .map(|r| {
            if r.household_population < 1 {
                return Err(Error::Validation(format!(
                    "region {} has no households",
                    r.name
                )));
            }
            let core_unrounded = core_rate * r.household_population as f64;
            Ok(CoreSize {
                region: r.name.clone(),
                household_population: r.household_population,
                core_rate,
                core_unrounded,
                core_size: core_unrounded.ceil() as u64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetPlan {
    pub target: String,
    pub cohort: Cohort,
    /// Weighted share of the region's microdata households in the cohort.
    pub cohort_share: f64,
    pub plan: AugmentPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAugments {
    pub region: String,
    pub plans: Vec<TargetPlan>,
    pub warnings: Vec<String>,
}

/// One allocator plan per target, in target order. Empty cohorts are
/// skipped with a warning.
pub fn plan_augment(region: &RegionProfile, spec: &SizeSpec, opts: SmithOptions) -> Result<RegionAugments> {
    let total_weight: f64 = region.households.iter().map(|h| h.weight).sum();
    let mut out = RegionAugments {
        region: region.name.clone(),
        plans: Vec::new(),
        warnings: Vec::new(),
    };
    for target in &region.targets {
        let cohort = target.cohort.select(&region.households, &region.trips);
        if cohort.is_empty() {
            out.warnings.push(format!(
                "target {}: cohort {:?} is empty in region {}; skipped",
                target.name, target.cohort, region.name
            ));
            continue;
        }
        let share = cohort.iter().map(|h| h.weight).sum::<f64>() / total_weight;
        let table = stratify(&cohort, &target.scheme, opts)?;
        let plan = plan_from_table(&table, spec, region.household_population as f64)?;
        out.plans.push(TargetPlan {
            target: target.name.clone(),
            cohort: target.cohort.clone(),
            cohort_share: share,
            plan,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentContribution {
    pub target: String,
    pub required: u64,
    pub core_credit: f64,
    pub contribution: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPlan {
    pub region: String,
    pub household_population: u64,
    pub core_size: u64,
    pub augments: Vec<AugmentContribution>,
    pub total: u64,
    pub effective_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreAugmentPlan {
    pub core_rate: f64,
    pub core_method: String,
    pub overlap_policy: OverlapPolicy,
    pub regions: Vec<RegionPlan>,
    pub study_population: u64,
    pub study_total: u64,
    pub study_effective_rate: f64,
    pub notes: Vec<String>,
}

/// Merge core sizes with augment plans region by region.
pub fn combine_plan(
    core: &[CoreSize],
    augments: &[RegionAugments],
    policy: OverlapPolicy,
) -> Result<CoreAugmentPlan> {
    let core_rate = core.first().map_or(DEFAULT_CORE_RATE, |c| c.core_rate);
    let mut regions = Vec::with_capacity(core.len());
    for c in core {
        let aug = augments.iter().filter(|a| a.region == c.region).collect::<Vec<_>>();
        if aug.len() > 1 {
            return Err(Error::Validation(format!("region {} planned twice", c.region)));
        }
        let contributions: Vec<AugmentContribution> = aug
            .first()
            .map(|a| {
                a.plans
                    .iter()
                    .map(|tp| {
                        let required = tp.plan.final_total_rounded;
                        let core_credit = match policy {
                            OverlapPolicy::Additive => 0.0,
                            OverlapPolicy::CreditCore => c.core_size as f64 * tp.cohort_share,
                        };
                        let contribution = (required as f64 - core_credit).max(0.0).ceil() as u64;
                        AugmentContribution {
                            target: tp.target.clone(),
                            required,
                            core_credit,
                            contribution,
                        }
                    })
                    .collect()
            })
            .unwrap_or_default();
        let total = c.core_size + contributions.iter().map(|a| a.contribution).sum::<u64>();
        regions.push(RegionPlan {
            region: c.region.clone(),
            household_population: c.household_population,
            core_size: c.core_size,
            augments: contributions,
            total,
            effective_rate: total as f64 / c.household_population as f64,
        });
    }
    if let Some(a) = augments.iter().find(|a| !core.iter().any(|c| c.region == a.region)) {
        return Err(Error::Validation(format!("augment for unknown region {}", a.region)));
    }
    let study_population = regions.iter().map(|r| r.household_population).sum();
    let study_total = regions.iter().map(|r| r.total).sum();
    Ok(CoreAugmentPlan {
        core_rate,
        core_method: "stratified-random".into(),
        overlap_policy: policy,
        study_effective_rate: if study_population > 0 {
            study_total as f64 / study_population as f64
        } else {
            0.0
        },
        regions,
        study_population,
        study_total,
        notes: vec![
            "expansion weights for choice-based augments are not reconciled with core weights".into(),
        ],
    })
}

/// Core sizes, augment plans and their combination. Regions are planned in
/// parallel and merged in input order.
pub fn plan_survey(
    regions: &[RegionProfile],
    core_rate: f64,
    spec: &SizeSpec,
    opts: SmithOptions,
    policy: OverlapPolicy,
) -> Result<(CoreAugmentPlan, Vec<RegionAugments>)> {
    let core = plan_core(regions, core_rate)?;
    let augments = regions
        .par_iter()
        .map(|r| plan_augment(r, spec, opts))
        .collect::<Result<Vec<_>>>()?;
    let plan = combine_plan(&core, &augments, policy)?;
    Ok((plan, augments))
}
