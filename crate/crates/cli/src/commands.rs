use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hts_core::io::{self, FixtureManifest};
use hts_core::montecarlo::{
    self, cell_nearest, simulate_sampling, synth_population, CellSelector, SimulationResult, SynthConfig,
};
use hts_core::od::{self, build_od_matrix, cell_required_rates, csv_field, peak_od, SweepRow};
use hts_core::planner::{plan_survey, OverlapPolicy};
use hts_core::rmse::{audit, RmseMode};
use hts_core::smith::{smith_plan, AugmentPlan, CvDenominator, SmithOptions, StratificationScheme};
use hts_core::stats::{interchange_rate, log_grid, rate_curve, rate_curve_csv};
use hts_core::{Dispersion, Mode, Partition, Period, Purpose, SizeSpec, Slice};

use crate::report::{opt, pct, report, to_json, Sink};

fn spec(confidence: f64, e: f64) -> Result<SizeSpec> {
    Ok(SizeSpec::new(confidence, e)?)
}

#[derive(Args, Serialize)]
pub struct RatesArgs {
    /// Coefficients of variation.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.75,1.0,1.25,1.5")]
    cv: Vec<f64>,
    /// Confidence levels.
    #[arg(long, value_delimiter = ',', default_value = "0.90,0.95")]
    confidence: Vec<f64>,
    /// Relative margin of error.
    #[arg(long = "e", default_value_t = 0.25)]
    margin_of_error: f64,
    #[arg(long, default_value_t = 100)]
    n_min: u64,
    #[arg(long, default_value_t = 1_000_000)]
    n_max: u64,
    /// Grid points per decade of trip totals.
    #[arg(long, default_value_t = 8)]
    per_decade: u32,
    /// Evaluate explicit trip totals instead of the log grid.
    #[arg(long, value_delimiter = ',')]
    trips: Vec<u64>,
}

pub fn rates(a: RatesArgs, sink: &Sink) -> Result<()> {
    let grid = if a.trips.is_empty() {
        if a.n_min < 1 || a.n_min >= a.n_max || a.per_decade < 1 {
            return Err(hts_core::Error::Config("need 1 <= n-min < n-max and per-decade >= 1".into()).into());
        }
        log_grid(a.n_min, a.n_max, a.per_decade)
    } else {
        a.trips.clone()
    };
    let points = rate_curve(&grid, &a.cv, &a.confidence, a.margin_of_error)?;
    sink.write("rates.csv", &rate_curve_csv(&points))?;
    sink.write("rates.json", &report("rates", &a, &points)?)?;
    if !a.trips.is_empty() {
        for p in &points {
            println!(
                "N={} cv={} confidence={} e={}: {}",
                p.trip_total,
                p.cv,
                p.confidence,
                p.margin_of_error,
                pct(p.required_rate)
            );
        }
    } else {
        println!("{} curves, {} points", a.cv.len() * a.confidence.len(), points.len());
    }
    Ok(())
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum CvDenominatorArg {
    Overall,
    Stratum,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum DispersionArg {
    Population,
    Sample,
}

#[derive(Args, Serialize)]
pub struct AllocatorFlags {
    /// Denominator of stratum CVs.
    #[arg(long, value_enum, default_value = "overall")]
    cv_denominator: CvDenominatorArg,
    #[arg(long, value_enum, default_value = "population")]
    dispersion: DispersionArg,
    /// Pool strata with fewer than two households.
    #[arg(long)]
    merge_thin: bool,
}

impl AllocatorFlags {
    fn options(&self) -> SmithOptions {
        SmithOptions {
            cv_denominator: match self.cv_denominator {
                CvDenominatorArg::Overall => CvDenominator::Overall,
                CvDenominatorArg::Stratum => CvDenominator::Stratum,
            },
            dispersion: match self.dispersion {
                DispersionArg::Population => Dispersion::Population,
                DispersionArg::Sample => Dispersion::Sample,
            },
            merge_thin: self.merge_thin,
        }
    }
}

#[derive(Args, Serialize)]
pub struct SpecFlags {
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long = "e", default_value_t = 0.05)]
    margin_of_error: f64,
}

impl SpecFlags {
    fn spec(&self) -> Result<SizeSpec> {
        spec(self.confidence, self.margin_of_error)
    }
}

#[derive(Args, Serialize)]
pub struct SurveyInput {
    #[arg(long)]
    households: PathBuf,
    #[arg(long)]
    trips: PathBuf,
}

impl SurveyInput {
    fn load(&self) -> Result<(Vec<hts_core::HouseholdRecord>, Vec<hts_core::TripRecord>, Vec<String>)> {
        let (hh, t) = io::ingest_survey(&self.households, &self.trips)?;
        for w in &t.warnings {
            log::warn!("{w}");
        }
        Ok((hh, t.trips, t.warnings))
    }
}

#[derive(Args, Serialize)]
pub struct SmithArgs {
    #[command(flatten)]
    input: SurveyInput,
    /// Comma-separated attributes with default classes.
    #[arg(long, default_value = "size,income,vehicles", conflicts_with = "scheme_file")]
    scheme: String,
    /// JSON stratification scheme with explicit classes.
    #[arg(long)]
    scheme_file: Option<PathBuf>,
    #[command(flatten)]
    spec: SpecFlags,
    #[command(flatten)]
    allocator: AllocatorFlags,
}

fn load_scheme(names: &str, file: Option<&PathBuf>) -> Result<StratificationScheme> {
    match file {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| hts_core::Error::Config(format!("{}: {e}", p.display())).into())
        }
        None => Ok(StratificationScheme::from_names(names)?),
    }
}

fn plan_csv(plan: &AugmentPlan) -> String {
    let mut out = String::from("stratum,count,frequency,mean,std,cv,weighted_cv,weight,optimal,expected,final,final_rounded\n");
    for s in &plan.strata {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&s.key.join("|")),
            s.count,
            s.frequency,
            s.mean,
            s.std,
            s.cv,
            s.weighted_cv,
            s.weight,
            s.optimal,
            s.expected,
            s.final_required,
            s.final_rounded
        ));
    }
    out
}

#[derive(Serialize)]
struct SmithResult<'a> {
    resolved_scheme: hts_core::smith::ResolvedScheme,
    plan: &'a AugmentPlan,
    ingest_warnings: Vec<String>,
}

pub fn smith(a: SmithArgs, sink: &Sink) -> Result<()> {
    let (hh, _, ingest_warnings) = a.input.load()?;
    let scheme = load_scheme(&a.scheme, a.scheme_file.as_ref())?;
    let plan = smith_plan(&hh, &scheme, &a.spec.spec()?, a.allocator.options())?;
    for w in &plan.warnings {
        log::warn!("{w}");
    }
    let result = SmithResult {
        resolved_scheme: scheme.resolve(&hh)?,
        plan: &plan,
        ingest_warnings,
    };
    sink.write("smith_plan.json", &report("smith", &a, &result)?)?;
    sink.write("smith_plan.csv", &plan_csv(&plan))?;
    println!(
        "{} strata, C*={:.4}, F={:.1}, rho={:.4}, final={} households ({})",
        plan.strata.len(),
        plan.c_star,
        plan.initial_size,
        plan.rho,
        plan.final_total_rounded,
        pct(plan.sampling_rate)
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct RmseArgs {
    #[command(flatten)]
    input: SurveyInput,
    /// Reference marginals CSV: variable,category,value[,geography].
    #[arg(long)]
    reference: PathBuf,
    /// Audit one geography only.
    #[arg(long)]
    geography: Option<String>,
    /// Average squared errors over all categories instead of per variable.
    #[arg(long)]
    pooled: bool,
}

pub fn rmse(a: RmseArgs, sink: &Sink) -> Result<()> {
    let (hh, trips, _) = a.input.load()?;
    let refs = io::ingest_marginals(&a.reference)?;
    let mode = if a.pooled { RmseMode::Pooled } else { RmseMode::Nested };
    let reports = audit(&hh, &trips, &refs, a.geography.as_deref(), mode)?;
    sink.write("rmse.json", &report("rmse", &a, &reports)?)?;
    for r in &reports {
        println!(
            "{}: percent RMSE {:.4}",
            r.geography.as_deref().unwrap_or("study area"),
            r.overall_percent_rmse
        );
    }
    Ok(())
}

#[derive(Args, Serialize)]
pub struct SliceFlags {
    #[arg(long)]
    period: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    purpose: Option<String>,
}

impl SliceFlags {
    fn slice(&self) -> Result<Slice> {
        let cfg = |e: hts_core::Error| hts_core::Error::Config(e.to_string());
        Ok(Slice {
            period: self.period.as_deref().map(str::parse::<Period>).transpose().map_err(cfg)?,
            mode: self.mode.as_deref().map(str::parse::<Mode>).transpose().map_err(cfg)?,
            purpose: self.purpose.as_deref().map(str::parse::<Purpose>).transpose().map_err(cfg)?,
        })
    }
}

#[derive(Args, Serialize)]
pub struct OdArgs {
    /// Trip CSV; omit with --peak-fixture.
    #[arg(long, required_unless_present = "peak_fixture")]
    trips: Option<PathBuf>,
    /// zone,region CSV. Without it every zone is its own unit.
    #[arg(long)]
    zone_map: Option<PathBuf>,
    /// Use the bundled regional peak-period matrix instead of trips.
    #[arg(long, conflicts_with_all = ["trips", "zone_map"])]
    peak_fixture: bool,
    #[command(flatten)]
    slice: SliceFlags,
    /// Trip CV assumed for every cell.
    #[arg(long, default_value_t = 1.0)]
    cv: f64,
    #[arg(long, default_value_t = 0.90)]
    confidence: f64,
    #[arg(long = "e", default_value_t = 0.25)]
    margin_of_error: f64,
}

#[derive(Serialize)]
struct OdResult {
    matrix: od::ODMatrix,
    total: f64,
    cell_cv: Option<f64>,
    rates: od::RateMatrix,
    marginal_checks: Vec<od::MarginalCheck>,
}

pub fn od(a: OdArgs, sink: &Sink) -> Result<()> {
    let spec = spec(a.confidence, a.margin_of_error)?;
    let (matrix, checks) = if a.peak_fixture {
        let f = peak_od()?;
        f.discrepancies(200.0);
        (f.matrix.clone(), f.marginal_checks())
    } else {
        let path = a.trips.as_ref().expect("clap enforces trips");
        let trips = io::ingest_trips(path, None)?.trips;
        let partition = match &a.zone_map {
            Some(p) => io::ingest_partition(p)?,
            None => {
                let zones: BTreeSet<&str> = trips
                    .iter()
                    .flat_map(|t| [t.origin_zone.as_str(), t.destination_zone.as_str()])
                    .collect();
                Partition::identity(&zones.into_iter().collect::<Vec<_>>())
            }
        };
        (build_od_matrix(&trips, &partition, a.slice.slice()?)?, Vec::new())
    };
    let rates = cell_required_rates(&matrix, a.cv, &spec)?;
    sink.write("od_matrix.csv", &matrix.to_csv())?;
    sink.write("od_rates.csv", &rates.to_csv())?;
    let result = OdResult {
        total: matrix.total(),
        cell_cv: matrix.cell_cv().ok(),
        matrix,
        rates,
        marginal_checks: checks,
    };
    sink.write("od.json", &report("od", &a, &result)?)?;
    let available = result.rates.rates.iter().flatten().flatten().count();
    println!(
        "{} units, {} trips, {} cells with a rate",
        result.matrix.len(),
        result.total,
        available
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    input: SurveyInput,
    #[command(flatten)]
    spec: SpecFlags,
    #[command(flatten)]
    allocator: AllocatorFlags,
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("level,categories,c_star,cv_max,F,rho,final_total,sampling_rate,error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.level),
            r.categories,
            opt(r.c_star),
            opt(r.cv_max),
            opt(r.initial_size),
            opt(r.rho),
            r.final_total_rounded.map(|v| v.to_string()).unwrap_or_default(),
            opt(r.sampling_rate),
            csv_field(r.error.as_deref().unwrap_or(""))
        ));
    }
    out
}

pub fn sweep(a: SweepArgs, sink: &Sink) -> Result<()> {
    let (hh, trips, _) = a.input.load()?;
    let rows = od::disaggregation_sweep(&hh, &trips, &a.spec.spec()?, a.allocator.options())?;
    sink.write("sweep.json", &report("sweep", &a, &rows)?)?;
    sink.write("sweep.csv", &sweep_csv(&rows))?;
    for r in &rows {
        match (r.sampling_rate, &r.error) {
            (Some(rate), _) => println!("{:<26} {}", r.level, pct(rate)),
            (None, Some(e)) => println!("{:<26} error: {e}", r.level),
            _ => {}
        }
    }
    Ok(())
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PolicyArg {
    Additive,
    CreditCore,
}

#[derive(Args, Serialize)]
pub struct PlanArgs {
    /// Plan config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's overlap policy.
    #[arg(long, value_enum)]
    overlap_policy: Option<PolicyArg>,
    /// Override the config's core rate.
    #[arg(long)]
    core_rate: Option<f64>,
    #[command(flatten)]
    allocator: AllocatorFlags,
}

pub fn plan(a: PlanArgs, sink: &Sink) -> Result<()> {
    let (mut config, regions) = io::load_plan_config(&a.config)?;
    if let Some(p) = a.overlap_policy {
        config.overlap_policy = match p {
            PolicyArg::Additive => OverlapPolicy::Additive,
            PolicyArg::CreditCore => OverlapPolicy::CreditCore,
        };
    }
    if let Some(r) = a.core_rate {
        config.core_rate = r;
    }
    let (plan, augments) = plan_survey(
        &regions,
        config.core_rate,
        &config.spec,
        a.allocator.options(),
        config.overlap_policy,
    )?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        args: &'a PlanArgs,
        plan_config: &'a io::PlanConfig,
    }
    #[derive(Serialize)]
    struct PlanResult<'a> {
        plan: &'a hts_core::planner::CoreAugmentPlan,
        augments: &'a [hts_core::planner::RegionAugments],
    }
    let resolved = Resolved {
        args: &a,
        plan_config: &config,
    };
    sink.write(
        "plan.json",
        &report("plan", &resolved, &PlanResult { plan: &plan, augments: &augments })?,
    )?;
    let mut csv = String::from("region,household_population,core_size,augment_total,total,effective_rate\n");
    for r in &plan.regions {
        let aug: u64 = r.augments.iter().map(|x| x.contribution).sum();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_field(&r.region),
            r.household_population,
            r.core_size,
            aug,
            r.total,
            r.effective_rate
        ));
    }
    csv.push_str(&format!(
        "study area,{},{},{},{},{}\n",
        plan.study_population,
        plan.regions.iter().map(|r| r.core_size).sum::<u64>(),
        plan.study_total - plan.regions.iter().map(|r| r.core_size).sum::<u64>(),
        plan.study_total,
        plan.study_effective_rate
    ));
    sink.write("plan.csv", &csv)?;
    for r in &plan.regions {
        println!("{}: {} households ({})", r.region, r.total, pct(r.effective_rate));
    }
    println!("study area: {} households ({})", plan.study_total, pct(plan.study_effective_rate));
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    SmallCity,
    BigCity,
    CommuterAutoPeak,
    Coverage,
}

impl Preset {
    fn config(self, seed: u64) -> SynthConfig {
        match self {
            Preset::SmallCity => SynthConfig::small_city(seed),
            Preset::BigCity => SynthConfig::big_city(seed),
            Preset::CommuterAutoPeak => montecarlo::commuter_auto_peak(seed).0,
            Preset::Coverage => montecarlo::coverage_population(seed),
        }
    }

    fn default_slice(self) -> Slice {
        match self {
            Preset::CommuterAutoPeak => montecarlo::commuter_auto_peak(0).1,
            _ => Slice::default(),
        }
    }

    fn token(self) -> &'static str {
        match self {
            Preset::SmallCity => "small-city",
            Preset::BigCity => "big-city",
            Preset::CommuterAutoPeak => "commuter-auto-peak",
            Preset::Coverage => "coverage",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Zone,
    #[default]
    Region,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SelectorConfig {
    #[serde(default)]
    level: Level,
    #[serde(default)]
    slice: Option<Slice>,
    /// Explicit (origin, destination) pairs.
    #[serde(default)]
    cells: Option<Vec<(String, String)>>,
    /// Pick the zone cell whose total is closest to this many trips.
    #[serde(default)]
    nearest: Option<f64>,
    #[serde(default)]
    min_total: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PopulationConfig {
    Preset { preset: Preset, seed: u64 },
    Explicit(SynthConfig),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    population: PopulationConfig,
    #[serde(default)]
    rates: Vec<f64>,
    /// Also run at each selected cell's analytic rate.
    #[serde(default)]
    analytic_rate: bool,
    replications: usize,
    spec: SizeSpec,
    #[serde(default)]
    selector: SelectorConfig,
    #[serde(default)]
    seed: u64,
}

#[derive(Args, Serialize)]
pub struct SimulateArgs {
    /// Simulation config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthetic population preset, when no config is given.
    #[arg(long, value_enum, required_unless_present = "config")]
    preset: Option<Preset>,
    /// Population seed for --preset.
    #[arg(long, default_value_t = 1)]
    population_seed: u64,
    /// Sampling rates.
    #[arg(long, value_delimiter = ',')]
    rate: Vec<f64>,
    /// Run at the selected cell's analytic rate.
    #[arg(long)]
    analytic_rate: bool,
    #[arg(long)]
    replications: Option<usize>,
    /// Master seed for sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Select the zone cell closest to this many trips.
    #[arg(long)]
    nearest: Option<f64>,
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long = "e")]
    margin_of_error: Option<f64>,
}

impl SimulateArgs {
    fn resolve(&self) -> Result<SimulateConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str::<SimulateConfig>(&text)
                    .map_err(|e| hts_core::Error::Config(format!("{}: {e}", p.display())))?
            }
            None => SimulateConfig {
                population: PopulationConfig::Preset {
                    preset: self.preset.expect("clap enforces preset"),
                    seed: self.population_seed,
                },
                rates: Vec::new(),
                analytic_rate: false,
                replications: 200,
                spec: SizeSpec::new(0.9, 0.25)?,
                selector: SelectorConfig::default(),
                seed: 0,
            },
        };
        if let (Some(preset), Some(_)) = (self.preset, &self.config) {
            c.population = PopulationConfig::Preset {
                preset,
                seed: self.population_seed,
            };
        }
        if !self.rate.is_empty() {
            c.rates = self.rate.clone();
        }
        c.analytic_rate |= self.analytic_rate;
        if let Some(r) = self.replications {
            c.replications = r;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if self.nearest.is_some() {
            c.selector.nearest = self.nearest;
            c.selector.level = Level::Zone;
        }
        if self.confidence.is_some() || self.margin_of_error.is_some() {
            c.spec = SizeSpec::new(
                self.confidence.unwrap_or(c.spec.confidence()),
                self.margin_of_error.unwrap_or(c.spec.margin_of_error()),
            )?;
        }
        if c.rates.is_empty() && !c.analytic_rate {
            bail!(hts_core::Error::Config("give at least one rate or ask for the analytic rate".into()));
        }
        Ok(c)
    }
}

#[derive(Serialize)]
struct SimulateOutput {
    population_households: usize,
    population_trips: usize,
    realized_cv: f64,
    runs: Vec<SimulationResult>,
}

pub fn simulate(a: SimulateArgs, sink: &Sink) -> Result<()> {
    let c = a.resolve()?;
    let (synth, preset_slice) = match &c.population {
        PopulationConfig::Preset { preset, seed } => (preset.config(*seed), preset.default_slice()),
        PopulationConfig::Explicit(s) => (s.clone(), Slice::default()),
    };
    let pop = synth_population(&synth)?;
    let slice = c.selector.slice.unwrap_or(preset_slice);
    let partition = match c.selector.level {
        Level::Zone => pop.zone_partition(),
        Level::Region => pop.regions.clone(),
    };
    let selector = match (c.selector.nearest, &c.selector.cells) {
        (Some(_), Some(_)) => bail!(hts_core::Error::Config("give cells or nearest, not both".into())),
        (Some(target), None) => {
            let mut s = cell_nearest(&pop, slice, target)?;
            if c.selector.level == Level::Region {
                bail!(hts_core::Error::Config("nearest selects zone cells; set level to zone".into()));
            }
            s.min_total = c.selector.min_total.unwrap_or(1.0);
            s
        }
        (None, cells) => CellSelector {
            partition,
            slice,
            cells: cells.clone(),
            min_total: c.selector.min_total.unwrap_or(1.0),
        },
    };
    let mut rates = c.rates.clone();
    if c.analytic_rate {
        let probe = simulate_sampling(&pop, 1.0, 1, &c.spec, &selector, c.seed)?;
        for cell in &probe.cells {
            rates.push(interchange_rate(cell.true_total.round() as u64, cell.effective_cv, &c.spec)?);
        }
    }
    let runs = rates
        .iter()
        .enumerate()
        .map(|(i, &r)| simulate_sampling(&pop, r, c.replications, &c.spec, &selector, c.seed.wrapping_add(i as u64)))
        .collect::<hts_core::Result<Vec<_>>>()?;
    for r in &runs {
        for w in &r.warnings {
            log::warn!("{w}");
        }
    }
    let out = SimulateOutput {
        population_households: pop.households.len(),
        population_trips: pop.trips.len(),
        realized_cv: pop.realized_cv,
        runs,
    };
    sink.write("simulate.json", &report("simulate", &c, &out)?)?;
    let mut curve = String::from("rate,sample_size,replications,seed,coverage,mape\n");
    let mut cells = String::from(
        "rate,origin,destination,true_total,mean_estimate,std_estimate,effective_cv,analytic_rate,empirical_coverage,mape\n",
    );
    for r in &out.runs {
        curve.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.rate, r.sample_size, r.replications, r.seed, r.coverage, r.mape
        ));
        for x in &r.cells {
            cells.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.rate,
                csv_field(&x.origin),
                csv_field(&x.destination),
                x.true_total,
                x.mean_estimate,
                x.std_estimate,
                x.effective_cv,
                x.analytic_rate,
                x.empirical_coverage,
                x.mape
            ));
        }
    }
    sink.write("simulate_curve.csv", &curve)?;
    sink.write("simulate_cells.csv", &cells)?;
    println!("seed {}", c.seed);
    for r in &out.runs {
        println!(
            "rate {}: {} cells, coverage {:.4}, MAPE {:.2}%",
            pct(r.rate),
            r.cells.len(),
            r.coverage,
            r.mape
        );
    }
    Ok(())
}

#[derive(Subcommand)]
pub enum FixtureCmd {
    /// The bundled regional peak-period O-D matrix, as shipped.
    PeakOd {
        /// Print to stdout instead of writing a file.
        #[arg(long)]
        stdout: bool,
    },
    /// Generate a synthetic household and trip population.
    Synth {
        #[arg(long, value_enum, default_value = "small-city")]
        preset: Preset,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Explicit generator config JSON instead of a preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// File name prefix; defaults to the preset name.
        #[arg(long)]
        prefix: Option<String>,
    },
}

pub fn fixture(c: FixtureCmd, sink: &Sink) -> Result<()> {
    match c {
        FixtureCmd::PeakOd { stdout } => {
            if stdout {
                print!("{}", od::PEAK_OD_CSV);
            } else {
                let p = sink.write("peak_region_od.csv", od::PEAK_OD_CSV)?;
                println!("{}", p.display());
            }
        }
        FixtureCmd::Synth {
            preset,
            seed,
            config,
            prefix,
        } => {
            let cfg = match &config {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<SynthConfig>(&text)
                        .map_err(|e| hts_core::Error::Config(format!("{}: {e}", p.display())))?
                }
                None => preset.config(seed),
            };
            let pop = synth_population(&cfg)?;
            let prefix = prefix.unwrap_or_else(|| {
                if config.is_some() { "synthetic" } else { preset.token() }.replace('-', "_")
            });
            sink.write(&format!("{prefix}_households.csv"), &io::emit_households(&pop.households))?;
            sink.write(&format!("{prefix}_trips.csv"), &io::emit_trips(&pop.trips))?;
            sink.write(&format!("{prefix}_manifest.json"), &to_json(&FixtureManifest::of(&pop))?)?;
            println!(
                "{} households, {} trips, household trip CV {:.4}",
                pop.households.len(),
                pop.trips.len(),
                pop.realized_cv
            );
        }
    }
    Ok(())
}
