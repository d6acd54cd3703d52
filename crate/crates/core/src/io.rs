//! CSV and JSON readers and writers for survey microdata, reference
//! marginals, fixture manifests and plan configs.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::{Population, SynthConfig};
use crate::od::{csv_field, Partition};
use crate::planner::{AugmentTarget, OverlapPolicy, RegionProfile, DEFAULT_CORE_RATE};
use crate::records::{link_trips, HouseholdRecord, Mode, Period, Purpose, TripRecord};
use crate::rmse::{Category, MarginalTable, ReferenceSet};
use crate::stats::SizeSpec;

pub const HOUSEHOLD_HEADER: &str = "household_id,region,zone,size,income_class,vehicles,weight";
pub const TRIP_HEADER: &str = "household_id,origin_zone,destination_zone,mode,purpose,depart_hhmm,weight";

struct Columns {
    path: String,
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(path: &str, headers: &csv::StringRecord, required: &[&str]) -> Result<Self> {
        let index: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        let missing: Vec<&str> = required.iter().copied().filter(|c| !index.contains_key(*c)).collect();
        if !missing.is_empty() {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                message: format!("missing columns: {}", missing.join(", ")),
            });
        }
        Ok(Self {
            path: path.into(),
            index,
        })
    }

    fn err(&self, line: u64, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn get<'r>(&self, rec: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        self.index.get(name).and_then(|&i| rec.get(i)).map(str::trim)
    }

    fn text(&self, rec: &csv::StringRecord, line: u64, name: &str) -> Result<String> {
        match self.get(rec, name) {
            Some(v) if !v.is_empty() => Ok(v.to_string()),
            _ => Err(self.err(line, format!("empty {name}"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, rec: &csv::StringRecord, line: u64, name: &str) -> Result<T> {
        let v = self.text(rec, line, name)?;
        v.parse()
            .map_err(|_| self.err(line, format!("{name}: cannot parse '{v}'")))
    }

    /// Optional positive weight, 1 when the column or value is absent.
    fn weight(&self, rec: &csv::StringRecord, line: u64) -> Result<f64> {
        match self.get(rec, "weight") {
            None | Some("") => Ok(1.0),
            Some(v) => match v.parse::<f64>() {
                Ok(w) if w > 0.0 && w.is_finite() => Ok(w),
                _ => Err(self.err(line, format!("weight must be a positive number, got '{v}'"))),
            },
        }
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn records<'a, R: Read>(
    path: &str,
    rdr: &'a mut csv::Reader<R>,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + 'a {
    let path = path.to_string();
    rdr.records().map(move |r| {
        r.map(|rec| (rec.position().map_or(0, |p| p.line()), rec))
            .map_err(|e| Error::Parse {
                path: path.clone(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })
    })
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Households from any reader; `name` labels errors.
pub fn read_households<R: Read>(r: R, name: &str) -> Result<Vec<HouseholdRecord>> {
    let mut rdr = reader(r);
    let cols = Columns::new(
        name,
        rdr.headers().map_err(|e| Error::Io(e.to_string()))?,
        &["household_id", "region", "zone", "size", "income_class", "vehicles"],
    )?;
    let mut out = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for row in records(name, &mut rdr) {
        let (line, rec) = row?;
        let id = cols.text(&rec, line, "household_id")?;
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(Error::Validation(format!(
                "{name}: duplicate household_id '{id}' on lines {first} and {line}"
            )));
        }
        let size: u32 = cols.parse(&rec, line, "size")?;
        if size < 1 {
            return Err(cols.err(line, "size must be at least 1"));
        }
        out.push(HouseholdRecord {
            region: cols.text(&rec, line, "region")?,
            zone: cols.text(&rec, line, "zone")?,
            size,
            income_class: cols.text(&rec, line, "income_class")?,
            vehicles: cols.parse(&rec, line, "vehicles")?,
            weight: cols.weight(&rec, line)?,
            trip_count: 0,
            household_id: id,
        });
    }
    Ok(out)
}

pub fn ingest_households(path: &Path) -> Result<Vec<HouseholdRecord>> {
    read_households(open(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripIngest {
    pub trips: Vec<TripRecord>,
    /// Household ids referenced by trips but absent from the household file.
    pub orphans: Vec<String>,
    pub warnings: Vec<String>,
}

/// Trips from any reader. Period comes from the departure time. When
/// `households` is given, their `trip_count` is filled in and unknown ids
/// are reported as orphans.
pub fn read_trips<R: Read>(
    r: R,
    name: &str,
    households: Option<&mut [HouseholdRecord]>,
) -> Result<TripIngest> {
    let mut rdr = reader(r);
    let cols = Columns::new(
        name,
        rdr.headers().map_err(|e| Error::Io(e.to_string()))?,
        &["household_id", "origin_zone", "destination_zone", "mode", "purpose", "depart_hhmm"],
    )?;
    let mut trips = Vec::new();
    for row in records(name, &mut rdr) {
        let (line, rec) = row?;
        let token = |field: &str| cols.text(&rec, line, field);
        let mode: Mode = token("mode")?
            .parse()
            .map_err(|e: Error| cols.err(line, e.to_string()))?;
        let purpose: Purpose = token("purpose")?
            .parse()
            .map_err(|e: Error| cols.err(line, e.to_string()))?;
        let raw = token("depart_hhmm")?;
        let depart: u16 = raw
            .parse()
            .ok()
            .filter(|_| raw.len() <= 4 && raw.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| cols.err(line, format!("depart_hhmm: cannot parse '{raw}'")))?;
        let period = Period::from_hhmm(depart).map_err(|e| cols.err(line, e.to_string()))?;
        trips.push(TripRecord {
            household_id: token("household_id")?,
            origin_zone: token("origin_zone")?,
            destination_zone: token("destination_zone")?,
            mode,
            purpose,
            period,
            depart_hhmm: depart,
            weight: cols.weight(&rec, line)?,
        });
    }
    let (orphans, warnings) = match households {
        Some(hh) => {
            let orphans = link_trips(hh, &trips);
            let warnings = if orphans.is_empty() {
                Vec::new()
            } else {
                vec![format!(
                    "{} household ids in {name} have no household record",
                    orphans.len()
                )]
            };
            (orphans, warnings)
        }
        None => (Vec::new(), Vec::new()),
    };
    Ok(TripIngest {
        trips,
        orphans,
        warnings,
    })
}

pub fn ingest_trips(path: &Path, households: Option<&mut [HouseholdRecord]>) -> Result<TripIngest> {
    read_trips(open(path)?, &path.display().to_string(), households)
}

/// Households and linked trips in one call.
pub fn ingest_survey(households: &Path, trips: &Path) -> Result<(Vec<HouseholdRecord>, TripIngest)> {
    let mut hh = ingest_households(households)?;
    let t = ingest_trips(trips, Some(&mut hh))?;
    Ok((hh, t))
}

fn num(x: f64) -> String {
    x.to_string()
}

pub fn emit_households(records: &[HouseholdRecord]) -> String {
    let mut out = String::from(HOUSEHOLD_HEADER);
    out.push('\n');
    for h in records {
        let row = [
            csv_field(&h.household_id),
            csv_field(&h.region),
            csv_field(&h.zone),
            h.size.to_string(),
            csv_field(&h.income_class),
            h.vehicles.to_string(),
            num(h.weight),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn emit_trips(trips: &[TripRecord]) -> String {
    let mut out = String::from(TRIP_HEADER);
    out.push('\n');
    for t in trips {
        let row = [
            csv_field(&t.household_id),
            csv_field(&t.origin_zone),
            csv_field(&t.destination_zone),
            t.mode.to_string(),
            t.purpose.to_string(),
            format!("{:04}", t.depart_hhmm),
            num(t.weight),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Reference marginals: `variable,category,value[,geography]`. A blank or
/// absent geography means the whole study area. Categories keep file order.
pub fn read_marginals<R: Read>(r: R, name: &str) -> Result<ReferenceSet> {
    let mut rdr = reader(r);
    let cols = Columns::new(
        name,
        rdr.headers().map_err(|e| Error::Io(e.to_string()))?,
        &["variable", "category", "value"],
    )?;
    let mut set: ReferenceSet = BTreeMap::new();
    for row in records(name, &mut rdr) {
        let (line, rec) = row?;
        let geo = cols.get(&rec, "geography").filter(|g| !g.is_empty()).map(String::from);
        let variable = cols.text(&rec, line, "variable")?;
        let value: f64 = cols.parse(&rec, line, "value")?;
        if !(value >= 0.0 && value.is_finite()) {
            return Err(cols.err(line, format!("value must be finite and >= 0, got {value}")));
        }
        let cat = Category {
            label: cols.text(&rec, line, "category")?,
            value,
        };
        let tables = set.entry(geo).or_default();
        match tables.iter_mut().find(|t| t.variable == variable) {
            Some(t) => t.categories.push(cat),
            None => tables.push(MarginalTable {
                variable,
                categories: vec![cat],
            }),
        }
    }
    if set.is_empty() {
        return Err(Error::Validation(format!("{name}: no marginals")));
    }
    Ok(set)
}

pub fn ingest_marginals(path: &Path) -> Result<ReferenceSet> {
    read_marginals(open(path)?, &path.display().to_string())
}

pub fn emit_marginals(set: &ReferenceSet) -> String {
    let mut out = String::from("variable,category,value,geography\n");
    for (geo, tables) in set {
        for t in tables {
            for c in &t.categories {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    csv_field(&t.variable),
                    csv_field(&c.label),
                    num(c.value),
                    geo.as_deref().map(csv_field).unwrap_or_default()
                ));
            }
        }
    }
    out
}

/// Zone to region lookup from a `zone,region` CSV. Region order follows
/// first appearance.
pub fn read_partition<R: Read>(r: R, name: &str) -> Result<Partition> {
    let mut rdr = reader(r);
    let cols = Columns::new(
        name,
        rdr.headers().map_err(|e| Error::Io(e.to_string()))?,
        &["zone", "region"],
    )?;
    let mut pairs = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for row in records(name, &mut rdr) {
        let (line, rec) = row?;
        let zone = cols.text(&rec, line, "zone")?;
        if let Some(first) = seen.insert(zone.clone(), line) {
            return Err(Error::Validation(format!(
                "{name}: zone '{zone}' mapped twice, lines {first} and {line}"
            )));
        }
        pairs.push((zone, cols.text(&rec, line, "region")?));
    }
    Ok(Partition::from_pairs(&pairs))
}

pub fn ingest_partition(path: &Path) -> Result<Partition> {
    read_partition(open(path)?, &path.display().to_string())
}

/// Written next to a generated population so ingest can be cross-checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub generator: SynthConfig,
    pub households: usize,
    pub trips: usize,
    pub trips_by_mode: BTreeMap<String, usize>,
    pub realized_cv: f64,
}

impl FixtureManifest {
    pub fn of(pop: &Population) -> Self {
        let mut trips_by_mode: BTreeMap<String, usize> =
            Mode::ALL.iter().map(|m| (m.to_string(), 0)).collect();
        for t in &pop.trips {
            *trips_by_mode.entry(t.mode.to_string()).or_default() += 1;
        }
        Self {
            generator: pop.config.clone(),
            households: pop.households.len(),
            trips: pop.trips.len(),
            trips_by_mode,
            realized_cv: pop.realized_cv,
        }
    }
}

fn default_core_rate() -> f64 {
    DEFAULT_CORE_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub name: String,
    pub household_population: u64,
    /// Paths resolve against the config file's directory.
    pub households: PathBuf,
    pub trips: PathBuf,
    /// Keep only households whose `region` equals this value.
    #[serde(default)]
    pub filter_region: Option<String>,
    #[serde(default)]
    pub targets: Vec<AugmentTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub spec: SizeSpec,
    #[serde(default = "default_core_rate")]
    pub core_rate: f64,
    #[serde(default)]
    pub overlap_policy: OverlapPolicy,
    pub regions: Vec<RegionConfig>,
}

/// Parse a plan config and load each region's microdata.
pub fn load_plan_config(path: &Path) -> Result<(PlanConfig, Vec<RegionProfile>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let config: PlanConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if config.regions.is_empty() {
        return Err(Error::Config("plan config lists no regions".into()));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cache: HashMap<(PathBuf, PathBuf), (Vec<HouseholdRecord>, Vec<TripRecord>)> = HashMap::new();
    let mut profiles = Vec::with_capacity(config.regions.len());
    for rc in &config.regions {
        let key = (base.join(&rc.households), base.join(&rc.trips));
        if !cache.contains_key(&key) {
            let (hh, t) = ingest_survey(&key.0, &key.1)?;
            cache.insert(key.clone(), (hh, t.trips));
        }
        let (hh, trips) = &cache[&key];
        let households: Vec<HouseholdRecord> = hh
            .iter()
            .filter(|h| rc.filter_region.as_ref().is_none_or(|r| &h.region == r))
            .cloned()
            .collect();
        let ids: std::collections::HashSet<&str> = households.iter().map(|h| h.household_id.as_str()).collect();
        profiles.push(RegionProfile {
            name: rc.name.clone(),
            household_population: rc.household_population,
            trips: trips
                .iter()
                .filter(|t| ids.contains(t.household_id.as_str()))
                .cloned()
                .collect(),
            households,
            targets: rc.targets.clone(),
        });
    }
    Ok((config, profiles))
}
