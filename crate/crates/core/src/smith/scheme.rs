use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::HouseholdRecord;

/// Household attribute usable as a stratification variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Size,
    Income,
    Vehicles,
    Region,
    Zone,
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "size" | "household_size" => Ok(Attribute::Size),
            "income" | "income_class" => Ok(Attribute::Income),
            "vehicles" | "vehicle" | "vehicle_class" => Ok(Attribute::Vehicles),
            "region" => Ok(Attribute::Region),
            "zone" => Ok(Attribute::Zone),
            other => Err(Error::Config(format!("unknown stratification attribute '{other}'"))),
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attribute::Size => "size",
            Attribute::Income => "income",
            Attribute::Vehicles => "vehicles",
            Attribute::Region => "region",
            Attribute::Zone => "zone",
        })
    }
}

/// Half-open numeric class `[lo, hi)`; a missing bound is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub label: String,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Bin {
    pub fn new(label: impl Into<String>, lo: Option<f64>, hi: Option<f64>) -> Self {
        Self {
            label: label.into(),
            lo,
            hi,
        }
    }

    fn contains(&self, v: f64) -> bool {
        self.lo.is_none_or(|lo| v >= lo) && self.hi.is_none_or(|hi| v < hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "classes")]
pub enum ClassRule {
    /// Numeric bins; a value outside every bin is a validation error.
    Bins(Vec<Bin>),
    /// Fixed category labels.
    Labels(Vec<String>),
    /// Equal-count thirds of the observed numeric values, or the sorted
    /// distinct labels if the values are not numeric.
    Tertiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratVariable {
    pub attribute: Attribute,
    pub classes: ClassRule,
}

impl StratVariable {
    /// Size 1/2/3+, vehicles 0/1/2+, income tertiles, region and zone as
    /// observed labels.
    pub fn with_default_classes(attribute: Attribute) -> Self {
        let classes = match attribute {
            Attribute::Size => ClassRule::Bins(vec![
                Bin::new("1", Some(1.0), Some(2.0)),
                Bin::new("2", Some(2.0), Some(3.0)),
                Bin::new("3+", Some(3.0), None),
            ]),
            Attribute::Vehicles => ClassRule::Bins(vec![
                Bin::new("0", Some(0.0), Some(1.0)),
                Bin::new("1", Some(1.0), Some(2.0)),
                Bin::new("2+", Some(2.0), None),
            ]),
            Attribute::Income | Attribute::Region | Attribute::Zone => ClassRule::Tertiles,
        };
        Self { attribute, classes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratificationScheme {
    pub variables: Vec<StratVariable>,
}

impl StratificationScheme {
    pub fn new(variables: Vec<StratVariable>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Config("stratification needs at least one variable".into()));
        }
        Ok(Self { variables })
    }

    /// Parse a comma-separated attribute list, each with default classes.
    pub fn from_names(list: &str) -> Result<Self> {
        let vars = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<Attribute>().map(StratVariable::with_default_classes))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vars)
    }

    /// Replace data-dependent rules (tertiles) with concrete classes.
    pub fn resolve(&self, households: &[HouseholdRecord]) -> Result<ResolvedScheme> {
        let variables = self
            .variables
            .iter()
            .map(|v| {
                let classes = match &v.classes {
                    ClassRule::Tertiles => resolve_tertiles(v.attribute, households),
                    other => other.clone(),
                };
                match &classes {
                    ClassRule::Bins(b) if b.is_empty() => Err(Error::Config(format!(
                        "variable {} has no classes",
                        v.attribute
                    ))),
                    ClassRule::Labels(l) if l.is_empty() => Err(Error::Config(format!(
                        "variable {} has no classes",
                        v.attribute
                    ))),
                    _ => Ok(StratVariable {
                        attribute: v.attribute,
                        classes,
                    }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ResolvedScheme { variables })
    }
}

fn raw_value(attr: Attribute, h: &HouseholdRecord) -> String {
    match attr {
        Attribute::Size => h.size.to_string(),
        Attribute::Income => h.income_class.clone(),
        Attribute::Vehicles => h.vehicles.to_string(),
        Attribute::Region => h.region.clone(),
        Attribute::Zone => h.zone.clone(),
    }
}

fn resolve_tertiles(attr: Attribute, households: &[HouseholdRecord]) -> ClassRule {
    let raw: Vec<String> = households.iter().map(|h| raw_value(attr, h)).collect();
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.trim().parse::<f64>().ok()).collect();
    match numeric {
        Some(mut vals) if matches!(attr, Attribute::Income) && !vals.is_empty() => {
            vals.sort_by(f64::total_cmp);
            let q = |p: f64| vals[((vals.len() as f64 * p).floor() as usize).min(vals.len() - 1)];
            let (t1, t2) = (q(1.0 / 3.0), q(2.0 / 3.0));
            let mut bins = vec![Bin::new("low", None, Some(t1))];
            if t2 > t1 {
                bins.push(Bin::new("mid", Some(t1), Some(t2)));
                bins.push(Bin::new("high", Some(t2), None));
            } else {
                bins.push(Bin::new("high", Some(t1), None));
            }
            ClassRule::Bins(bins)
        }
        _ => {
            let mut labels = raw;
            labels.sort();
            labels.dedup();
            ClassRule::Labels(labels)
        }
    }
}

/// A scheme with every class list concrete. Classification returns, per
/// variable, the class index; index order is the deterministic stratum
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScheme {
    pub variables: Vec<StratVariable>,
}

impl ResolvedScheme {
    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.attribute.to_string()).collect()
    }

    pub fn classify(&self, h: &HouseholdRecord) -> Result<Vec<usize>> {
        self.variables
            .iter()
            .map(|v| {
                let raw = raw_value(v.attribute, h);
                let idx = match &v.classes {
                    ClassRule::Bins(bins) => {
                        let x: f64 = raw.trim().parse().map_err(|_| {
                            Error::Validation(format!(
                                "household {}: {} value '{raw}' is not numeric",
                                h.household_id, v.attribute
                            ))
                        })?;
                        bins.iter().position(|b| b.contains(x))
                    }
                    ClassRule::Labels(labels) => labels.iter().position(|l| *l == raw),
                    ClassRule::Tertiles => None,
                };
                idx.ok_or_else(|| {
                    Error::Validation(format!(
                        "household {}: {} value '{raw}' is outside the class boundaries",
                        h.household_id, v.attribute
                    ))
                })
            })
            .collect()
    }

    pub fn labels(&self, idx: &[usize]) -> Vec<String> {
        self.variables
            .iter()
            .zip(idx)
            .map(|(v, &i)| match &v.classes {
                ClassRule::Bins(b) => b[i].label.clone(),
                ClassRule::Labels(l) => l[i].clone(),
                ClassRule::Tertiles => unreachable!("resolved scheme has no tertile rule"),
            })
            .collect()
    }
}
