//! Survey microdata rows and their closed category sets.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! closed_set {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $tok:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $tok),+ }
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($tok => Ok($name::$variant),)+
                    other => Err(Error::Validation(format!(
                        concat!("unknown ", stringify!($name), " token '{}'"), other
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

closed_set!(
    /// Main mode of a trip.
    Mode { Auto => "auto", Transit => "transit", Active => "active", Other => "other" }
);
closed_set!(
    /// Trip purpose, keyed on the destination activity.
    Purpose {
        Work => "work",
        Home => "home",
        School => "school",
        Recreation => "recreation",
        Other => "other",
    }
);
closed_set!(
    Period { Peak => "peak", Offpeak => "offpeak" }
);

impl Period {
    /// Peak is 06:00-10:00 and 15:00-19:00, start inclusive, end exclusive.
    pub fn from_hhmm(hhmm: u16) -> Result<Self> {
        let (h, m) = (hhmm / 100, hhmm % 100);
        if h > 23 || m > 59 {
            return Err(Error::Validation(format!("invalid departure time {hhmm:04}")));
        }
        Ok(if (6..10).contains(&h) || (15..19).contains(&h) {
            Period::Peak
        } else {
            Period::Offpeak
        })
    }
}

/// One of the three trip classification dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Period,
    Mode,
    Purpose,
}

impl Dimension {
    pub fn label(&self) -> &'static str {
        match self {
            Dimension::Period => "time",
            Dimension::Mode => "mode",
            Dimension::Purpose => "purpose",
        }
    }

    pub fn categories(&self) -> Vec<&'static str> {
        match self {
            Dimension::Period => Period::ALL.iter().map(|p| p.as_str()).collect(),
            Dimension::Mode => Mode::ALL.iter().map(|p| p.as_str()).collect(),
            Dimension::Purpose => Purpose::ALL.iter().map(|p| p.as_str()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdRecord {
    pub household_id: String,
    pub region: String,
    pub zone: String,
    pub size: u32,
    pub income_class: String,
    pub vehicles: u32,
    pub weight: f64,
    /// Number of linked trips on the survey day.
    #[serde(default)]
    pub trip_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub household_id: String,
    pub origin_zone: String,
    pub destination_zone: String,
    pub mode: Mode,
    pub purpose: Purpose,
    pub period: Period,
    pub depart_hhmm: u16,
    pub weight: f64,
}

impl TripRecord {
    pub fn category(&self, dim: Dimension) -> &'static str {
        match dim {
            Dimension::Period => self.period.as_str(),
            Dimension::Mode => self.mode.as_str(),
            Dimension::Purpose => self.purpose.as_str(),
        }
    }
}

/// Fill `trip_count` on every household from the trip list. Returns the ids
/// of trips whose household is unknown.
pub fn link_trips(households: &mut [HouseholdRecord], trips: &[TripRecord]) -> Vec<String> {
    let index: HashMap<&str, usize> = households
        .iter()
        .enumerate()
        .map(|(i, h)| (h.household_id.as_str(), i))
        .collect();
    let mut counts = vec![0u32; households.len()];
    let mut orphans = Vec::new();
    for t in trips {
        match index.get(t.household_id.as_str()) {
            Some(&i) => counts[i] += 1,
            None => orphans.push(t.household_id.clone()),
        }
    }
    for (h, c) in households.iter_mut().zip(counts) {
        h.trip_count = c;
    }
    orphans.sort();
    orphans.dedup();
    orphans
}
