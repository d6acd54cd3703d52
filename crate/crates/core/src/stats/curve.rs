//! Required sampling rate as a function of interchange size, dispersion and
//! confidence. One point per (confidence, cv, trip total) combination.

use serde::{Deserialize, Serialize};

use super::{interchange_rate, SizeSpec};
use crate::error::Result;

pub const RATE_CURVE_HEADER: &str = "confidence,cv,margin_of_error,trip_total,required_rate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurvePoint {
    pub trip_total: u64,
    pub cv: f64,
    pub confidence: f64,
    pub margin_of_error: f64,
    pub required_rate: f64,
}

/// Full cross product of the inputs, sorted by (confidence, cv, trip_total).
pub fn rate_curve(
    trip_totals: &[u64],
    cvs: &[f64],
    confidences: &[f64],
    margin_of_error: f64,
) -> Result<Vec<RateCurvePoint>> {
    let mut points = Vec::with_capacity(trip_totals.len() * cvs.len() * confidences.len());
    for &confidence in confidences {
        let spec = SizeSpec::new(confidence, margin_of_error)?;
        for &cv in cvs {
            for &trip_total in trip_totals {
                points.push(RateCurvePoint {
                    trip_total,
                    cv,
                    confidence,
                    margin_of_error,
                    required_rate: interchange_rate(trip_total, cv, &spec)?,
                });
            }
        }
    }
    points.sort_by(|a, b| {
        a.confidence
            .total_cmp(&b.confidence)
            .then(a.cv.total_cmp(&b.cv))
            .then(a.trip_total.cmp(&b.trip_total))
    });
    Ok(points)
}

pub fn rate_curve_csv(points: &[RateCurvePoint]) -> String {
    let mut out = String::from(RATE_CURVE_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.confidence, p.cv, p.margin_of_error, p.trip_total, p.required_rate
        ));
    }
    out
}

/// Log-spaced integer grid from `lo` to `hi` inclusive, `per_decade` points
/// per factor of ten. Duplicates after rounding are dropped.
pub fn log_grid(lo: u64, hi: u64, per_decade: u32) -> Vec<u64> {
    if lo == 0 || hi < lo || per_decade == 0 {
        return Vec::new();
    }
    let (a, b) = ((lo as f64).log10(), (hi as f64).log10());
    let steps = ((b - a) * per_decade as f64).round() as u64;
    let mut grid: Vec<u64> = (0..=steps)
        .map(|i| {
            let t = if steps == 0 { 0.0 } else { i as f64 / steps as f64 };
            10f64.powf(a + t * (b - a)).round() as u64
        })
        .collect();
    grid.dedup();
    grid
}
