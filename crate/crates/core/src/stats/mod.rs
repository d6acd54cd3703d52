//! Statistical primitives: critical values, coefficients of variation and
//! sample sizes for a single trip interchange.

mod curve;
mod normal;

pub use curve::{log_grid, rate_curve, rate_curve_csv, RateCurvePoint, RATE_CURVE_HEADER};
pub use normal::{inverse_normal_cdf, z_quantile};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confidence level and relative margin of error, with the critical value
/// cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SizeSpecInput")]
pub struct SizeSpec {
    confidence: f64,
    margin_of_error: f64,
    z: f64,
}

#[derive(Deserialize)]
struct SizeSpecInput {
    confidence: f64,
    margin_of_error: f64,
}

impl TryFrom<SizeSpecInput> for SizeSpec {
    type Error = Error;

    fn try_from(v: SizeSpecInput) -> Result<Self> {
        SizeSpec::new(v.confidence, v.margin_of_error)
    }
}

impl SizeSpec {
    pub fn new(confidence: f64, margin_of_error: f64) -> Result<Self> {
        if !(margin_of_error > 0.0 && margin_of_error < 1.0) {
            return Err(Error::Domain(format!(
                "margin of error must lie in (0, 1), got {margin_of_error}"
            )));
        }
        let z = z_quantile(confidence)?;
        Ok(Self {
            confidence,
            margin_of_error,
            z,
        })
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn margin_of_error(&self) -> f64 {
        self.margin_of_error
    }

    /// Two-sided standard normal critical value.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// `(z / e)²`, the factor shared by every sizing formula.
    pub fn precision_factor(&self) -> f64 {
        let r = self.z / self.margin_of_error;
        r * r
    }
}

/// Which standard deviation to use when measuring dispersion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dispersion {
    /// Divide by `n`.
    #[default]
    Population,
    /// Divide by `n - 1`.
    Sample,
}

pub(crate) fn mean_and_std(values: &[f64], kind: Dispersion) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let denom = match kind {
        Dispersion::Population => n as f64,
        Dispersion::Sample if n > 1 => (n - 1) as f64,
        Dispersion::Sample => return (mean, 0.0),
    };
    (mean, (ss / denom).sqrt())
}

/// Population standard deviation over the mean.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64> {
    coefficient_of_variation_with(values, Dispersion::Population)
}

pub fn coefficient_of_variation_with(values: &[f64], kind: Dispersion) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Degenerate(format!(
            "coefficient of variation needs at least 2 values, got {}",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Domain(format!("values must be finite and nonnegative, got {v}")));
    }
    let (mean, std) = mean_and_std(values, kind);
    if mean <= 0.0 {
        return Err(Error::Degenerate("mean is zero".into()));
    }
    Ok(std / mean)
}

/// Infinite-population sample size `(cv · z / e)²`, unrounded.
pub fn base_sample_size(cv: f64, spec: &SizeSpec) -> Result<f64> {
    if !(cv >= 0.0 && cv.is_finite()) {
        return Err(Error::Domain(format!("cv must be finite and >= 0, got {cv}")));
    }
    Ok(cv * cv * spec.precision_factor())
}

/// Finite population correction `n0 / (1 + n0 / N)`.
pub fn fpc_sample_size(n0: f64, population: u64) -> Result<f64> {
    if population < 1 {
        return Err(Error::Domain("population must be at least 1".into()));
    }
    if !(n0 >= 0.0) {
        return Err(Error::Domain(format!("n0 must be >= 0, got {n0}")));
    }
    if n0.is_infinite() {
        return Ok(population as f64);
    }
    Ok(n0 / (1.0 + n0 / population as f64))
}

/// Share of the `trip_total` trips of one O-D interchange that must be
/// sampled to meet `spec`.
pub fn interchange_rate(trip_total: u64, cv: f64, spec: &SizeSpec) -> Result<f64> {
    if trip_total < 1 {
        return Err(Error::Domain("trip total must be at least 1".into()));
    }
    let n = fpc_sample_size(base_sample_size(cv, spec)?, trip_total)?;
    Ok(n / trip_total as f64)
}
