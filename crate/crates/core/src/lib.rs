//! Sample-size planning and representativeness audits for regional
//! household travel surveys.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod montecarlo;
pub mod od;
pub mod planner;
pub mod records;
pub mod rmse;
pub mod smith;
pub mod stats;

pub use error::{Error, Result};
pub use od::{ODMatrix, Partition, Slice};
pub use records::{Dimension, HouseholdRecord, Mode, Period, Purpose, TripRecord};
pub use smith::{AugmentPlan, SmithOptions, StratificationScheme};
pub use stats::{Dispersion, SizeSpec};
