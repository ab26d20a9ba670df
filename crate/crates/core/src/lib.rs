//! Test-validation engine: classical item analysis, IRT model fitting and
//! comparison, dimensionality checks, reliability, and external-validity
//! regression.

pub mod ctt;
pub mod dimensionality;
pub mod fit;
pub mod ingest;
pub mod irt;
pub mod regression;
pub mod reliability;
pub mod simulate;
pub mod stats;
