//! Extreme-precipitation analysis toolkit.
//!
//! Annual block maxima per station are fitted with the generalized extreme
//! value family, checked with a truncated Cramér–von Mises bootstrap test,
//! summarised as diagnostic plot data, clustered in space (Ward on fitted
//! parameters, PAM on the F-madogram) and compared pairwise with a
//! recurrence-rate independence test.

pub mod cluster;
pub mod diagnose;
pub mod error;
pub mod estimate;
pub mod gev;
pub mod gof;
pub mod ingest;
pub mod optimize;
pub mod recurrence;
pub mod seed;
pub mod stats;
pub mod table1;

pub use cluster::{DistanceMatrix, Features, Partition};
pub use error::{Error, Result};
pub use estimate::{Constraint, FitResult, Method, ProfileInterval};
pub use gev::{Family, GevParams, ReturnSpec};
