//! Littlewood–Paley analysis, function-space norms, maximal operators and
//! pseudo-differential operators on a discretized torus, with randomized
//! audits of the associated inequalities.

pub mod audits;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod littlewood_paley;
pub mod maximal;
pub mod probes;
pub mod pseudo;
pub mod report;
pub mod spaces;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction};
pub use littlewood_paley::{BandTable, LPPartition};
pub use report::AuditReport;
