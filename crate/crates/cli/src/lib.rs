//! Instance files, verification suites and reports behind the `ncrep` binary.

// `!(dev <= tol)` is deliberate throughout: a NaN deviation must fail.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod instance;
pub mod report;
pub mod suites;

pub use error::{CliError, CliResult};
pub use instance::{Instance, InstanceDescription};
pub use report::Report;

/// Exit status for a failed command: input problems are 2.
pub const EXIT_INPUT: i32 = 2;

/// Validate `NCREP_TOL` and install it as the tolerance scale.
pub fn init_tolerance_from_env() -> CliResult<()> {
    match std::env::var("NCREP_TOL") {
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(e) => Err(CliError::Usage(format!("NCREP_TOL: {e}"))),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => {
                ncrep_core::tol::set_scale(v);
                Ok(())
            }
            _ => Err(CliError::Usage(format!("NCREP_TOL must be a positive number, got {s:?}"))),
        },
    }
}
