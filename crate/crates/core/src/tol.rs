//! Global tolerance scale.
//!
//! Every threshold in the crate is a base value multiplied by a single scale
//! factor. The scale starts at 1, can be overridden with the `NCREP_TOL`
//! environment variable, or set programmatically before any computation.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

static OVERRIDE: AtomicU64 = AtomicU64::new(0);
static FROM_ENV: OnceLock<f64> = OnceLock::new();

fn env_scale() -> f64 {
    *FROM_ENV.get_or_init(|| {
        std::env::var("NCREP_TOL")
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s > 0.0)
            .unwrap_or(1.0)
    })
}

/// Current tolerance scale factor.
pub fn scale() -> f64 {
    let bits = OVERRIDE.load(Ordering::Relaxed);
    if bits == 0 {
        env_scale()
    } else {
        f64::from_bits(bits)
    }
}

/// Override the scale for the whole process. Non-positive values reset to the
/// environment default.
pub fn set_scale(s: f64) {
    let bits = if s.is_finite() && s > 0.0 { s.to_bits() } else { 0 };
    OVERRIDE.store(bits, Ordering::Relaxed);
}

/// `base` multiplied by the current scale.
#[inline]
pub fn tol(base: f64) -> f64 {
    base * scale()
}

/// Relative threshold for positive definiteness (times the spectral norm).
pub const PD_REL: f64 = 1e-10;
/// Relative rank threshold for singular values.
pub const RANK_REL: f64 = 1e-9;
