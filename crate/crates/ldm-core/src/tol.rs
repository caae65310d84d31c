//! Global numeric tolerance used by every approximate comparison in the crate.
//!
//! Matrix validation, value-grammar checks, distribution grouping and the
//! denotational merge convention all compare floating-point data against this
//! single knob so that a CLI flag (or the `LDM_TOLERANCE` environment
//! variable) can tighten or relax the whole pipeline at once.

use std::sync::atomic::{AtomicU64, Ordering};

/// Default tolerance: 1e-9.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

static TOLERANCE_BITS: AtomicU64 = AtomicU64::new(0x3E112E0BE826D695); // 1e-9 as bits

/// Current global tolerance.
pub fn tolerance() -> f64 {
    f64::from_bits(TOLERANCE_BITS.load(Ordering::Relaxed))
}

/// Replaces the global tolerance. Panics on non-finite or non-positive values:
/// a zero tolerance would turn every matrix validation into an exact
/// floating-point comparison, which no computed density survives.
pub fn set_tolerance(tol: f64) {
    assert!(
        tol.is_finite() && tol > 0.0,
        "tolerance must be finite and positive, got {tol}"
    );
    TOLERANCE_BITS.store(tol.to_bits(), Ordering::Relaxed);
}
