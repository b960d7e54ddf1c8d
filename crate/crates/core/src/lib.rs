//! Truncated kernelised Stein discrepancy (TKSD) estimation.
//!
//! Fits unnormalised density models on a truncated domain whose boundary is
//! known only through a finite point sample. TruncSM and bd-KSD baselines
//! and an experiment harness are included.

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod kernel;
pub mod models;

pub use error::{Result, TksdError};
pub use kernel::{Jitter, KernelBundle, KernelConfig};
