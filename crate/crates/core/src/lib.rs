//! Revealed-preference inverse reinforcement learning against a constrained
//! utility maximizer, and the counter-side: masking that maximizer's
//! strategy through deliberately sub-optimal responses.
//!
//! Modules, bottom-up:
//! - [`rp`]: Afriat-type feasibility tests, reconstruction, projection.
//! - [`margins`]: how far a strategy is from failing those tests.
//! - [`mask`]: margin-capped sub-optimal responses.
//! - [`detect`]: noise-aware detectors and Type-I error estimates.
//! - [`spsa`]: stochastic-approximation masking against the detectors.
//! - [`scenarios`]: waveform and beam-allocation generators, Riccati tools.
//! - [`harness`]: config-driven experiment runner producing CSV/SVG/JSON.

pub mod dataset;
pub mod detect;
pub mod error;
pub mod harness;
pub mod lp;
pub mod margins;
pub mod mask;
mod numeric;
pub mod rp;
pub mod scenarios;
pub mod sets;
pub mod spsa;
pub mod strategy;

pub use dataset::{DatasetKind, ProbeResponseDataset};
pub use error::{Error, Result};
pub use strategy::{Family, Role, Strategy};
