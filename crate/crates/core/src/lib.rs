//! Random matrix product states: the sequential (RMPS) ensemble, the
//! Fubini–Study ensemble via Metropolis–Hastings, and the spectral laws of
//! their right environments.
//!
//! Sites are numbered `1..=N` and cuts `1..N`; cut `i` sits between sites
//! `i` and `i+1`. Every random routine takes an explicit [`RngStream`].

/// Crate version, recorded alongside generated data.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod error;
pub mod linalg;
pub mod measure;
pub mod mps;
pub mod param;
pub mod sampler;
pub mod spectra;

pub use error::{Error, Result};
pub use linalg::{CMat, RngState, RngStream, C64};
pub use measure::{fs_log_weight, LogWeight, Reweighted};
pub use mps::{bond_profile, BondProfile, Mps, RightEnvironments, SiteIsometry, UnitaryChain};
pub use param::Coordinates;
pub use sampler::{ChainState, Checkpoint, FsRun, FsSample, SamplerConfig};
pub use spectra::{MomentSeries, MpLaw, STransform};
