//! Versioned JSON checkpoints of a single chain.
//!
//! Unitaries are stored as base64 of little-endian `f64`, real and imaginary
//! parts interleaved, row-major. Environments and cached log terms are not
//! stored; they are rebuilt on load with the same arithmetic the sampler uses
//! incrementally, so a resumed chain is bit-identical to an uninterrupted one.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{ChainState, SamplerConfig, SiteStats};
use crate::error::{Error, Result};
use crate::linalg::{CMat, RngState, RngStream, C64};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: String,
}

impl EncodedMatrix {
    pub fn encode(m: &CMat) -> Self {
        let mut bytes = Vec::with_capacity(m.nrows() * m.ncols() * 16);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                bytes.extend_from_slice(&m[(i, j)].re.to_le_bytes());
                bytes.extend_from_slice(&m[(i, j)].im.to_le_bytes());
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), data: STANDARD.encode(bytes) }
    }

    pub fn decode(&self) -> Result<CMat> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Checkpoint(format!("bad base64: {e}")))?;
        if bytes.len() != self.rows * self.cols * 16 {
            return Err(Error::Checkpoint(format!(
                "matrix payload has {} bytes, expected {}",
                bytes.len(),
                self.rows * self.cols * 16
            )));
        }
        let f = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
        Ok(CMat::from_fn(self.rows, self.cols, |i, j| {
            let k = 2 * (i * self.cols + j);
            C64::new(f(k), f(k + 1))
        }))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: SamplerConfig,
    pub chain: usize,
    pub sweep_index: u64,
    pub sigma: f64,
    pub rng_state: RngState,
    pub stats: SiteStats,
    pub cumulative_log_alpha: f64,
    pub initial_log_weight: f64,
    pub unitaries: Vec<EncodedMatrix>,
}

impl Checkpoint {
    pub fn capture(state: &ChainState, config: &SamplerConfig, chain: usize) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            chain,
            sweep_index: state.sweep_index,
            sigma: state.sigma,
            rng_state: state.rng.state(),
            stats: state.stats.clone(),
            cumulative_log_alpha: state.cumulative_log_alpha,
            initial_log_weight: state.initial_log_weight,
            unitaries: state.unitaries.iter().map(EncodedMatrix::encode).collect(),
        }
    }

    pub fn restore(&self) -> Result<ChainState> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let profile = self.config.profile()?;
        if self.unitaries.len() != profile.n_sites() {
            return Err(Error::Checkpoint(format!(
                "{} unitaries for {} sites",
                self.unitaries.len(),
                profile.n_sites()
            )));
        }
        let unitaries = self
            .unitaries
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let m = e.decode()?;
                let n = profile.frame_dim(k + 1);
                if m.shape() != (n, n) {
                    return Err(Error::Checkpoint(format!(
                        "site {} unitary is {}x{}, expected {n}x{n}",
                        k + 1,
                        m.nrows(),
                        m.ncols()
                    )));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        let rng = RngStream::from_state(&self.rng_state)?;
        let mut state = ChainState::from_unitaries(profile, unitaries, rng, self.sigma)?;
        state.sweep_index = self.sweep_index;
        state.stats = self.stats.clone();
        state.cumulative_log_alpha = self.cumulative_log_alpha;
        state.initial_log_weight = self.initial_log_weight;
        Ok(state)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Checkpoint(format!("bad checkpoint json: {e}")))
    }
}
