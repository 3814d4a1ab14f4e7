//! Experiment configuration. Values come from, in increasing precedence,
//! built-in defaults, a JSON file and command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mpsm::{BondProfile, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    /// Sequential Haar isometries, left-canonical.
    Rmps,
    /// Haar isometries gauged towards the middle of the chain.
    Central,
    /// Fubini–Study ensemble by Metropolis–Hastings.
    Fs,
}

impl Ensemble {
    pub fn name(self) -> &'static str {
        match self {
            Ensemble::Rmps => "rmps",
            Ensemble::Central => "central",
            Ensemble::Fs => "fs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// One layer of settings; unset fields fall through to the layer below.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    #[arg(long)]
    pub n_sites: Option<usize>,
    #[arg(long)]
    pub local_dim: Option<usize>,
    #[arg(long)]
    pub bond_dim: Option<usize>,
    #[arg(long, value_enum)]
    pub ensemble: Option<Ensemble>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Independent Markov chains (fs only).
    #[arg(long)]
    pub chains: Option<usize>,
    /// Defaults to 50 sweeps per site.
    #[arg(long)]
    pub burn_in_sweeps: Option<u64>,
    #[arg(long)]
    pub thin_sweeps: Option<u64>,
    /// Initial proposal scale.
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Adapt the step size during burn-in.
    #[arg(long, action = clap::ArgAction::Set)]
    pub adapt: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl ConfigLayer {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// `self` over `base`.
    pub fn over(self, base: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            n_sites: self.n_sites.or(base.n_sites),
            local_dim: self.local_dim.or(base.local_dim),
            bond_dim: self.bond_dim.or(base.bond_dim),
            ensemble: self.ensemble.or(base.ensemble),
            samples: self.samples.or(base.samples),
            chains: self.chains.or(base.chains),
            burn_in_sweeps: self.burn_in_sweeps.or(base.burn_in_sweeps),
            thin_sweeps: self.thin_sweeps.or(base.thin_sweeps),
            step_size: self.step_size.or(base.step_size),
            adapt: self.adapt.or(base.adapt),
            seed: self.seed.or(base.seed),
            out_dir: self.out_dir.or(base.out_dir),
            format: self.format.or(base.format),
        }
    }
}

/// Fully resolved settings, as recorded in `run_meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_sites: usize,
    pub local_dim: usize,
    pub bond_dim: usize,
    pub ensemble: Ensemble,
    pub samples: usize,
    pub chains: usize,
    pub burn_in_sweeps: u64,
    pub thin_sweeps: u64,
    pub step_size: f64,
    pub adapt: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format: Format,
}

impl ExperimentConfig {
    pub fn resolve(layer: ConfigLayer) -> Result<Self> {
        let n_sites = layer.n_sites.unwrap_or(10);
        let cfg = Self {
            n_sites,
            local_dim: layer.local_dim.unwrap_or(2),
            bond_dim: layer.bond_dim.unwrap_or(8),
            ensemble: layer.ensemble.unwrap_or(Ensemble::Rmps),
            samples: layer.samples.unwrap_or(200),
            chains: layer.chains.unwrap_or(1),
            burn_in_sweeps: layer.burn_in_sweeps.unwrap_or(50 * n_sites as u64),
            thin_sweeps: layer.thin_sweeps.unwrap_or(1),
            step_size: layer.step_size.unwrap_or(0.1),
            adapt: layer.adapt.unwrap_or(true),
            seed: layer.seed.unwrap_or(0),
            out_dir: layer.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            format: layer.format.unwrap_or(Format::Csv),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn profile(&self) -> Result<BondProfile> {
        Ok(BondProfile::new(self.n_sites, self.local_dim, self.bond_dim)?)
    }

    pub fn validate(&self) -> Result<()> {
        let profile = self.profile().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.samples == 0 {
            return Err(CliError::Usage("--samples must be positive".into()));
        }
        match self.ensemble {
            Ensemble::Fs => {
                self.sampler_config().validate().map_err(|e| CliError::Usage(e.to_string()))?;
            }
            Ensemble::Central => {
                if profile.hilbert_dim().is_none_or(|n| n > mpsm::mps::DENSE_LIMIT) {
                    return Err(CliError::Usage(format!(
                        "central ensemble is built densely; {}^{} amplitudes is too many",
                        self.local_dim, self.n_sites
                    )));
                }
            }
            Ensemble::Rmps => {}
        }
        Ok(())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            n_sites: self.n_sites,
            local_dim: self.local_dim,
            bond_dim: self.bond_dim,
            n_samples: self.samples,
            burn_in_sweeps: self.burn_in_sweeps,
            thin_sweeps: self.thin_sweeps,
            sigma0: self.step_size,
            adapt: self.adapt,
            seed: self.seed,
            chains: self.chains,
        }
    }
}
