//! Metropolis–Hastings sampling of the Fubini–Study ensemble.
//!
//! The chain lives on the product of site unitaries. A proposal at site `j`
//! right-multiplies `U_j` by `exp(sigma H)` with `H` an anti-Hermitian GUE
//! generator; the proposal is symmetric with respect to Haar measure, so the
//! acceptance ratio is the ratio of correction weights. Only environments to
//! the left of `j` change, hence sweeps run from site `N` down to `1` and the
//! cached environments on the right stay valid.

mod checkpoint;
pub mod diagnostics;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, EncodedMatrix, FORMAT_VERSION};
pub use diagnostics::{chain_diagnostics, effective_sample_size, ChainDiagnostics};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RngStream};
use crate::measure::{cut_log_term, LogWeight};
use crate::mps::{self, environment_step, BondProfile, Mps, UnitaryChain};

/// Acceptance rate targeted while adapting the step size.
pub const TARGET_ACCEPTANCE: f64 = 0.35;
/// Adapted step sizes are kept inside this range.
pub const SIGMA_RANGE: (f64, f64) = (1e-6, 1e3);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_sites: usize,
    pub local_dim: usize,
    pub bond_dim: usize,
    pub n_samples: usize,
    pub burn_in_sweeps: u64,
    pub thin_sweeps: u64,
    pub sigma0: f64,
    pub adapt: bool,
    pub seed: u64,
    pub chains: usize,
}

impl SamplerConfig {
    /// Defaults: burn-in of `50 N` sweeps, one sweep between samples.
    pub fn new(n_sites: usize, local_dim: usize, bond_dim: usize, n_samples: usize, seed: u64) -> Self {
        Self {
            n_sites,
            local_dim,
            bond_dim,
            n_samples,
            burn_in_sweeps: 50 * n_sites as u64,
            thin_sweeps: 1,
            sigma0: 0.1,
            adapt: true,
            seed,
            chains: 1,
        }
    }

    pub fn profile(&self) -> Result<BondProfile> {
        BondProfile::new(self.n_sites, self.local_dim, self.bond_dim)
    }

    pub fn validate(&self) -> Result<BondProfile> {
        let profile = self.profile()?;
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
        }
        if self.chains == 0 || self.chains > self.n_samples {
            return Err(Error::InvalidArgument(format!(
                "chains must be in 1..={} (got {})",
                self.n_samples, self.chains
            )));
        }
        if self.thin_sweeps == 0 {
            return Err(Error::InvalidArgument("thin_sweeps must be >= 1".into()));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        Ok(profile)
    }

    /// Samples emitted by chain `c`.
    pub fn samples_for_chain(&self, c: usize) -> usize {
        self.n_samples / self.chains + usize::from(c < self.n_samples % self.chains)
    }

    pub fn total_sweeps_for_chain(&self, c: usize) -> u64 {
        self.burn_in_sweeps + self.thin_sweeps * self.samples_for_chain(c) as u64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteStats {
    pub proposed: Vec<u64>,
    pub accepted: Vec<u64>,
}

impl SiteStats {
    fn new(n: usize) -> Self {
        Self { proposed: vec![0; n], accepted: vec![0; n] }
    }

    pub fn acceptance(&self) -> Vec<f64> {
        self.proposed
            .iter()
            .zip(&self.accepted)
            .map(|(&p, &a)| if p == 0 { f64::NAN } else { a as f64 / p as f64 })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOutcome {
    /// Accepted / N.
    pub rate: f64,
    /// Acceptance over sites whose ratio is not identically one; `None` if
    /// there are no such sites.
    pub informative_rate: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub log_alpha: f64,
}

/// Mutable state of one Markov chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    profile: BondProfile,
    unitaries: Vec<CMat>,
    /// `Gamma_1 .. Gamma_{N-1}`
    envs: Vec<CMat>,
    log_terms: Vec<f64>,
    log_weight: f64,
    rng: RngStream,
    sigma: f64,
    stats: SiteStats,
    sweep_index: u64,
    cumulative_log_alpha: f64,
    initial_log_weight: f64,
}

fn sum_terms(terms: &[f64]) -> f64 {
    terms.iter().sum()
}

impl ChainState {
    pub fn from_unitaries(
        profile: BondProfile,
        unitaries: Vec<CMat>,
        rng: RngStream,
        sigma: f64,
    ) -> Result<Self> {
        let n = profile.n_sites();
        if unitaries.len() != n {
            return Err(Error::InvalidArgument(format!("{} unitaries for {n} sites", unitaries.len())));
        }
        let envs = full_environments(&profile, &unitaries);
        let log_terms = (1..n)
            .map(|cut| cut_log_term(&profile, cut, &envs[cut - 1]))
            .collect::<Result<Vec<_>>>()?;
        let log_weight = sum_terms(&log_terms);
        Ok(Self {
            stats: SiteStats::new(n),
            profile,
            unitaries,
            envs,
            log_terms,
            log_weight,
            rng,
            sigma,
            sweep_index: 0,
            cumulative_log_alpha: 0.0,
            initial_log_weight: log_weight,
        })
    }

    pub fn profile(&self) -> &BondProfile {
        &self.profile
    }

    pub fn unitaries(&self) -> &[CMat] {
        &self.unitaries
    }

    pub fn gamma(&self, cut: usize) -> &CMat {
        &self.envs[cut - 1]
    }

    pub fn log_terms(&self) -> &[f64] {
        &self.log_terms
    }

    pub fn log_weight(&self) -> LogWeight {
        LogWeight(self.log_weight)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn set_sigma(&mut self, sigma: f64) {
        self.sigma = sigma;
    }

    pub fn stats(&self) -> &SiteStats {
        &self.stats
    }

    pub fn sweep_index(&self) -> u64 {
        self.sweep_index
    }

    pub fn cumulative_log_alpha(&self) -> f64 {
        self.cumulative_log_alpha
    }

    pub fn initial_log_weight(&self) -> f64 {
        self.initial_log_weight
    }

    pub fn unitary_chain(&self) -> UnitaryChain {
        UnitaryChain { profile: self.profile.clone(), unitaries: self.unitaries.clone() }
    }

    pub fn mps(&self) -> Mps {
        self.unitary_chain().to_mps()
    }

    pub fn environments(&self) -> mps::RightEnvironments {
        mps::RightEnvironments { gammas: self.envs.clone() }
    }

    fn isometry(&self, site: usize) -> CMat {
        self.unitaries[site - 1].columns(0, self.profile.bond(site)).into_owned()
    }

    /// Propose at site `j` and accept with probability `min(1, alpha)`.
    pub fn propose_and_step(&mut self, j: usize) -> bool {
        self.step(j).accepted
    }

    pub fn step(&mut self, j: usize) -> StepOutcome {
        let n = self.profile.n_sites();
        assert!((1..=n).contains(&j), "site {j} outside 1..={n}");
        self.stats.proposed[j - 1] += 1;
        if self.sigma == 0.0 {
            self.stats.accepted[j - 1] += 1;
            return StepOutcome { accepted: true, log_alpha: 0.0 };
        }
        let frame = self.profile.frame_dim(j);
        let cols = self.profile.bond(j);
        let generator = linalg::gue_anti_hermitian(frame, &mut self.rng) * linalg::C64::new(self.sigma, 0.0);
        let rotation = linalg::anti_hermitian_exp(&generator).expect("GUE generator is anti-Hermitian");
        let u = self.rng.uniform();

        if j == 1 {
            // no cut lies left of the first site
            self.unitaries[0] = &self.unitaries[0] * rotation;
            self.stats.accepted[0] += 1;
            return StepOutcome { accepted: true, log_alpha: 0.0 };
        }

        let iso = &self.unitaries[j - 1] * rotation.columns(0, cols);
        let right = if j == n { CMat::identity(1, 1) } else { self.envs[j - 1].clone() };
        let mut new_envs = Vec::with_capacity(j - 1);
        let mut g = environment_step(&iso, self.profile.bond(j - 1), &right);
        for cut in (1..j).rev() {
            if cut < j - 1 {
                g = environment_step(&self.isometry(cut + 1), self.profile.bond(cut), &g);
            }
            new_envs.push(g.clone());
        }
        new_envs.reverse();
        let new_terms: Vec<f64> = new_envs
            .iter()
            .enumerate()
            .map(|(k, g)| cut_log_term(&self.profile, k + 1, g).unwrap_or(f64::NEG_INFINITY))
            .collect();
        let new_sum = sum_terms(&new_terms);
        let old_sum = sum_terms(&self.log_terms[..j - 1]);
        let log_alpha = if new_sum == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else if old_sum == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            new_sum - old_sum
        };
        let accepted = log_alpha >= 0.0 || u.ln() < log_alpha;
        if accepted {
            self.unitaries[j - 1] = &self.unitaries[j - 1] * rotation;
            for (k, (g, t)) in new_envs.into_iter().zip(new_terms).enumerate() {
                self.envs[k] = g;
                self.log_terms[k] = t;
            }
            self.log_weight = sum_terms(&self.log_terms);
            self.cumulative_log_alpha += log_alpha;
            self.stats.accepted[j - 1] += 1;
        }
        StepOutcome { accepted, log_alpha }
    }

    /// Whether the acceptance ratio at `site` can differ from one, i.e. some
    /// cut to its left carries weight.
    pub fn is_informative(&self, site: usize) -> bool {
        (1..site).any(|cut| self.profile.weight(cut) > 0 && self.profile.bond(cut) > 1)
    }

    /// One proposal per site, `N` down to `1`. Returns the acceptance rate.
    pub fn sweep(&mut self) -> f64 {
        self.sweep_detailed().rate
    }

    pub fn sweep_detailed(&mut self) -> SweepOutcome {
        let n = self.profile.n_sites();
        let (mut all, mut info, mut info_n) = (0usize, 0usize, 0usize);
        for j in (1..=n).rev() {
            let informative = self.is_informative(j);
            let ok = self.propose_and_step(j);
            all += usize::from(ok);
            if informative {
                info_n += 1;
                info += usize::from(ok);
            }
        }
        self.sweep_index += 1;
        SweepOutcome {
            rate: all as f64 / n as f64,
            informative_rate: (info_n > 0).then(|| info as f64 / info_n as f64),
        }
    }

    /// Recompute environments and weight from scratch and return the largest
    /// deviation from the cache. Errors if the cached weight is incoherent.
    pub fn verify(&self) -> Result<f64> {
        let fresh = full_environments(&self.profile, &self.unitaries);
        let dev = fresh
            .iter()
            .zip(&self.envs)
            .map(|(a, b)| linalg::max_abs(&(a - b)))
            .fold(0.0, f64::max);
        let sum = sum_terms(&self.log_terms);
        if !((sum - self.log_weight).abs() <= 1e-9 || sum == self.log_weight) {
            return Err(Error::ContractViolation(format!(
                "cached log weight {} != sum of terms {sum}",
                self.log_weight
            )));
        }
        Ok(dev)
    }

    pub fn checkpoint(&self, config: &SamplerConfig, chain: usize) -> Checkpoint {
        Checkpoint::capture(self, config, chain)
    }

    /// Spectra (ascending) of every `Gamma_i`.
    pub fn spectra(&self) -> Vec<Vec<f64>> {
        self.envs
            .iter()
            .map(|g| linalg::hermitian_eigenvalues(g).expect("environments are Hermitian"))
            .collect()
    }
}

fn full_environments(profile: &BondProfile, unitaries: &[CMat]) -> Vec<CMat> {
    let n = profile.n_sites();
    let mut envs = vec![CMat::zeros(0, 0); n.saturating_sub(1)];
    let mut g = CMat::identity(1, 1);
    for i in (2..=n).rev() {
        let iso = unitaries[i - 1].columns(0, profile.bond(i)).into_owned();
        g = environment_step(&iso, profile.bond(i - 1), &g);
        envs[i - 2] = g.clone();
    }
    envs
}

/// A fresh chain started from an RMPS draw.
pub fn init_chain(profile: &BondProfile, mut rng: RngStream, sigma0: f64) -> Result<ChainState> {
    if !(sigma0 >= 0.0 && sigma0.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma0 must be non-negative, got {sigma0}")));
    }
    let chain = mps::sample_rmps_unitaries(profile, &mut rng)?;
    ChainState::from_unitaries(profile.clone(), chain.unitaries, rng, sigma0)
}

pub fn sweep(state: &mut ChainState) -> f64 {
    state.sweep()
}

/// One emitted sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FsSample {
    pub chain: usize,
    pub draw: usize,
    pub sweep: u64,
    pub log_weight: f64,
    /// Ascending spectra of `Gamma_1 .. Gamma_{N-1}`.
    pub spectra: Vec<Vec<f64>>,
    pub entropies: Vec<f64>,
}

impl FsSample {
    pub fn from_state(state: &ChainState, chain: usize, draw: usize) -> Self {
        let spectra = state.spectra();
        let entropies = spectra.iter().map(|s| mps::entropy_bits(s)).collect();
        Self {
            chain,
            draw,
            sweep: state.sweep_index(),
            log_weight: state.log_weight,
            spectra,
            entropies,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRow {
    pub chain: usize,
    pub sweep: u64,
    pub log_weight: f64,
    pub accept_rate: f64,
    pub step_size: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: usize,
    pub diagnostics: Option<ChainDiagnostics>,
    pub site_acceptance: Vec<f64>,
    pub final_sigma: f64,
    pub initial_log_weight: f64,
    pub final_log_weight: f64,
    pub cumulative_log_alpha: f64,
    pub samples: usize,
}

pub struct ChainOutput<T> {
    pub observations: Vec<T>,
    pub trace: Vec<TraceRow>,
    pub report: ChainReport,
    pub state: ChainState,
}

/// Continue `state` along the schedule of `config` until the chain's last
/// sample. Burn-in sweeps adapt `sigma` when enabled; afterwards it is frozen
/// and `observe` is called every `thin_sweeps` sweeps.
///
/// Adaptation looks only at sites whose ratio can differ from one. Near the
/// edges the weighted cuts are all to the right, those sites always accept,
/// and counting them would let `sigma` run away.
pub fn run_chain<T, F>(config: &SamplerConfig, chain: usize, mut state: ChainState, observe: &F) -> ChainOutput<T>
where
    F: Fn(&ChainState, usize) -> T,
{
    let total = config.total_sweeps_for_chain(chain);
    let mut observations = Vec::new();
    let mut trace = Vec::new();
    let mut post_burn = Vec::new();
    while state.sweep_index < total {
        let sigma = state.sigma;
        let outcome = state.sweep_detailed();
        let rate = outcome.rate;
        let s = state.sweep_index;
        if s <= config.burn_in_sweeps {
            if let (true, Some(r)) = (config.adapt, outcome.informative_rate) {
                state.sigma = (sigma * (0.1 * (r - TARGET_ACCEPTANCE)).exp()).clamp(SIGMA_RANGE.0, SIGMA_RANGE.1);
            }
        } else {
            post_burn.push(state.log_weight);
            let since = s - config.burn_in_sweeps;
            if since % config.thin_sweeps == 0 {
                let draw = (since / config.thin_sweeps - 1) as usize;
                observations.push(observe(&state, draw));
            }
        }
        trace.push(TraceRow { chain, sweep: s, log_weight: state.log_weight, accept_rate: rate, step_size: sigma });
    }
    let report = ChainReport {
        chain,
        diagnostics: chain_diagnostics(&post_burn).ok(),
        site_acceptance: state.stats.acceptance(),
        final_sigma: state.sigma,
        initial_log_weight: state.initial_log_weight,
        final_log_weight: state.log_weight,
        cumulative_log_alpha: state.cumulative_log_alpha,
        samples: observations.len(),
    };
    ChainOutput { observations, trace, report, state }
}

/// Run every chain of `config` (in parallel, results in chain order).
pub fn run_fs_chains<T, F>(config: &SamplerConfig, observe: F) -> Result<Vec<ChainOutput<T>>>
where
    T: Send,
    F: Fn(&ChainState, usize) -> T + Sync,
{
    let profile = config.validate()?;
    (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let state = init_chain(&profile, RngStream::new(config.seed, c as u64), config.sigma0)?;
            Ok(run_chain(config, c, state, &observe))
        })
        .collect()
}

pub struct FsRun {
    pub samples: Vec<FsSample>,
    pub trace: Vec<TraceRow>,
    pub chains: Vec<ChainReport>,
}

impl FsRun {
    /// Per-chain series of one per-sample statistic.
    pub fn per_chain<F: Fn(&FsSample) -> f64>(&self, f: F) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.chains.len()];
        for s in &self.samples {
            out[s.chain].push(f(s));
        }
        out
    }
}

pub fn run_fs_sampler(config: &SamplerConfig) -> Result<FsRun> {
    let outputs = run_fs_chains(config, |state, draw| {
        // chain index is filled in below
        FsSample::from_state(state, 0, draw)
    })?;
    let mut samples = Vec::new();
    let mut trace = Vec::new();
    let mut chains = Vec::new();
    for (c, out) in outputs.into_iter().enumerate() {
        samples.extend(out.observations.into_iter().map(|mut s| {
            s.chain = c;
            s
        }));
        trace.extend(out.trace);
        chains.push(out.report);
    }
    Ok(FsRun { samples, trace, chains })
}

/// Mean and standard error of a statistic over several chains, with the
/// error taken from the summed per-chain effective sample sizes.
pub fn chain_mean(series: &[Vec<f64>]) -> (f64, f64, f64) {
    let all: Vec<f64> = series.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let ess: f64 = series.iter().filter(|s| !s.is_empty()).map(|s| {
        if s.len() >= 2 { effective_sample_size(s).min(s.len() as f64) } else { s.len() as f64 }
    }).sum();
    (mean, (var / ess).sqrt(), ess)
}
