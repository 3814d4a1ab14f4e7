//! `mpsm sample`: draw states and write per-cut entropies and spectra.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mpsm::linalg::RngStream;
use mpsm::measure::par_blocks;
use mpsm::mps;
use mpsm::sampler::{run_fs_chains, ChainReport, ChainState, TraceRow};
use serde::Serialize;

use crate::config::{Ensemble, ExperimentConfig, Format};
use crate::error::{CliError, Result};
use crate::output::{write_table, Cell, Table};

/// Stream ids of the direct ensembles; Markov chain `c` uses stream `c`.
const RMPS_STREAM: u64 = 1 << 32;
const CENTRAL_STREAM: u64 = (1 << 32) + 1;

pub const PROFILE_HEADER: [&str; 5] = ["ensemble", "sample", "cut", "entropy_bits", "entropy_frac"];
pub const SPECTRUM_HEADER: [&str; 6] = ["ensemble", "sample", "cut", "index", "eigenvalue", "scaled_eigenvalue"];
pub const DIAGNOSTICS_HEADER: [&str; 5] = ["chain", "sweep", "log_weight", "accept_rate", "step_size"];

/// Per-cut data of one state. Spectra are descending and have `D_cut`
/// entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub entropies: Vec<f64>,
    pub spectra: Vec<Vec<f64>>,
}

impl SampleRecord {
    fn from_ascending(spectra: Vec<Vec<f64>>) -> Self {
        let spectra: Vec<Vec<f64>> = spectra
            .into_iter()
            .map(|mut s| {
                s.reverse();
                s
            })
            .collect();
        Self { entropies: spectra.iter().map(|s| mps::entropy_bits(s)).collect(), spectra }
    }
}

pub struct SampleOutput {
    pub records: Vec<SampleRecord>,
    pub trace: Vec<TraceRow>,
    pub chains: Vec<ChainReport>,
    /// Final chain states (fs only).
    pub states: Vec<ChainState>,
}

impl SampleOutput {
    fn direct(records: Vec<SampleRecord>) -> Self {
        Self { records, trace: Vec::new(), chains: Vec::new(), states: Vec::new() }
    }
}

pub fn generate(cfg: &ExperimentConfig) -> Result<SampleOutput> {
    cfg.validate()?;
    let profile = cfg.profile()?;
    match cfg.ensemble {
        Ensemble::Rmps => {
            let rng = RngStream::new(cfg.seed, RMPS_STREAM);
            let blocks = par_blocks(cfg.samples, &rng, |_, count, mut r| {
                (0..count)
                    .map(|_| {
                        let envs = mps::right_environments(&mps::sample_rmps(&profile, &mut r)?);
                        let spectra = (1..profile.n_sites()).map(|c| envs.spectrum(c)).collect::<mpsm::Result<_>>()?;
                        Ok(SampleRecord::from_ascending(spectra))
                    })
                    .collect::<mpsm::Result<Vec<_>>>()
            });
            let mut records = Vec::with_capacity(cfg.samples);
            for b in blocks {
                records.extend(b?);
            }
            Ok(SampleOutput::direct(records))
        }
        Ensemble::Central => {
            let rng = RngStream::new(cfg.seed, CENTRAL_STREAM);
            let blocks = par_blocks(cfg.samples, &rng, |_, count, mut r| {
                (0..count)
                    .map(|_| {
                        let psi = mps::sample_central_gauge(&profile, &mut r)?;
                        let spectra = (1..profile.n_sites())
                            .map(|c| {
                                let mut s = mps::schmidt_spectrum_dense(&psi, c, &profile)?;
                                s.truncate(profile.bond(c));
                                s.reverse();
                                Ok(s)
                            })
                            .collect::<mpsm::Result<_>>()?;
                        Ok(SampleRecord::from_ascending(spectra))
                    })
                    .collect::<mpsm::Result<Vec<_>>>()
            });
            let mut records = Vec::with_capacity(cfg.samples);
            for b in blocks {
                records.extend(b?);
            }
            Ok(SampleOutput::direct(records))
        }
        Ensemble::Fs => {
            let outs = run_fs_chains(&cfg.sampler_config(), |s, _| SampleRecord::from_ascending(s.spectra()))?;
            let mut out = SampleOutput::direct(Vec::new());
            for o in outs {
                out.records.extend(o.observations);
                out.trace.extend(o.trace);
                out.chains.push(o.report);
                out.states.push(o.state);
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub mpsm: &'static str,
    pub mpsm_cli: &'static str,
}

#[derive(Debug, Serialize)]
pub struct RunMeta {
    pub config: ExperimentConfig,
    pub versions: Versions,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub chains: Vec<ChainReport>,
}

pub struct SampleOptions {
    pub threads: Option<usize>,
    /// Save the final state of each chain (fs only).
    pub checkpoint: bool,
}

pub fn profile_table(cfg: &ExperimentConfig, records: &[SampleRecord]) -> Table {
    let cap = (cfg.bond_dim as f64).log2();
    let mut rows = Vec::new();
    for (s, r) in records.iter().enumerate() {
        for (k, &e) in r.entropies.iter().enumerate() {
            let frac = if cap > 0.0 { e / cap } else { 0.0 };
            rows.push(vec![
                Cell::Str(cfg.ensemble.name()),
                Cell::Int(s as u64),
                Cell::Int(k as u64 + 1),
                Cell::Float(e),
                Cell::Float(frac),
            ]);
        }
    }
    Table { header: PROFILE_HEADER.to_vec(), rows }
}

pub fn spectrum_table(cfg: &ExperimentConfig, records: &[SampleRecord]) -> Table {
    let mut rows = Vec::new();
    for (s, r) in records.iter().enumerate() {
        for (k, spectrum) in r.spectra.iter().enumerate() {
            let dim = spectrum.len() as f64;
            for (i, &v) in spectrum.iter().enumerate() {
                rows.push(vec![
                    Cell::Str(cfg.ensemble.name()),
                    Cell::Int(s as u64),
                    Cell::Int(k as u64 + 1),
                    Cell::Int(i as u64),
                    Cell::Float(v),
                    Cell::Float(v * dim),
                ]);
            }
        }
    }
    Table { header: SPECTRUM_HEADER.to_vec(), rows }
}

pub fn diagnostics_table(trace: &[TraceRow]) -> Table {
    let rows = trace
        .iter()
        .map(|t| {
            vec![
                Cell::Int(t.chain as u64),
                Cell::Int(t.sweep),
                Cell::Float(t.log_weight),
                Cell::Float(t.accept_rate),
                Cell::Float(t.step_size),
            ]
        })
        .collect();
    Table { header: DIAGNOSTICS_HEADER.to_vec(), rows }
}

/// Thread count from the flag, then `MPSM_THREADS`, then rayon's default.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return if n == 0 { Err(CliError::Usage("--threads must be positive".into())) } else { Ok(Some(n)) };
    }
    match std::env::var("MPSM_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Usage(format!("MPSM_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<(T, usize)> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let n = pool.current_num_threads();
    Ok((pool.install(f), n))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn run(cfg: &ExperimentConfig, opts: &SampleOptions) -> Result<RunMeta> {
    cfg.validate()?;
    let start = Instant::now();
    let (out, threads) = with_threads(opts.threads, || generate(cfg))?;
    let out = out?;
    create_dir(&cfg.out_dir)?;
    let mut files = Vec::new();
    let ext = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let mut tables = vec![("profile", profile_table(cfg, &out.records)), ("spectrum", spectrum_table(cfg, &out.records))];
    if cfg.ensemble == Ensemble::Fs {
        tables.push(("diagnostics", diagnostics_table(&out.trace)));
    }
    for (name, table) in &tables {
        let file = format!("{name}.{ext}");
        write_table(&cfg.out_dir.join(&file), table, cfg.format)?;
        files.push(file);
    }
    if opts.checkpoint && cfg.ensemble == Ensemble::Fs {
        let dir: PathBuf = cfg.out_dir.join("checkpoints");
        create_dir(&dir)?;
        let sc = cfg.sampler_config();
        for (c, s) in out.states.iter().enumerate() {
            let file = format!("checkpoints/chain_{c}.json");
            let path = cfg.out_dir.join(&file);
            std::fs::write(&path, s.checkpoint(&sc, c).to_json()).map_err(|e| CliError::io(&path, e))?;
            files.push(file);
        }
    }
    let meta = RunMeta {
        config: cfg.clone(),
        versions: Versions { mpsm: mpsm::VERSION, mpsm_cli: env!("CARGO_PKG_VERSION") },
        seed: cfg.seed,
        threads,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files,
        chains: out.chains,
    };
    let path = cfg.out_dir.join("run_meta.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| CliError::io(&path, e))?;
    Ok(meta)
}
