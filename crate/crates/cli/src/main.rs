use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpsm::BondProfile;
use mpsm_cli::analyze::{self, AnalyzeOptions};
use mpsm_cli::sample::{self, SampleOptions};
use mpsm_cli::verify::{self, Scale, Suite, VerifyReport};
use mpsm_cli::{CliError, ConfigLayer, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "mpsm", version, about = "Random matrix product state ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw states and write entropy profiles, spectra and chain diagnostics.
    Sample {
        #[command(flatten)]
        layer: ConfigLayer,
        /// JSON file with any of the settings; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads [default: $MPSM_THREADS, else all cores].
        #[arg(long)]
        threads: Option<usize>,
        /// Also write the final state of every chain.
        #[arg(long)]
        checkpoint: bool,
    },
    /// Compare a spectrum file with a Marchenko–Pastur law.
    Analyze {
        #[arg(long)]
        spectrum: PathBuf,
        /// Profile file for the mirror-symmetry test.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, value_parser = ["mp"], default_value = "mp")]
        law: String,
        /// Aspect ratio of the reference law.
        #[arg(long)]
        c: f64,
        /// Cut to analyse [default: leftmost saturated cut].
        #[arg(long)]
        cut: Option<usize>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, default_value_t = 8)]
        moments: usize,
        #[arg(long, default_value = "analysis.json")]
        out: PathBuf,
    },
    /// Run the acceptance checks and write a machine-readable report.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, value_enum, default_value = "desk")]
        scale: Scale,
        /// Run the identity check at this chain length instead of its defaults.
        #[arg(long)]
        n_sites: Option<usize>,
        #[arg(long, default_value_t = 2)]
        local_dim: usize,
        #[arg(long, default_value_t = 2)]
        bond_dim: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "verify_report.json")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Sample { layer, config, threads, checkpoint } => {
            let base = match &config {
                Some(path) => ConfigLayer::from_file(path)?,
                None => ConfigLayer::default(),
            };
            let cfg = ExperimentConfig::resolve(layer.over(base))?;
            let threads = sample::resolve_threads(threads)?;
            let meta = sample::run(&cfg, &SampleOptions { threads, checkpoint })?;
            eprintln!(
                "wrote {} to {} in {:.2}s",
                meta.files.join(", "),
                cfg.out_dir.display(),
                meta.wall_time_seconds
            );
            Ok(0)
        }
        Command::Analyze { spectrum, profile, law: _, c, cut, bins, moments, out } => {
            let a = analyze::run(&AnalyzeOptions { spectrum, profile, c, cut, bins, moments }, &out)?;
            eprintln!("cut {}: KS = {:.4} over {} eigenvalues", a.cut, a.ks_distance, a.eigenvalues);
            if let Some(p) = &a.profile {
                eprintln!("max mirrored-cut z = {:.2}", p.max_mirror_z);
            }
            Ok(0)
        }
        Command::Verify { suite, scale, n_sites, local_dim, bond_dim, samples, seed, out, threads } => {
            let threads = sample::resolve_threads(threads)?;
            let report = sample::with_threads(threads, || match n_sites {
                Some(n) if matches!(suite, Suite::Identity) => {
                    let profile = BondProfile::new(n, local_dim, bond_dim).map_err(|e| CliError::Usage(e.to_string()))?;
                    let r = verify::run_identity_at(&profile, samples, seed);
                    println!("{}", r.line());
                    Ok(VerifyReport { suite, scale, passed: r.passed, checks: vec![r] })
                }
                Some(_) => Err(CliError::Usage("--n-sites only applies to --suite identity".into())),
                None => Ok(verify::run_suite(suite, scale, |r| println!("{}", r.line()))),
            })?
            .0?;
            std::fs::write(&out, serde_json::to_string_pretty(&report)?).map_err(|e| CliError::io(&out, e))?;
            Ok(if report.passed { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
