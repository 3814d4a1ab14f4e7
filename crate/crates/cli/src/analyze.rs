//! `mpsm analyze`: compare pooled environment spectra with a reference law
//! and test the entanglement profile for mirror symmetry.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mpsm::spectra::{empirical_moments, histogram, ks_distance, HistogramBin, MpLaw};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::output::{field, read_csv};
use crate::sample::{PROFILE_HEADER, SPECTRUM_HEADER};

pub struct AnalyzeOptions {
    pub spectrum: PathBuf,
    pub profile: Option<PathBuf>,
    /// Aspect ratio of the reference Marchenko–Pastur law.
    pub c: f64,
    /// Defaults to the leftmost cut at full bond dimension.
    pub cut: Option<usize>,
    pub bins: usize,
    pub moments: usize,
}

#[derive(Debug, Serialize)]
pub struct LawSummary {
    pub name: &'static str,
    pub c: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Serialize)]
pub struct MomentComparison {
    pub order: usize,
    pub empirical: f64,
    pub reference: f64,
}

#[derive(Debug, Serialize)]
pub struct MirrorPair {
    pub cut: usize,
    pub mirror: usize,
    pub mean_difference: f64,
    pub standard_error: f64,
    pub z: f64,
}

#[derive(Debug, Serialize)]
pub struct ProfileSummary {
    pub samples: usize,
    pub mean_entropy_bits: Vec<f64>,
    pub mirror_pairs: Vec<MirrorPair>,
    pub max_mirror_z: f64,
}

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub ensembles: Vec<String>,
    pub cut: usize,
    pub samples: usize,
    pub eigenvalues: usize,
    pub law: LawSummary,
    pub ks_distance: f64,
    pub histogram: Vec<HistogramBin>,
    pub moments: Vec<MomentComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSummary>,
}

/// Scaled eigenvalues keyed by cut, then sample.
struct SpectrumData {
    ensembles: Vec<String>,
    by_cut: BTreeMap<usize, BTreeMap<usize, Vec<f64>>>,
}

fn read_spectrum(path: &Path) -> Result<SpectrumData> {
    let rows = read_csv(path, &SPECTRUM_HEADER)?;
    let mut ensembles: Vec<String> = Vec::new();
    let mut by_cut: BTreeMap<usize, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for (i, rec) in rows.iter().enumerate() {
        let ens: String = field(path, i, rec, 0, "ensemble")?;
        let sample: usize = field(path, i, rec, 1, "sample")?;
        let cut: usize = field(path, i, rec, 2, "cut")?;
        let _index: usize = field(path, i, rec, 3, "index")?;
        let _raw: f64 = field(path, i, rec, 4, "eigenvalue")?;
        let scaled: f64 = field(path, i, rec, 5, "scaled_eigenvalue")?;
        if cut == 0 {
            return Err(CliError::Parse { path: path.into(), row: i + 2, message: "cut must be >= 1".into() });
        }
        if !ensembles.contains(&ens) {
            ensembles.push(ens);
        }
        by_cut.entry(cut).or_default().entry(sample).or_default().push(scaled);
    }
    Ok(SpectrumData { ensembles, by_cut })
}

/// Per-sample entropy profiles, ordered by sample.
fn read_profile(path: &Path) -> Result<Vec<Vec<f64>>> {
    let rows = read_csv(path, &PROFILE_HEADER)?;
    let mut by_sample: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
    for (i, rec) in rows.iter().enumerate() {
        let sample: usize = field(path, i, rec, 1, "sample")?;
        let cut: usize = field(path, i, rec, 2, "cut")?;
        let e: f64 = field(path, i, rec, 3, "entropy_bits")?;
        let _frac: f64 = field(path, i, rec, 4, "entropy_frac")?;
        by_sample.entry(sample).or_default().insert(cut, e);
    }
    let n_cuts = by_sample.values().map(|m| m.len()).max().unwrap_or(0);
    by_sample
        .into_iter()
        .map(|(s, m)| {
            if m.len() != n_cuts || m.keys().copied().ne(1..=n_cuts) {
                return Err(CliError::Parse {
                    path: path.into(),
                    row: 0,
                    message: format!("sample {s} does not cover cuts 1..={n_cuts}"),
                });
            }
            Ok(m.into_values().collect())
        })
        .collect()
}

/// Paired `S_cut - S_{N-cut}` statistics for every mirrored pair.
pub fn mirror_pairs(profiles: &[Vec<f64>]) -> Vec<MirrorPair> {
    let n_cuts = profiles.first().map_or(0, |p| p.len());
    let n_sites = n_cuts + 1;
    let n = profiles.len() as f64;
    (1..n_sites)
        .filter(|&cut| cut < n_sites - cut)
        .map(|cut| {
            let mirror = n_sites - cut;
            let diffs: Vec<f64> = profiles.iter().map(|p| p[cut - 1] - p[mirror - 1]).collect();
            let mean = diffs.iter().sum::<f64>() / n;
            let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let se = (var / n).sqrt();
            let z = if se > 0.0 {
                mean.abs() / se
            } else if mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            MirrorPair { cut, mirror, mean_difference: mean, standard_error: se, z }
        })
        .collect()
}

pub fn analyze(opts: &AnalyzeOptions) -> Result<Analysis> {
    let law = MpLaw::new(opts.c).map_err(|e| CliError::Usage(e.to_string()))?;
    if opts.bins == 0 {
        return Err(CliError::Usage("--bins must be positive".into()));
    }
    let data = read_spectrum(&opts.spectrum)?;
    // only cuts with the widest spectrum share the bulk law
    let widest = data.by_cut.values().flat_map(|m| m.values().map(Vec::len)).max().unwrap_or(0);
    let leftmost = data.by_cut.iter().find(|(_, m)| m.values().all(|s| s.len() == widest)).map(|(&c, _)| c);
    let cut = match opts.cut.or(leftmost) {
        Some(c) => c,
        None => return Err(CliError::Usage("no cut has a saturated spectrum in every sample".into())),
    };
    let samples = data.by_cut.get(&cut).ok_or_else(|| CliError::Usage(format!("no eigenvalues at cut {cut}")))?;
    if samples.values().any(|s| s.len() != widest) {
        return Err(CliError::Usage(format!("cut {cut} is not saturated (bond below {widest})")));
    }
    let pooled: Vec<f64> = samples.values().flatten().copied().collect();
    let ks = ks_distance(&pooled, |x| law.cdf(x))?;
    let top = pooled.iter().copied().fold(law.upper(), f64::max) * 1.05;
    let hist = histogram(&pooled, opts.bins, 0.0, top)?;
    let reference = law.moments(opts.moments).map_err(|e| CliError::Usage(e.to_string()))?;
    let empirical = empirical_moments(&pooled, opts.moments);
    let moments = empirical
        .into_iter()
        .zip(reference)
        .enumerate()
        .map(|(k, (e, r))| MomentComparison { order: k + 1, empirical: e, reference: r })
        .collect();

    let profile = match &opts.profile {
        Some(path) => {
            let profiles = read_profile(path)?;
            let n = profiles.len() as f64;
            let n_cuts = profiles[0].len();
            let mean_entropy_bits = (0..n_cuts).map(|k| profiles.iter().map(|p| p[k]).sum::<f64>() / n).collect();
            let mirror_pairs = mirror_pairs(&profiles);
            let max_mirror_z = mirror_pairs.iter().map(|p| p.z).fold(0.0, f64::max);
            Some(ProfileSummary { samples: profiles.len(), mean_entropy_bits, mirror_pairs, max_mirror_z })
        }
        None => None,
    };

    Ok(Analysis {
        ensembles: data.ensembles,
        cut,
        samples: samples.len(),
        eigenvalues: pooled.len(),
        law: LawSummary { name: "marchenko-pastur", c: law.c(), lower: law.lower(), upper: law.upper() },
        ks_distance: ks,
        histogram: hist,
        moments,
        profile,
    })
}

pub fn run(opts: &AnalyzeOptions, out: &Path) -> Result<Analysis> {
    let a = analyze(opts)?;
    std::fs::write(out, serde_json::to_string_pretty(&a)?).map_err(|e| CliError::io(out, e))?;
    Ok(a)
}
