//! Acceptance checks, shared by `mpsm verify` and the acceptance test
//! target. Each check reports every measured quantity next to its bound.

use std::time::Instant;

use mpsm::linalg::{self, haar_unitary, CMat, RngStream, C64};
use mpsm::measure::{
    fs_expectation_reweighted, fs_log_weight, identity_resolution_check, metric_gram_numeric, IdentityEnsemble,
};
use mpsm::mps::{self, bond_profile, BondProfile};
use mpsm::param::{exp_param, extract_coordinates, jacobian, jacobian_first_order, Coordinates};
use mpsm::sampler::{chain_mean, run_fs_chains, SamplerConfig};
use mpsm::spectra::{
    equilibrium_cut, fs_aspect_ratio, iterate_transfer, ks_distance, moments_to_stransform, mp_moments, scaled_cut_eigenvalues,
    stransform_to_moments, transfer_stransform, MomentSeries, MpLaw, STransform,
};
use serde::Serialize;

use crate::config::{ConfigLayer, Ensemble, ExperimentConfig, Format};
use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Reduced sample counts for the slow statistical checks.
    Desk,
    /// The sizes the tolerances were set for.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identity,
    Metric,
    Jacobian,
    Sampler,
    Spectra,
    Reproducibility,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = ">=")]
    AtLeast,
    /// Reported for context; never fails.
    #[serde(rename = "reported")]
    Reported,
}

#[derive(Clone, Debug, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Measurement {
    pub fn reported(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value, Relation::Reported, f64::NAN)
    }

    pub fn new(name: impl Into<String>, value: f64, relation: Relation, bound: f64) -> Self {
        let passed = match relation {
            Relation::Below => value < bound,
            Relation::AtMost => value <= bound,
            Relation::Above => value > bound,
            Relation::AtLeast => value >= bound,
            Relation::Reported => true,
        };
        Self { name: name.into(), value, relation, bound, passed }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub measurements: Vec<Measurement>,
    /// Set when the check could not run to completion.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckResult {
    /// `PASS [3] name: a = 0.01 < 0.02; ...`
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let parts: Vec<String> = self
            .measurements
            .iter()
            .map(|m| {
                let rel = match m.relation {
                    Relation::Below => "<",
                    Relation::AtMost => "<=",
                    Relation::Above => ">",
                    Relation::AtLeast => ">=",
                    Relation::Reported => return format!("{} = {:.4e} (reported)", m.name, m.value),
                };
                let mark = if m.passed { "" } else { " (!)" };
                format!("{} = {:.4e} {rel} {:e}{mark}", m.name, m.value, m.bound)
            })
            .collect();
        let mut s = format!("{verdict} [{}] {} ({:.1}s): {}", self.id, self.name, self.seconds, parts.join("; "));
        if let Some(e) = &self.error {
            s.push_str(&format!(" error: {e}"));
        }
        s
    }
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub suite: Suite,
    run: fn(Scale) -> Result<Vec<Measurement>>,
}

impl Criterion {
    pub fn run(&self, scale: Scale) -> CheckResult {
        let start = Instant::now();
        let (measurements, error) = match (self.run)(scale) {
            Ok(m) => (m, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        let passed = error.is_none() && !measurements.is_empty() && measurements.iter().all(|m| m.passed);
        CheckResult {
            id: self.id,
            name: self.name,
            passed,
            seconds: start.elapsed().as_secs_f64(),
            measurements,
            error,
        }
    }
}

pub const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "environment spectra match dense Schmidt spectra", suite: Suite::Metric, run: environment_oracle },
    Criterion { id: 2, name: "metric determinant tracks the correction weight", suite: Suite::Metric, run: metric_determinant },
    Criterion { id: 3, name: "chart Jacobian", suite: Suite::Jacobian, run: jacobian_pushforward },
    Criterion { id: 4, name: "chart round trip", suite: Suite::Jacobian, run: chart_roundtrip },
    Criterion { id: 5, name: "resolution of the identity", suite: Suite::Identity, run: identity_resolution },
    Criterion { id: 6, name: "Markov chain agrees with reweighting", suite: Suite::Sampler, run: sampler_vs_reweighting },
    Criterion { id: 7, name: "entanglement profiles of the three ensembles", suite: Suite::Sampler, run: profile_shapes },
    Criterion { id: 8, name: "environment spectra vs Marchenko-Pastur", suite: Suite::Spectra, run: spectral_laws },
    Criterion { id: 9, name: "S-transform recursion", suite: Suite::Spectra, run: stransform_suite },
    Criterion { id: 10, name: "sample output is reproducible", suite: Suite::Reproducibility, run: reproducibility },
];

pub fn criteria(suite: Suite) -> impl Iterator<Item = &'static Criterion> {
    CRITERIA.iter().filter(move |c| suite == Suite::All || c.suite == suite)
}

fn runtime(start: Instant, limit_seconds: f64) -> Measurement {
    Measurement::new("seconds", start.elapsed().as_secs_f64(), Relation::Below, limit_seconds)
}

fn environment_oracle(_: Scale) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let mut rng = RngStream::new(0x5eed_0001, 0);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    // every (N, d) pair with N in 2..=8, bond dimensions cycling through 1..=8
    for k in 0..50 {
        let n = 2 + k % 7;
        let d = 2 + (k / 7) % 2;
        let dmax = 1 + (k * 5 + 3) % 8;
        let p = bond_profile(n, d, dmax)?;
        let m = mps::sample_rmps(&p, &mut rng)?;
        let envs = mps::right_environments(&m);
        let psi = mps::to_statevector(&m)?;
        for cut in 1..n {
            let mut env = envs.spectrum(cut)?;
            env.reverse();
            let dense = mps::schmidt_spectrum_dense(&psi, cut, &p)?;
            for (i, v) in dense.iter().enumerate() {
                worst = worst.max((v - env.get(i).copied().unwrap_or(0.0)).abs());
            }
        }
        count += 1;
    }
    Ok(vec![
        Measurement::new("states", count as f64, Relation::AtLeast, 50.0),
        Measurement::new("max spectrum deviation", worst, Relation::Below, 1e-10),
        runtime(start, 30.0),
    ])
}

fn metric_determinant(_: Scale) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let step = 1e-4;
    let p = bond_profile(4, 2, 2)?;
    let mut rng = RngStream::new(0x5eed_0002, 0);
    let mut pairs = Vec::new();
    let mut cross: f64 = 0.0;
    for _ in 0..10 {
        let chain = mps::sample_rmps_unitaries(&p, &mut rng)?;
        let gram = metric_gram_numeric(&chain, step)?;
        cross = cross.max(gram.cross_site_max());
        let w = fs_log_weight(&mps::right_environments(&chain.to_mps()), &p)?.0;
        pairs.push((gram.log_det()?, w));
    }
    let mut worst: f64 = 0.0;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let lhs = pairs[i].0 - pairs[j].0;
            let rhs = pairs[i].1 - pairs[j].1;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(vec![
        Measurement::new("max pairwise log-det mismatch", worst, Relation::Below, 1e-3),
        Measurement::new("max cross-site Gram entry", cross, Relation::Below, 1e-7),
        runtime(start, 300.0),
    ])
}

fn jacobian_pushforward(scale: Scale) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let n = match scale {
        Scale::Full => 100_000,
        Scale::Desk => 20_000,
    };
    // uniform qubit states: |c|^2 = sin^2(x) is uniform, so the cdf of x is sin^2
    let mut rng = RngStream::new(0x5eed_0003, 0);
    let mut radii = Vec::with_capacity(n);
    for _ in 0..n {
        let u = haar_unitary(2, &mut rng)?;
        radii.push(extract_coordinates(&u, 2, 1)?.x[(0, 0)].norm());
    }
    let ks = ks_distance(&radii, |x| x.sin().powi(2))?;

    let mut first_order: f64 = 0.0;
    for (d, bond) in [(2, 1), (2, 2), (3, 2), (2, 4)] {
        for _ in 0..20 {
            let rows = (d - 1) * bond;
            let mut x = CMat::from_fn(rows, bond, |_, _| rng.complex_normal());
            let top = Coordinates::new(x.clone()).x_hat_eigenvalues().last().copied().unwrap_or(1.0);
            x *= C64::new(0.1 / top, 0.0);
            let c = Coordinates::new(x);
            first_order = first_order.max((jacobian(&c, d, bond)? - jacobian_first_order(&c)).abs());
        }
    }
    Ok(vec![
        Measurement::new("KS distance of radial law", ks, Relation::Below, 0.02),
        Measurement::new("max |J - first order| at radius 0.1", first_order, Relation::Below, 1e-3),
        runtime(start, 60.0),
    ])
}

fn chart_roundtrip(_: Scale) -> Result<Vec<Measurement>> {
    let mut rng = RngStream::new(0x5eed_0004, 0);
    let mut worst: f64 = 0.0;
    let limit = std::f64::consts::FRAC_PI_2 - 0.1;
    for (d, bond) in [(2, 2), (3, 2), (2, 4)] {
        let n = d * bond;
        for _ in 0..100 {
            let mut x = CMat::from_fn(n - bond, bond, |_, _| rng.complex_normal());
            let top = Coordinates::new(x.clone()).x_hat_eigenvalues().last().copied().unwrap_or(1.0);
            let radius = rng.uniform() * limit;
            x *= C64::new(radius / top, 0.0);
            let u = exp_param(&Coordinates::new(x.clone()), &CMat::identity(n, n))?;
            let back = extract_coordinates(&u, d, bond)?;
            worst = worst.max(linalg::max_abs(&(back.x - x)));
        }
    }
    Ok(vec![Measurement::new("max recovery error", worst, Relation::Below, 1e-8)])
}

/// Identity check for one size; shared with `verify --suite identity`.
pub fn identity_measurements(profile: &BondProfile, samples: usize, seed: u64) -> Result<Vec<Measurement>> {
    let rng = RngStream::new(seed, 0);
    let fs = identity_resolution_check(profile, IdentityEnsemble::FsReweighted, samples, &rng)?;
    let tag = format!("N={} d={} D={}", profile.n_sites(), profile.local_dim(), profile.max_bond());
    Ok(vec![
        Measurement::new(format!("{tag} relative Frobenius deviation"), fs.frobenius_rel_dev, Relation::Below, 0.02),
        Measurement::new(format!("{tag} samples"), fs.n_samples as f64, Relation::AtLeast, samples as f64),
    ])
}

fn identity_resolution(_: Scale) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let mut out = Vec::new();
    for n in [2, 3] {
        out.extend(identity_measurements(&bond_profile(n, 2, 2)?, 100_000, 0x5eed_0005 + n as u64)?);
    }
    out.push(runtime(start, 120.0));
    Ok(out)
}

fn sampler_vs_reweighting(scale: Scale) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let (samples, is_samples) = match scale {
        Scale::Full => (12_000, 100_000),
        Scale::Desk => (6_000, 30_000),
    };
    let mut c = SamplerConfig::new(6, 2, 4, samples, 0x5eed_0006);
    c.chains = 4;
    c.thin_sweeps = 2;
    let p = c.profile()?;
    let mid = p.mid_cut();
    let series: Vec<Vec<f64>> = run_fs_chains(&c, |s, _| mps::entropy_bits(&s.spectra()[mid - 1]))?
        .into_iter()
        .map(|o| o.observations)
        .collect();
    let (mean, se, ess) = chain_mean(&series);
    let is = fs_expectation_reweighted(
        |_, e| mps::entropy_bits(&e.spectrum(mid).unwrap_or_default()),
        &p,
        is_samples,
        &RngStream::new(0x5eed_0006, 99),
    )?;
    let z = (mean - is.mean).abs() / (se * se + is.standard_error * is.standard_error).sqrt();
    let mut out = vec![Measurement::new("combined z", z, Relation::Below, 3.0)];
    if scale == Scale::Full {
        out.push(Measurement::new("chain ESS", ess, Relation::AtLeast, 2000.0));
    }
    out.push(runtime(start, 600.0));
    Ok(out)
}

/// Per-sample entropy profiles of a direct ensemble.
fn direct_profiles(ensemble: Ensemble, p: &BondProfile, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let cfg = ExperimentConfig::resolve(ConfigLayer {
        n_sites: Some(p.n_sites()),
        local_dim: Some(p.local_dim()),
        bond_dim: Some(p.max_bond()),
        ensemble: Some(ensemble),
        samples: Some(samples),
        seed: Some(seed),
        ..Default::default()
    })?;
    Ok(crate::sample::generate(&cfg)?.records.into_iter().map(|r| r.entropies).collect())
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn z_score(mean: f64, se: f64) -> f64 {
    if se > 0.0 {
        mean / se
    } else if mean == 0.0 {
        0.0
    } else {
        mean.signum() * f64::INFINITY
    }
}

fn profile_shapes(_: Scale) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let samples = 200;
    let p = bond_profile(10, 2, 8)?;
    let n = p.n_sites();
    let mid = p.mid_cut();
    let seed = 0x5eed_0007;

    let mut c = SamplerConfig::new(n, 2, 8, samples, seed);
    c.chains = 2;
    c.thin_sweeps = 10;
    let fs: Vec<Vec<Vec<f64>>> = run_fs_chains(&c, |s, _| s.spectra().iter().map(|x| mps::entropy_bits(x)).collect())?
        .into_iter()
        .map(|o| o.observations)
        .collect();
    let rmps = direct_profiles(Ensemble::Rmps, &p, samples, seed)?;
    let central = direct_profiles(Ensemble::Central, &p, samples, seed)?;

    // (a) mirror symmetry of the chain average, paired per sample
    let mut fs_worst: f64 = 0.0;
    let mut rmps_best: f64 = 0.0;
    for cut in (1..n).filter(|&k| k < n - k) {
        let diffs: Vec<Vec<f64>> =
            fs.iter().map(|ch| ch.iter().map(|e| e[cut - 1] - e[n - cut - 1]).collect()).collect();
        let (m, se, _) = chain_mean(&diffs);
        fs_worst = fs_worst.max(z_score(m, se).abs());
        let d: Vec<f64> = rmps.iter().map(|e| e[cut - 1] - e[n - cut - 1]).collect();
        let (m, se) = mean_se(&d);
        rmps_best = rmps_best.max(z_score(m, se).abs());
    }
    // (c) the gauge centre sits at cut ceil(N/2); compare with its larger neighbour
    let centre = n.div_ceil(2);
    let neighbour_mean = |k: usize| central.iter().map(|e| e[k - 1]).sum::<f64>();
    let nb = if neighbour_mean(centre - 1) >= neighbour_mean(centre + 1) { centre - 1 } else { centre + 1 };
    let jumps: Vec<f64> = central.iter().map(|e| e[centre - 1] - e[nb - 1]).collect();
    let (jm, jse) = mean_se(&jumps);
    // (d) the FS ensemble is more entangled in the middle
    let fs_mid: Vec<Vec<f64>> = fs.iter().map(|ch| ch.iter().map(|e| e[mid - 1]).collect()).collect();
    let (fm, fse, _) = chain_mean(&fs_mid);
    let rm: Vec<f64> = rmps.iter().map(|e| e[mid - 1]).collect();
    let (rmean, rse) = mean_se(&rm);
    let dominance = (fm - rmean) / (fse * fse + rse * rse).sqrt();

    Ok(vec![
        Measurement::new("FS max mirrored |z|", fs_worst, Relation::Below, 3.0),
        Measurement::new("RMPS max mirrored |z|", rmps_best, Relation::Above, 3.0),
        Measurement::new("central jump z", z_score(jm, jse), Relation::Above, 3.0),
        Measurement::new("FS - RMPS mid-cut z", dominance, Relation::Above, 3.0),
        runtime(start, 1800.0),
    ])
}

fn spectral_laws(scale: Scale) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let (samples, chains, thin) = match scale {
        Scale::Full => (1000, 4, 2),
        Scale::Desk => (200, 2, 1),
    };
    let (n, d, dmax) = (10, 3, 27);
    let p = bond_profile(n, d, dmax)?;
    let cut = equilibrium_cut(&p)?;
    let mid = p.mid_cut();
    let seed = 0x5eed_0008;

    let rmps_start = Instant::now();
    let rng = RngStream::new(seed, 1 << 32);
    let blocks = mpsm::measure::par_blocks(samples, &rng, |_, count, mut r| {
        (0..count)
            .map(|_| {
                let envs = mps::right_environments(&mps::sample_rmps(&p, &mut r)?);
                Ok((envs.spectrum(cut)?, envs.spectrum(mid)?))
            })
            .collect::<mpsm::Result<Vec<_>>>()
    });
    let mut rmps_spectra = Vec::with_capacity(samples);
    for b in blocks {
        rmps_spectra.extend(b?);
    }
    let rmps_seconds = rmps_start.elapsed().as_secs_f64();
    let (rmps_eq, rmps_mid): (Vec<_>, Vec<_>) = rmps_spectra.into_iter().unzip();
    let rmps_law = MpLaw::new(1.0 / d as f64)?;
    let rmps_ks = ks_distance(&scaled_cut_eigenvalues(&p, cut, &rmps_eq)?, |x| rmps_law.cdf(x))?;
    let rmps_mid_ks = ks_distance(&scaled_cut_eigenvalues(&p, mid, &rmps_mid)?, |x| rmps_law.cdf(x))?;

    let mut c = SamplerConfig::new(n, d, dmax, samples, seed);
    c.chains = chains;
    c.thin_sweeps = thin;
    let fs_spectra: Vec<(Vec<f64>, Vec<f64>)> = run_fs_chains(&c, |s, _| {
        let sp = s.spectra();
        (sp[cut - 1].clone(), sp[mid - 1].clone())
    })?
    .into_iter()
    .flat_map(|o| o.observations)
    .collect();
    let (fs_eq, fs_mid): (Vec<_>, Vec<_>) = fs_spectra.into_iter().unzip();
    let fs_law = MpLaw::new(fs_aspect_ratio(d)?)?;
    let fs_ks = ks_distance(&scaled_cut_eigenvalues(&p, cut, &fs_eq)?, |x| fs_law.cdf(x))?;
    let fs_mid_ks = ks_distance(&scaled_cut_eigenvalues(&p, mid, &fs_mid)?, |x| fs_law.cdf(x))?;

    Ok(vec![
        Measurement::new(format!("RMPS KS vs MP(1/d), cut {cut}"), rmps_ks, Relation::AtMost, 0.05),
        Measurement::new(format!("FS KS vs MP(1/(2d-1)), cut {cut}"), fs_ks, Relation::AtMost, 0.10),
        Measurement::reported(format!("RMPS KS at middle cut {mid}"), rmps_mid_ks),
        Measurement::reported(format!("FS KS at middle cut {mid}"), fs_mid_ks),
        Measurement::new("RMPS seconds", rmps_seconds, Relation::Below, 300.0),
        runtime(start, 7200.0),
    ])
}

fn stransform_suite(_: Scale) -> Result<Vec<Measurement>> {
    let k = 8;
    let mut fixed: f64 = 0.0;
    let mut roundtrip: f64 = 0.0;
    let mut convergence: f64 = 0.0;
    let mut steps: f64 = 0.0;
    for d in [2usize, 3, 5] {
        let c = 1.0 / d as f64;
        let s = STransform::marchenko_pastur(c, k);
        fixed = fixed.max(transfer_stransform(&s, d).max_deviation(&s));
        let m = MomentSeries::new(mp_moments(c, k)?);
        let s_from_m = moments_to_stransform(&m)?;
        roundtrip = roundtrip.max(s_from_m.max_deviation(&s));
        let back = stransform_to_moments(&s_from_m)?;
        for (a, b) in back.coeffs.iter().zip(&m.coeffs) {
            roundtrip = roundtrip.max((a - b).abs() / b.abs().max(1.0));
        }
        let hist = iterate_transfer(&STransform::identity(k), d, &s, 1e-10, 60);
        convergence = convergence.max(*hist.last().unwrap_or(&f64::INFINITY));
        steps = steps.max((hist.len() - 1) as f64);
    }
    Ok(vec![
        Measurement::new("fixed-point deviation", fixed, Relation::Below, 1e-12),
        Measurement::new("moments/S round trip", roundtrip, Relation::Below, 1e-12),
        Measurement::new("distance after iteration", convergence, Relation::Below, 1e-10),
        Measurement::new("iterations", steps, Relation::AtMost, 60.0),
    ])
}

fn reproducibility(_: Scale) -> Result<Vec<Measurement>> {
    let root = tempfile::tempdir().map_err(|e| CliError::io(std::env::temp_dir(), e))?;
    let base = |ens: Ensemble| ConfigLayer {
        n_sites: Some(6),
        local_dim: Some(2),
        bond_dim: Some(4),
        ensemble: Some(ens),
        samples: Some(2500),
        chains: Some(3),
        burn_in_sweeps: Some(20),
        thin_sweeps: Some(1),
        seed: Some(7),
        format: Some(Format::Csv),
        ..Default::default()
    };
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    for ens in [Ensemble::Rmps, Ensemble::Central, Ensemble::Fs] {
        let mut outputs = Vec::new();
        for (run, threads) in [(0, 1), (1, 1), (2, 3)] {
            let dir = root.path().join(format!("{}-{run}", ens.name()));
            let mut layer = base(ens);
            layer.out_dir = Some(dir.clone());
            let cfg = ExperimentConfig::resolve(layer)?;
            let meta = crate::sample::run(&cfg, &crate::sample::SampleOptions { threads: Some(threads), checkpoint: false })?;
            let mut files = Vec::new();
            for f in meta.files.iter().filter(|f| f.ends_with(".csv")) {
                let path = dir.join(f);
                files.push(std::fs::read(&path).map_err(|e| CliError::io(&path, e))?);
            }
            outputs.push(files);
        }
        for other in &outputs[1..] {
            compared += other.len();
            mismatches += outputs[0].iter().zip(other).filter(|(a, b)| a != b).count();
        }
    }
    Ok(vec![
        Measurement::new("files compared", compared as f64, Relation::AtLeast, 14.0),
        Measurement::new("differing files", mismatches as f64, Relation::AtMost, 0.0),
    ])
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub scale: Scale,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

pub fn run_suite(suite: Suite, scale: Scale, mut on_result: impl FnMut(&CheckResult)) -> VerifyReport {
    let checks: Vec<CheckResult> = criteria(suite)
        .map(|c| {
            let r = c.run(scale);
            on_result(&r);
            r
        })
        .collect();
    VerifyReport { suite, scale, passed: checks.iter().all(|c| c.passed), checks }
}

/// The identity check at a user-chosen size.
pub fn run_identity_at(profile: &BondProfile, samples: usize, seed: u64) -> CheckResult {
    let start = Instant::now();
    let (measurements, error) = match identity_measurements(profile, samples, seed) {
        Ok(m) => (m, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    CheckResult {
        id: 5,
        name: "resolution of the identity",
        passed: error.is_none() && measurements.iter().all(|m| m.passed),
        seconds: start.elapsed().as_secs_f64(),
        measurements,
        error,
    }
}
