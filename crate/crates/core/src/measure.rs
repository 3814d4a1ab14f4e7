//! The Fubini–Study correction weight and estimators built on it.
//!
//! For a left-canonical chain the volume form induced by the Hilbert-space
//! metric differs from the product of Haar measures by
//! `prod_i det(Gamma_i)^(w_i)`, with `w_i = d D_{i-1} - D_i` the number of
//! complex chart coordinates at site `i`. Everything here works with the log
//! of that weight.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RngStream, C64};
use crate::mps::{self, BondProfile, Mps, RightEnvironments, UnitaryChain};
use crate::param::Coordinates;

/// Samples handed to one worker stream.
pub const BLOCK: usize = 1000;

/// `sum_i w_i log det Gamma_i`; `-inf` when a weighted determinant vanishes.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogWeight(pub f64);

impl LogWeight {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_singular(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

/// `w_cut log det Gamma_cut`, zero when the site has no coordinates. A
/// one-dimensional bond has `Gamma = Tr Gamma = 1`, so it contributes zero
/// as well.
pub fn cut_log_term(profile: &BondProfile, cut: usize, gamma: &CMat) -> Result<f64> {
    let w = profile.weight(cut);
    if w == 0 || profile.bond(cut) == 1 {
        return Ok(0.0);
    }
    Ok(w as f64 * linalg::log_det_psd(gamma)?)
}

pub fn log_weight_terms(envs: &RightEnvironments, profile: &BondProfile) -> Result<Vec<f64>> {
    if envs.len() != profile.n_cuts() {
        return Err(Error::InvalidArgument(format!(
            "{} environments for a chain with {} cuts",
            envs.len(),
            profile.n_cuts()
        )));
    }
    (1..=envs.len())
        .map(|cut| {
            let g = envs.gamma(cut);
            if g.nrows() != profile.bond(cut) {
                return Err(Error::InvalidArgument(format!(
                    "Gamma_{cut} is {}x{}, profile says D={}",
                    g.nrows(),
                    g.ncols(),
                    profile.bond(cut)
                )));
            }
            cut_log_term(profile, cut, g)
        })
        .collect()
}

pub fn fs_log_weight(envs: &RightEnvironments, profile: &BondProfile) -> Result<LogWeight> {
    Ok(LogWeight(log_weight_terms(envs, profile)?.iter().sum()))
}

/// Where one site's coordinates live inside a [`Gram`] matrix.
#[derive(Clone, Debug)]
pub struct GramBlock {
    pub site: usize,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug)]
pub struct Gram {
    pub matrix: CMat,
    pub blocks: Vec<GramBlock>,
}

impl Gram {
    /// Largest entry coupling coordinates of two different sites.
    pub fn cross_site_max(&self) -> f64 {
        let mut m = 0.0_f64;
        for a in &self.blocks {
            for b in &self.blocks {
                if a.site == b.site {
                    continue;
                }
                let v = self.matrix.view((a.offset, b.offset), (a.len, b.len));
                m = v.iter().fold(m, |acc, z| acc.max(z.norm()));
            }
        }
        m
    }

    pub fn log_det(&self) -> Result<f64> {
        linalg::log_det_psd(&self.matrix)
    }
}

fn perturbed_state(chain: &UnitaryChain, site: usize, x: &Coordinates) -> Result<Vec<C64>> {
    let mut c = chain.clone();
    c.unitaries[site - 1] = crate::param::exp_param(x, &chain.unitaries[site - 1])?;
    mps::to_statevector(&c.to_mps())
}

/// Finite-difference metric at the reference chain: every site's chart
/// coordinates are perturbed around `x = 0`, real and imaginary directions
/// are combined into Wirtinger derivatives, projected off `|Psi>`, and the
/// Hermitian Gram matrix of the tangents is returned.
pub fn metric_gram_numeric(chain: &UnitaryChain, step: f64) -> Result<Gram> {
    if !(1e-5..=1e-3).contains(&step) {
        return Err(Error::InvalidArgument(format!("step {step} outside [1e-5, 1e-3]")));
    }
    let profile = &chain.profile;
    profile.check_dense(mps::DENSE_LIMIT)?;
    let psi = mps::to_statevector(&chain.to_mps())?;
    let mut tangents: Vec<Vec<C64>> = Vec::new();
    let mut blocks = Vec::new();
    for site in 1..=profile.n_sites() {
        let rows = profile.weight(site);
        let cols = profile.bond(site);
        let offset = tangents.len();
        for a in 0..rows {
            for b in 0..cols {
                let dir = |z: C64| -> Result<Vec<C64>> {
                    let mut x = Coordinates::zeros(rows, cols);
                    x.x[(a, b)] = z;
                    perturbed_state(chain, site, &x)
                };
                let h = C64::new(step, 0.0);
                let ih = C64::new(0.0, step);
                let (rp, rm) = (dir(h)?, dir(-h)?);
                let (ip, im) = (dir(ih)?, dir(-ih)?);
                let inv = 1.0 / (2.0 * step);
                let mut t: Vec<C64> = (0..psi.len())
                    .map(|k| {
                        let d_re = (rp[k] - rm[k]) * inv;
                        let d_im = (ip[k] - im[k]) * inv;
                        (d_re - C64::new(0.0, 1.0) * d_im) * 0.5
                    })
                    .collect();
                let overlap: C64 = psi.iter().zip(&t).map(|(p, v)| p.conj() * v).sum();
                for (v, p) in t.iter_mut().zip(&psi) {
                    *v -= p * overlap;
                }
                tangents.push(t);
            }
        }
        if rows * cols > 0 {
            blocks.push(GramBlock { site, offset, len: rows * cols });
        }
    }
    let n = tangents.len();
    let t = CMat::from_fn(psi.len(), n, |k, mu| tangents[mu][k]);
    let g = linalg::symmetrize(&(t.adjoint() * t));
    Ok(Gram { matrix: g, blocks })
}

/// Run `f(block_index, count, stream)` over fixed-size blocks in parallel and
/// return the results in block order.
pub fn par_blocks<T, F>(n_samples: usize, rng: &RngStream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize, RngStream) -> T + Sync,
{
    let n_blocks = n_samples.div_ceil(BLOCK);
    (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK.min(n_samples - b * BLOCK);
            f(b, count, rng.substream(b as u64))
        })
        .collect()
}

/// One RMPS draw with its environments and log weight.
pub struct WeightedDraw {
    pub mps: Mps,
    pub envs: RightEnvironments,
    pub log_weight: LogWeight,
}

pub fn weighted_draw(profile: &BondProfile, rng: &mut RngStream) -> Result<WeightedDraw> {
    let mps = mps::sample_rmps(profile, rng)?;
    let envs = mps::right_environments(&mps);
    let log_weight = fs_log_weight(&envs, profile)?;
    Ok(WeightedDraw { mps, envs, log_weight })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub z: f64,
    pub standard_error: f64,
    pub log_z: f64,
    pub n_samples: usize,
}

/// Monte Carlo estimate of `E_RMPS[exp(log weight)]`.
pub fn partition_estimate(
    profile: &BondProfile,
    n_samples: usize,
    rng: &RngStream,
) -> Result<PartitionEstimate> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!("need >= 100 samples, got {n_samples}")));
    }
    let parts = par_blocks(n_samples, rng, |_, count, mut r| {
        (0..count)
            .map(|_| Ok(weighted_draw(profile, &mut r)?.log_weight.0))
            .collect::<Result<Vec<f64>>>()
    });
    let mut lw = Vec::with_capacity(n_samples);
    for p in parts {
        lw.extend(p?);
    }
    let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = lw.len() as f64;
    if m == f64::NEG_INFINITY {
        return Ok(PartitionEstimate { z: 0.0, standard_error: 0.0, log_z: m, n_samples });
    }
    let w: Vec<f64> = lw.iter().map(|l| (l - m).exp()).collect();
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let scale = m.exp();
    Ok(PartitionEstimate {
        z: mean * scale,
        standard_error: (var / n).sqrt() * scale,
        log_z: m + mean.ln(),
        n_samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityEnsemble {
    Rmps,
    FsReweighted,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub frobenius_rel_dev: f64,
    pub max_offdiag: f64,
    pub diag_spread: f64,
    pub effective_samples: f64,
    pub n_samples: usize,
}

/// Compensated (Kahan) accumulator for a dense complex matrix.
struct KahanMatrix {
    n: usize,
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl KahanMatrix {
    fn new(n: usize) -> Self {
        Self { n, sum: vec![0.0; 2 * n * n], comp: vec![0.0; 2 * n * n] }
    }

    fn add_at(&mut self, k: usize, v: f64) {
        let y = v - self.comp[k];
        let t = self.sum[k] + y;
        self.comp[k] = (t - self.sum[k]) - y;
        self.sum[k] = t;
    }

    /// `+= w |psi><psi|`
    fn add_projector(&mut self, psi: &[C64], w: f64) {
        for i in 0..self.n {
            let a = psi[i] * w;
            for j in 0..self.n {
                let v = a * psi[j].conj();
                let k = 2 * (i * self.n + j);
                self.add_at(k, v.re);
                self.add_at(k + 1, v.im);
            }
        }
    }

    fn scaled(&self, s: f64) -> Vec<C64> {
        self.sum.chunks(2).map(|c| C64::new(c[0] * s, c[1] * s)).collect()
    }
}

struct BlockAccum {
    sum: Vec<C64>,
    weight: f64,
    weight_sq: f64,
    max_log: f64,
}

/// Monte Carlo estimate of `E[|Psi><Psi|]` compared with `I / d^N`.
pub fn identity_resolution_check(
    profile: &BondProfile,
    ensemble: IdentityEnsemble,
    n_samples: usize,
    rng: &RngStream,
) -> Result<IdentityReport> {
    let dim = profile.check_dense(1 << 10)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let parts = par_blocks(n_samples, rng, |_, count, mut r| -> Result<BlockAccum> {
        let mut draws = Vec::with_capacity(count);
        for _ in 0..count {
            let d = weighted_draw(profile, &mut r)?;
            let lw = match ensemble {
                IdentityEnsemble::Rmps => 0.0,
                IdentityEnsemble::FsReweighted => d.log_weight.0,
            };
            draws.push((lw, mps::to_statevector(&d.mps)?));
        }
        let max_log = draws.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
        let mut acc = KahanMatrix::new(dim);
        let (mut weight, mut weight_sq) = (0.0, 0.0);
        for (lw, psi) in &draws {
            let w = if max_log.is_finite() { (lw - max_log).exp() } else { 0.0 };
            acc.add_projector(psi, w);
            weight += w;
            weight_sq += w * w;
        }
        Ok(BlockAccum { sum: acc.scaled(1.0), weight, weight_sq, max_log })
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    let top = parts.iter().map(|p| p.max_log).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::ContractViolation("every sample has zero weight".into()));
    }
    let mut rho = vec![C64::new(0.0, 0.0); dim * dim];
    let (mut w, mut w2) = (0.0, 0.0);
    for p in &parts {
        let s = (p.max_log - top).exp();
        for (r, v) in rho.iter_mut().zip(&p.sum) {
            *r += v * s;
        }
        w += p.weight * s;
        w2 += p.weight_sq * s * s;
    }
    for r in rho.iter_mut() {
        *r /= w;
    }
    let target = 1.0 / dim as f64;
    let mut dev = 0.0;
    let mut max_off = 0.0_f64;
    let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..dim {
        for j in 0..dim {
            let v = rho[i * dim + j];
            if i == j {
                dev += (v - target).norm_sqr();
                dmin = dmin.min(v.re);
                dmax = dmax.max(v.re);
            } else {
                dev += v.norm_sqr();
                max_off = max_off.max(v.norm());
            }
        }
    }
    let ref_norm = (dim as f64).sqrt() * target;
    Ok(IdentityReport {
        frobenius_rel_dev: dev.sqrt() / ref_norm,
        max_offdiag: max_off,
        diag_spread: dmax - dmin,
        effective_samples: w * w / w2,
        n_samples,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Reweighted {
    pub mean: f64,
    pub standard_error: f64,
    pub effective_samples: f64,
    pub n_samples: usize,
    /// Set when the effective sample size drops below 10.
    pub degenerate_weights: bool,
}

/// Self-normalized importance-sampling estimate of `E_FS[f]` from RMPS
/// draws weighted by `exp(log weight)`, with a delta-method standard error.
pub fn fs_expectation_reweighted<F>(
    observable: F,
    profile: &BondProfile,
    n_samples: usize,
    rng: &RngStream,
) -> Result<Reweighted>
where
    F: Fn(&Mps, &RightEnvironments) -> f64 + Sync,
{
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let parts = par_blocks(n_samples, rng, |_, count, mut r| {
        (0..count)
            .map(|_| {
                let d = weighted_draw(profile, &mut r)?;
                Ok((d.log_weight.0, observable(&d.mps, &d.envs)))
            })
            .collect::<Result<Vec<(f64, f64)>>>()
    });
    let mut draws = Vec::with_capacity(n_samples);
    for p in parts {
        draws.extend(p?);
    }
    Ok(self_normalized(&draws))
}

/// Self-normalized estimate from `(log weight, value)` pairs.
pub fn self_normalized(draws: &[(f64, f64)]) -> Reweighted {
    let n = draws.len();
    let top = draws.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = draws.iter().map(|d| (d.0 - top).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    // shift by the first value so a constant observable is reproduced exactly
    let f0 = draws[0].1;
    let shift: f64 = w.iter().zip(draws).map(|(wk, d)| wk * (d.1 - f0)).sum::<f64>() / sw;
    let mean = f0 + shift;
    let var: f64 = w
        .iter()
        .zip(draws)
        .map(|(wk, d)| wk * wk * (d.1 - mean).powi(2))
        .sum::<f64>()
        / (sw * sw);
    let ess = sw * sw / sw2;
    Reweighted {
        mean,
        standard_error: var.sqrt(),
        effective_samples: ess,
        n_samples: n,
        degenerate_weights: ess < 10.0,
    }
}
