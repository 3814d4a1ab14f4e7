//! Marchenko–Pastur laws, empirical spectral statistics and the S-transform
//! recursion for right-environment spectra.
//!
//! Series are truncated real power series; `MomentSeries` stores `M_1..M_K`
//! (no constant term) and `STransform` stores `S_0..S_{K-1}`, the
//! coefficients that determine the same `K` moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::BondProfile;

/// Largest series order we trust in double precision.
pub const MAX_ORDER: usize = 16;
pub const DEFAULT_ORDER: usize = 8;

/// Unit-mean Marchenko–Pastur law with aspect ratio `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpLaw {
    c: f64,
}

impl MpLaw {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidArgument(format!("aspect ratio must lie in (0, 1], got {c}")));
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn lower(&self) -> f64 {
        (1.0 - self.c.sqrt()).powi(2)
    }

    pub fn upper(&self) -> f64 {
        (1.0 + self.c.sqrt()).powi(2)
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = (self.lower(), self.upper());
        if x <= lo || x >= hi {
            return 0.0;
        }
        ((hi - x) * (x - lo)).sqrt() / (2.0 * std::f64::consts::PI * self.c * x)
    }

    fn angle_integrand(&self, t: f64) -> f64 {
        // x = lo + (hi - lo)(1 - cos t)/2 removes both square-root edges
        let (lo, hi) = (self.lower(), self.upper());
        let half = 0.5 * (hi - lo);
        let x = lo + half * (1.0 - t.cos());
        let s = t.sin();
        if x <= 0.0 {
            // c = 1 at t = 0: sin^2 t / x -> 2 / half
            return half * 2.0 / (2.0 * std::f64::consts::PI * self.c);
        }
        half * half * s * s / (2.0 * std::f64::consts::PI * self.c * x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = (self.lower(), self.upper());
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let t = (1.0 - 2.0 * (x - lo) / (hi - lo)).clamp(-1.0, 1.0).acos();
        adaptive_simpson(&|t| self.angle_integrand(t), 0.0, t, 1e-12).clamp(0.0, 1.0)
    }

    /// Total mass by quadrature; 1 up to quadrature error.
    pub fn mass(&self) -> f64 {
        adaptive_simpson(&|t| self.angle_integrand(t), 0.0, std::f64::consts::PI, 1e-13)
    }

    /// `int x^k density` by quadrature.
    pub fn moment_quadrature(&self, k: i32) -> f64 {
        let (lo, hi) = (self.lower(), self.upper());
        let half = 0.5 * (hi - lo);
        adaptive_simpson(
            &|t| self.angle_integrand(t) * (lo + half * (1.0 - f64::cos(t))).powi(k),
            0.0,
            std::f64::consts::PI,
            1e-13,
        )
    }

    pub fn moments(&self, k: usize) -> Result<Vec<f64>> {
        mp_moments(self.c, k)
    }
}

pub fn mp_density(x: f64, c: f64) -> Result<f64> {
    Ok(MpLaw::new(c)?.density(x))
}

pub fn mp_cdf(x: f64, c: f64) -> Result<f64> {
    Ok(MpLaw::new(c)?.cdf(x))
}

/// `m_k = sum_j N(k, j+1) c^j` with Narayana numbers `N`.
pub fn mp_moments(c: f64, k: usize) -> Result<Vec<f64>> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidArgument(format!("aspect ratio must lie in (0, 1], got {c}")));
    }
    if k > MAX_ORDER {
        return Err(Error::InvalidArgument(format!("order {k} exceeds {MAX_ORDER}")));
    }
    Ok((1..=k)
        .map(|n| (1..=n).rev().fold(0.0, |acc, r| acc * c + narayana(n, r)))
        .collect())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn narayana(n: usize, r: usize) -> f64 {
    (binomial(n, r) * binomial(n, r - 1) / n as f64).round()
}

fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    // a few fixed panels first so a narrow feature cannot be skipped
    let panels = 8;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = h / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 40)
        })
        .sum()
}

/// The leftmost saturated cut. Environments are built right to left, so this
/// is the one that has gone through the most transfer steps at full bond
/// dimension; cuts near the right edge still remember the boundary.
pub fn equilibrium_cut(profile: &BondProfile) -> Result<usize> {
    profile.saturated_cuts().first().copied().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no cut reaches bond dimension {} for N={}, d={}",
            profile.max_bond(),
            profile.n_sites(),
            profile.local_dim()
        ))
    })
}

/// Eigenvalues of `Gamma_cut` rescaled by `D_cut` and pooled over samples.
/// `spectra[s]` is the spectrum of sample `s` at this cut.
pub fn scaled_cut_eigenvalues(profile: &BondProfile, cut: usize, spectra: &[Vec<f64>]) -> Result<Vec<f64>> {
    if cut == 0 || cut >= profile.n_sites() {
        return Err(Error::InvalidArgument(format!("cut {cut} is not an interior cut")));
    }
    let dim = profile.bond(cut);
    if dim != profile.max_bond() {
        return Err(Error::InvalidArgument(format!(
            "cut {cut} has bond {dim} < {}; only saturated cuts share the bulk law",
            profile.max_bond()
        )));
    }
    let mut out = Vec::with_capacity(spectra.len() * dim);
    for s in spectra {
        if s.len() != dim {
            return Err(Error::InvalidDimension(format!("spectrum of length {} at bond {dim}", s.len())));
        }
        out.extend(s.iter().map(|&v| v * dim as f64));
    }
    Ok(out)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in sample".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    Ok(KsTest { statistic: d, p_value: kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d) })
}

/// First `k` raw moments.
pub fn empirical_moments(samples: &[f64], k: usize) -> Vec<f64> {
    let n = samples.len() as f64;
    (1..=k as i32).map(|p| samples.iter().map(|v| v.powi(p)).sum::<f64>() / n).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub density: f64,
}

/// Density-normalised histogram on `[lo, hi)`; values outside are dropped
/// from the counts but kept in the normalisation.
pub fn histogram(samples: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Vec<HistogramBin>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidArgument(format!("bad histogram range [{lo}, {hi}) x {bins}")));
    }
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in samples {
        if v >= lo && v < hi {
            counts[(((v - lo) / w) as usize).min(bins - 1)] += 1;
        }
    }
    let n = samples.len().max(1) as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: lo + i as f64 * w,
            hi: lo + (i + 1) as f64 * w,
            count,
            density: count as f64 / (n * w),
        })
        .collect())
}

/// `M(z) = sum_{n>=1} M_n z^n`, stored as `[M_1, .., M_K]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub coeffs: Vec<f64>,
}

/// `S(z) = sum_{n>=0} S_n z^n`, stored as `[S_0, .., S_{K-1}]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct STransform {
    pub coeffs: Vec<f64>,
}

impl MomentSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Unit-mean MP law.
    pub fn marchenko_pastur(c: f64, k: usize) -> Result<Self> {
        Ok(Self::new(mp_moments(c, k)?))
    }
}

impl STransform {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// `S = 1`, the point mass at 1.
    pub fn identity(k: usize) -> Self {
        let mut coeffs = vec![0.0; k];
        if k > 0 {
            coeffs[0] = 1.0;
        }
        Self { coeffs }
    }

    /// `1 / (1 + c z)`.
    pub fn marchenko_pastur(c: f64, k: usize) -> Self {
        Self::new((0..k).map(|n| (-c).powi(n as i32)).collect())
    }

    pub fn max_deviation(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Truncated product of two series with constant terms at index 0.
fn mul(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &x) in a.iter().enumerate().take(len) {
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Compositional inverse of `f(z) = sum_{n>=1} f_n z^n` (index 0 holds `f_1`).
fn revert(f: &[f64]) -> Result<Vec<f64>> {
    let k = f.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    if f[0] == 0.0 || !f[0].is_finite() {
        return Err(Error::NonInvertibleSeries);
    }
    // full series with constant slot: g[0] = 0, g[n] = g_n
    let mut g = vec![0.0; k + 1];
    g[1] = 1.0 / f[0];
    for n in 2..=k {
        // coefficient n of f(g) with g_n still zero
        let mut power = g.clone();
        let mut acc = f[0] * power[n];
        for fm in &f[1..n] {
            power = mul(&power, &g, k + 1);
            acc += fm * power[n];
        }
        g[n] = -acc / f[0];
    }
    Ok(g[1..].to_vec())
}

/// `S(z) = (1+z)/z * M^{<-1>}(z)`.
pub fn moments_to_stransform(m: &MomentSeries) -> Result<STransform> {
    let chi = revert(&m.coeffs)?;
    let k = chi.len();
    // chi / z has coefficients chi_1, chi_2, ...
    Ok(STransform::new(mul(&[1.0, 1.0], &chi, k)))
}

pub fn stransform_to_moments(s: &STransform) -> Result<MomentSeries> {
    let k = s.order();
    // chi(z)/z = S(z) / (1 + z)
    let geometric: Vec<f64> = (0..k).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let chi = mul(&s.coeffs, &geometric, k);
    Ok(MomentSeries::new(revert(&chi)?))
}

/// One step of the environment recursion:
/// `S'(z) = (1 + z/d^2) / (1 + z/d) * S(z/d)`.
pub fn transfer_stransform(s: &STransform, d: usize) -> STransform {
    let k = s.order();
    let d = d as f64;
    let scaled: Vec<f64> = s.coeffs.iter().enumerate().map(|(n, c)| c / d.powi(n as i32)).collect();
    let prefactor = mul(&[1.0, 1.0 / (d * d)], &(0..k).map(|n| (-1.0 / d).powi(n as i32)).collect::<Vec<_>>(), k);
    STransform::new(mul(&prefactor, &scaled, k))
}

/// Iterate the transfer map from `s` until consecutive-free distance to
/// `target` drops below `tol`; returns the distance history.
pub fn iterate_transfer(s: &STransform, d: usize, target: &STransform, tol: f64, max_iter: usize) -> Vec<f64> {
    let mut cur = s.clone();
    let mut hist = vec![cur.max_deviation(target)];
    while hist.len() <= max_iter && *hist.last().unwrap() >= tol {
        cur = transfer_stransform(&cur, d);
        hist.push(cur.max_deviation(target));
    }
    hist
}

/// Aspect ratio of the crude Wishart approximation to the FS environment law.
pub fn fs_aspect_ratio(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("local dimension must be >= 2, got {d}")));
    }
    Ok(1.0 / (2 * d - 1) as f64)
}
