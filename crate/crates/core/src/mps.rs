//! Open-boundary matrix product states in left-canonical form.
//!
//! Site `i` (1-based) carries a tensor of shape `(D_{i-1}, d, D_i)`. It is
//! stored as a `(d * D_{i-1}) x D_i` isometry whose rows are ordered
//! physical-index-major, so block `n` (rows `n*D_{i-1} .. (n+1)*D_{i-1}`) is
//! the matrix `A_n`. With that ordering the first `D_{i-1}` rows of a site
//! unitary are the `n = 0` block, which matches the split used by the
//! exponential chart in [`crate::param`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RngStream, C64};

/// Largest dense state (in amplitudes) we are willing to build.
pub const DENSE_LIMIT: usize = 1 << 24;

/// Chain geometry: bond dimensions `D_i = min(d^i, d^(N-i), D_max)` and
/// per-site coordinate counts `w_i = d * D_{i-1} - D_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BondProfile {
    n_sites: usize,
    local_dim: usize,
    max_bond: usize,
    dims: Vec<usize>,
    weights: Vec<usize>,
}

/// `min(base^exp, cap)` without overflow.
fn capped_pow(base: usize, exp: usize, cap: usize) -> usize {
    let mut acc = 1usize;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
        if acc >= cap {
            return cap;
        }
    }
    acc.min(cap)
}

impl BondProfile {
    pub fn new(n_sites: usize, local_dim: usize, max_bond: usize) -> Result<Self> {
        if n_sites < 1 || local_dim < 2 || max_bond < 1 {
            return Err(Error::InvalidArgument(format!(
                "bond profile needs N >= 1, d >= 2, D >= 1 (got N={n_sites}, d={local_dim}, D={max_bond})"
            )));
        }
        let dims: Vec<usize> = (0..=n_sites)
            .map(|i| {
                capped_pow(local_dim, i, max_bond).min(capped_pow(local_dim, n_sites - i, max_bond))
            })
            .collect();
        let weights = (1..=n_sites).map(|i| local_dim * dims[i - 1] - dims[i]).collect();
        Ok(Self { n_sites, local_dim, max_bond, dims, weights })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn max_bond(&self) -> usize {
        self.max_bond
    }

    /// `D_0 ..= D_N`.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// `D_i` for `0 <= i <= N`.
    pub fn bond(&self, i: usize) -> usize {
        self.dims[i]
    }

    /// `w_1 ..= w_N`.
    pub fn weights(&self) -> &[usize] {
        &self.weights
    }

    /// `w_i` for site `1 <= i <= N`.
    pub fn weight(&self, site: usize) -> usize {
        self.weights[site - 1]
    }

    /// Size of the unitary frame at `site`: `d * D_{site-1}`.
    pub fn frame_dim(&self, site: usize) -> usize {
        self.local_dim * self.dims[site - 1]
    }

    /// Number of cuts, `N - 1`.
    pub fn n_cuts(&self) -> usize {
        self.n_sites - 1
    }

    /// Cuts whose bond dimension has reached `D_max`.
    pub fn saturated_cuts(&self) -> Vec<usize> {
        (1..self.n_sites).filter(|&i| self.dims[i] == self.max_bond).collect()
    }

    /// The middle cut `floor(N / 2)` (for odd N the left of the two).
    pub fn mid_cut(&self) -> usize {
        self.n_sites / 2
    }

    /// `d^N`, or `None` on overflow.
    pub fn hilbert_dim(&self) -> Option<usize> {
        let mut acc = 1usize;
        for _ in 0..self.n_sites {
            acc = acc.checked_mul(self.local_dim)?;
        }
        Some(acc)
    }

    /// Upper bound of `sum_i w_i log det Gamma_i`, attained at
    /// `Gamma_i = I / D_i`.
    pub fn log_weight_bound(&self) -> f64 {
        (1..self.n_sites)
            .map(|i| {
                let d = self.dims[i] as f64;
                self.weight(i) as f64 * d * (1.0 / d).ln()
            })
            .sum()
    }

    pub(crate) fn check_dense(&self, limit: usize) -> Result<usize> {
        match self.hilbert_dim() {
            Some(n) if n <= limit => Ok(n),
            _ => Err(Error::Resource(format!(
                "d^N = {}^{} exceeds the dense limit of {limit} amplitudes",
                self.local_dim, self.n_sites
            ))),
        }
    }
}

/// One left-canonical site tensor.
#[derive(Clone, Debug)]
pub struct SiteIsometry {
    pub site: usize,
    pub left: usize,
    pub phys: usize,
    pub right: usize,
    /// `(phys * left) x right`, rows ordered `n * left + l`.
    pub matrix: CMat,
}

impl SiteIsometry {
    pub fn from_matrix(site: usize, left: usize, phys: usize, matrix: CMat) -> Result<Self> {
        if matrix.nrows() != phys * left {
            return Err(Error::InvalidArgument(format!(
                "site {site}: expected {} rows, got {}",
                phys * left,
                matrix.nrows()
            )));
        }
        let right = matrix.ncols();
        Ok(Self { site, left, phys, right, matrix })
    }

    /// `A_n` as a `left x right` matrix.
    pub fn block(&self, n: usize) -> CMat {
        self.matrix.rows(n * self.left, self.left).into_owned()
    }

    pub fn blocks(&self) -> Vec<CMat> {
        (0..self.phys).map(|n| self.block(n)).collect()
    }

    /// `max |sum_n A_n^dag A_n - I|`.
    pub fn canonical_residual(&self) -> f64 {
        linalg::isometry_residual(&self.matrix)
    }
}

#[derive(Clone, Debug)]
pub struct Mps {
    pub profile: BondProfile,
    pub sites: Vec<SiteIsometry>,
}

/// Per-site unitary frames; site `i` keeps the full `d D_{i-1}` unitary whose
/// first `D_i` columns are the isometry.
#[derive(Clone, Debug)]
pub struct UnitaryChain {
    pub profile: BondProfile,
    pub unitaries: Vec<CMat>,
}

impl UnitaryChain {
    pub fn isometry(&self, site: usize) -> SiteIsometry {
        let u = &self.unitaries[site - 1];
        let cols = self.profile.bond(site);
        SiteIsometry {
            site,
            left: self.profile.bond(site - 1),
            phys: self.profile.local_dim(),
            right: cols,
            matrix: u.columns(0, cols).into_owned(),
        }
    }

    pub fn to_mps(&self) -> Mps {
        Mps {
            profile: self.profile.clone(),
            sites: (1..=self.profile.n_sites()).map(|i| self.isometry(i)).collect(),
        }
    }
}

/// Right environments `Gamma_1 .. Gamma_{N-1}` (`Gamma_N = 1` is implicit).
#[derive(Clone, Debug)]
pub struct RightEnvironments {
    pub gammas: Vec<CMat>,
}

impl RightEnvironments {
    /// `Gamma_i` for cut `1 <= i <= N-1`.
    pub fn gamma(&self, cut: usize) -> &CMat {
        &self.gammas[cut - 1]
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// Ascending eigenvalues of `Gamma_cut`.
    pub fn spectrum(&self, cut: usize) -> Result<Vec<f64>> {
        linalg::hermitian_eigenvalues(self.gamma(cut))
    }
}

pub fn bond_profile(n_sites: usize, local_dim: usize, max_bond: usize) -> Result<BondProfile> {
    BondProfile::new(n_sites, local_dim, max_bond)
}

/// Independent Haar unitaries per site, sizes `d D_{i-1}`.
pub fn sample_rmps_unitaries(profile: &BondProfile, rng: &mut RngStream) -> Result<UnitaryChain> {
    let unitaries = (1..=profile.n_sites())
        .map(|i| linalg::haar_unitary(profile.frame_dim(i), rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(UnitaryChain { profile: profile.clone(), unitaries })
}

/// Draw from the sequential Haar ensemble: each site keeps the first `D_i`
/// columns of an independent Haar unitary.
pub fn sample_rmps(profile: &BondProfile, rng: &mut RngStream) -> Result<Mps> {
    Ok(sample_rmps_unitaries(profile, rng)?.to_mps())
}

/// One step of the right-to-left recurrence:
/// `Gamma_{i-1} = sum_n A_n Gamma_i A_n^dag`.
pub fn environment_step(iso: &CMat, left: usize, gamma: &CMat) -> CMat {
    let phys = iso.nrows() / left;
    let mut out = CMat::zeros(left, left);
    for n in 0..phys {
        let a = iso.rows(n * left, left);
        let ag = a * gamma;
        out += ag * a.adjoint();
    }
    linalg::symmetrize(&out)
}

pub fn right_environments(mps: &Mps) -> RightEnvironments {
    let n = mps.profile.n_sites();
    let mut gammas = vec![CMat::zeros(0, 0); n.saturating_sub(1)];
    let mut g = CMat::identity(1, 1);
    for i in (2..=n).rev() {
        let s = &mps.sites[i - 1];
        g = environment_step(&s.matrix, s.left, &g);
        gammas[i - 2] = g.clone();
    }
    RightEnvironments { gammas }
}

/// Contract per-site block lists into a dense vector with the first site as
/// the most significant digit.
fn contract_blocks(sites: &[Vec<CMat>]) -> Vec<C64> {
    // rows of `acc` enumerate (n_1 .. n_k), columns the open right bond
    let mut acc = CMat::identity(1, 1);
    for blocks in sites {
        let phys = blocks.len();
        let right = blocks[0].ncols();
        let mut next = CMat::zeros(acc.nrows() * phys, right);
        for (n, b) in blocks.iter().enumerate() {
            let prod = &acc * b;
            for r in 0..acc.nrows() {
                next.row_mut(r * phys + n).copy_from(&prod.row(r));
            }
        }
        acc = next;
    }
    acc.column(0).iter().copied().collect()
}

pub fn to_statevector(mps: &Mps) -> Result<Vec<C64>> {
    mps.profile.check_dense(DENSE_LIMIT)?;
    let blocks: Vec<Vec<CMat>> = mps.sites.iter().map(|s| s.blocks()).collect();
    Ok(contract_blocks(&blocks))
}

/// `-sum p log2 p` over a spectrum, with `0 log 0 = 0` and tiny negative
/// round-off treated as zero.
pub fn entropy_bits(spectrum: &[f64]) -> f64 {
    spectrum
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Von Neumann entropies (bits) at cuts `1 .. N-1`.
pub fn entanglement_profile(envs: &RightEnvironments) -> Result<Vec<f64>> {
    (1..=envs.len()).map(|i| Ok(entropy_bits(&envs.spectrum(i)?))).collect()
}

/// Squared singular values (descending) of the `d^cut x d^(N-cut)` reshaping.
pub fn schmidt_spectrum_dense(psi: &[C64], cut: usize, profile: &BondProfile) -> Result<Vec<f64>> {
    let n = profile.n_sites();
    if cut < 1 || cut >= n {
        return Err(Error::InvalidArgument(format!("cut {cut} outside 1..{}", n - 1)));
    }
    let total = profile.check_dense(DENSE_LIMIT)?;
    if psi.len() != total {
        return Err(Error::InvalidArgument(format!(
            "state has {} amplitudes, profile expects {total}",
            psi.len()
        )));
    }
    let rows = capped_pow(profile.local_dim(), cut, usize::MAX);
    let cols = total / rows;
    // psi is row-major in (left, right); nalgebra wants column-major, so
    // build the transpose view directly.
    let m = CMat::from_row_slice(rows, cols, psi);
    let gram = if rows <= cols { &m * m.adjoint() } else { m.adjoint() * &m };
    let mut vals = linalg::hermitian_eigenvalues(&linalg::symmetrize(&gram))?;
    vals.reverse();
    Ok(vals)
}

/// Central-gauge sample: left-canonical Haar isometries on sites
/// `1..=ceil(N/2)`, right-canonical Haar isometries on the rest, contracted
/// densely and normalized.
pub fn sample_central_gauge(profile: &BondProfile, rng: &mut RngStream) -> Result<Vec<C64>> {
    profile.check_dense(DENSE_LIMIT)?;
    let n = profile.n_sites();
    let d = profile.local_dim();
    let center = n.div_ceil(2);
    let mut sites = Vec::with_capacity(n);
    for i in 1..=n {
        let left = profile.bond(i - 1);
        let right = profile.bond(i);
        if i <= center {
            let u = linalg::haar_unitary(d * left, rng)?;
            let iso = u.columns(0, right).into_owned();
            sites.push((0..d).map(|k| iso.rows(k * left, left).into_owned()).collect());
        } else {
            // Mirror image: a (d * right) x left isometry read with the roles
            // of the bonds swapped, so sum_n B_n B_n^dag = I.
            let u = linalg::haar_unitary(d * right, rng)?;
            let iso = u.columns(0, left).into_owned();
            sites.push(
                (0..d)
                    .map(|k| iso.rows(k * right, right).adjoint())
                    .collect::<Vec<CMat>>(),
            );
        }
    }
    let mut psi = contract_blocks(&sites);
    normalize(&mut psi);
    Ok(psi)
}

pub fn normalize(psi: &mut [C64]) {
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for z in psi.iter_mut() {
            *z /= norm;
        }
    }
}

pub fn norm_sqr(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

/// Entropy profile of a dense state from its Schmidt spectra.
pub fn dense_entanglement_profile(psi: &[C64], profile: &BondProfile) -> Result<Vec<f64>> {
    (1..profile.n_sites())
        .map(|cut| Ok(entropy_bits(&schmidt_spectrum_dense(psi, cut, profile)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn rng(seed: u64) -> RngStream {
        RngStream::new(seed, 0)
    }

    #[test]
    fn profile_examples() {
        let p = bond_profile(10, 2, 8).unwrap();
        assert_eq!(p.dims(), &[1, 2, 4, 8, 8, 8, 8, 8, 4, 2, 1]);
        assert_eq!(bond_profile(3, 2, 8).unwrap().dims(), &[1, 2, 2, 1]);
        for &cut in &p.saturated_cuts()[1..] {
            assert_eq!(p.weight(cut), 8);
        }
        assert_eq!(p.weight(5), 8);
        assert!(bond_profile(0, 2, 2).is_err());
        assert!(bond_profile(3, 1, 2).is_err());
        assert!(bond_profile(3, 2, 0).is_err());
    }

    #[test]
    fn profile_invariants() {
        for n in 1..12 {
            for d in 2..5 {
                for dmax in [1, 2, 3, 5, 8, 27] {
                    let p = bond_profile(n, d, dmax).unwrap();
                    assert_eq!(p.bond(0), 1);
                    assert_eq!(p.bond(n), 1);
                    for i in 1..=n {
                        assert_eq!(p.weight(i) + p.bond(i), d * p.bond(i - 1));
                        if i < n && p.bond(i - 1) == dmax && p.bond(i) == dmax {
                            assert_eq!(p.weight(i), dmax * (d - 1));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn product_state_when_bond_is_one() {
        let p = bond_profile(4, 2, 1).unwrap();
        let mps = sample_rmps(&p, &mut rng(1)).unwrap();
        let envs = right_environments(&mps);
        for g in &envs.gammas {
            assert_eq!(g.shape(), (1, 1));
            assert!((g[(0, 0)].re - 1.0).abs() < 1e-12);
        }
        let psi = to_statevector(&mps).unwrap();
        // tensor product of the local columns
        let mut want = vec![C64::new(1.0, 0.0)];
        for s in &mps.sites {
            want = want
                .iter()
                .flat_map(|a| (0..2).map(move |k| (a, k)))
                .map(|(a, k)| a * s.matrix[(k, 0)])
                .collect();
        }
        for (x, y) in psi.iter().zip(&want) {
            assert!((x - y).norm() < 1e-14);
        }
        assert!(entanglement_profile(&envs).unwrap().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn single_site_state() {
        let p = bond_profile(1, 3, 1).unwrap();
        let mps = sample_rmps(&p, &mut rng(2)).unwrap();
        let psi = to_statevector(&mps).unwrap();
        for k in 0..3 {
            assert!((psi[k] - mps.sites[0].matrix[(k, 0)]).norm() < 1e-15);
        }
    }

    #[test]
    fn rmps_is_left_canonical_and_normalized() {
        let mut r = rng(3);
        for (n, d, dmax) in [(6, 2, 4), (5, 3, 9), (8, 2, 8)] {
            let p = bond_profile(n, d, dmax).unwrap();
            let mps = sample_rmps(&p, &mut r).unwrap();
            for s in &mps.sites {
                assert!(s.canonical_residual() < 1e-10);
            }
            let psi = to_statevector(&mps).unwrap();
            assert!((norm_sqr(&psi) - 1.0).abs() < 1e-10);
            let envs = right_environments(&mps);
            for g in &envs.gammas {
                assert!((linalg::trace_re(g) - 1.0).abs() < 1e-10);
                assert!(linalg::hermitian_residual(g) < 1e-10);
            }
        }
    }

    #[test]
    fn environments_match_dense_schmidt() {
        let mut r = rng(4);
        for (n, d, dmax) in [(6, 2, 4), (5, 3, 9), (7, 2, 3)] {
            let p = bond_profile(n, d, dmax).unwrap();
            let mps = sample_rmps(&p, &mut r).unwrap();
            let envs = right_environments(&mps);
            let psi = to_statevector(&mps).unwrap();
            for cut in 1..n {
                let mut env = envs.spectrum(cut).unwrap();
                env.reverse();
                let dense = schmidt_spectrum_dense(&psi, cut, &p).unwrap();
                for (k, &v) in dense.iter().enumerate() {
                    let e = env.get(k).copied().unwrap_or(0.0);
                    assert!((v - e).abs() < 1e-10, "cut {cut} k {k}: {v} vs {e}");
                }
                // rank bound
                let rank = dense.iter().filter(|&&v| v > 1e-12).count();
                assert!(rank <= p.bond(cut));
            }
        }
    }

    #[test]
    fn entropy_examples() {
        let d = 4;
        let max = RightEnvironments {
            gammas: vec![CMat::identity(d, d) * C64::new(1.0 / d as f64, 0.0)],
        };
        assert!((entanglement_profile(&max).unwrap()[0] - 2.0).abs() < 1e-12);
        let mut pure = CMat::zeros(3, 3);
        pure[(1, 1)] = C64::new(1.0, 0.0);
        let pure = RightEnvironments { gammas: vec![pure] };
        assert!(entanglement_profile(&pure).unwrap()[0].abs() < 1e-12);
        assert!((entropy_bits(&[0.5, 0.25, 0.25]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn dense_schmidt_examples() {
        let p = bond_profile(2, 2, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = vec![C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)];
        let s = schmidt_spectrum_dense(&bell, 1, &p).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-14 && (s[1] - 0.5).abs() < 1e-14);
        let prod = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let s = schmidt_spectrum_dense(&prod, 1, &p).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-14 && s[1].abs() < 1e-14);
        assert!(schmidt_spectrum_dense(&prod, 2, &p).is_err());
    }

    #[test]
    fn gauge_transformation_leaves_state_invariant() {
        let p = bond_profile(6, 2, 4).unwrap();
        let mut r = rng(5);
        let mps = sample_rmps(&p, &mut r).unwrap();
        let psi = to_statevector(&mps).unwrap();
        let i = 3;
        let x = linalg::haar_unitary(p.bond(i), &mut r).unwrap();
        let mut g = mps.clone();
        g.sites[i - 1].matrix = &g.sites[i - 1].matrix * &x;
        let next = &mut g.sites[i];
        let left = next.left;
        for n in 0..next.phys {
            let blk = x.adjoint() * next.matrix.rows(n * left, left);
            next.matrix.rows_mut(n * left, left).copy_from(&blk);
        }
        let phi = to_statevector(&g).unwrap();
        for (a, b) in psi.iter().zip(&phi) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn central_gauge_normalized() {
        let mut r = rng(6);
        for (n, d, dmax) in [(4, 2, 1), (6, 2, 4), (5, 3, 3), (7, 2, 8)] {
            let p = bond_profile(n, d, dmax).unwrap();
            let psi = sample_central_gauge(&p, &mut r).unwrap();
            assert_eq!(psi.len(), p.hilbert_dim().unwrap());
            assert!((norm_sqr(&psi) - 1.0).abs() < 1e-10);
            if dmax == 1 {
                let prof = dense_entanglement_profile(&psi, &p).unwrap();
                assert!(prof.iter().all(|s| s.abs() < 1e-9));
            }
        }
    }

    #[test]
    fn dense_guard() {
        let p = bond_profile(30, 2, 2).unwrap();
        let mps = sample_rmps(&p, &mut rng(7)).unwrap();
        assert!(matches!(to_statevector(&mps), Err(Error::Resource(_))));
        assert!(matches!(sample_central_gauge(&p, &mut rng(7)), Err(Error::Resource(_))));
    }

    #[test]
    fn environments_trace_one_for_any_left_canonical_input() {
        let p = bond_profile(9, 3, 10).unwrap();
        let mps = sample_rmps(&p, &mut rng(8)).unwrap();
        let envs = right_environments(&mps);
        for g in &envs.gammas {
            assert!((linalg::trace_re(g) - 1.0).abs() < 1e-10);
            assert!(max_abs(g) <= 1.0 + 1e-12);
        }
    }
}
