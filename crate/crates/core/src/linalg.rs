//! Dense complex kernels and seeded random streams.
//!
//! Everything here works on [`CMat`], a heap-allocated complex matrix. The
//! heavy lifting (QR, Hermitian eigensolver, Cholesky) is delegated to
//! `nalgebra`; this module adds the contracts the rest of the crate relies on.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Eigenvalues at or below this floor make a determinant vanish.
pub const SINGULARITY_FLOOR: f64 = 1e-300;

const HERMITIAN_TOL: f64 = 1e-10;

/// A reproducible random stream: `(seed, stream_id)` fully determines the
/// sequence. Backed by ChaCha8, whose stream selector gives independent
/// sequences for distinct ids without any jump-ahead bookkeeping.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

/// Serializable position of an [`RngStream`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream_id: u64,
    /// Word position within the stream, as a decimal string (u128 does not
    /// survive JSON numbers).
    pub word_pos: String,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.seed,
            stream_id: self.stream_id,
            word_pos: self.rng.get_word_pos().to_string(),
        }
    }

    pub fn from_state(state: &RngState) -> Result<Self> {
        let pos: u128 = state
            .word_pos
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad rng word position {:?}", state.word_pos)))?;
        let mut s = Self::new(state.seed, state.stream_id);
        s.rng.set_word_pos(pos);
        Ok(s)
    }

    /// Child stream `k`, fully determined by `(seed, stream_id, k)`. Used to
    /// hand fixed-size blocks of work to parallel workers.
    pub fn substream(&self, k: u64) -> RngStream {
        let key = splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0x5851_f42d_4c95_7f2d)));
        RngStream::new(key, k)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Circular complex Gaussian with `E|z|^2 = 1`.
    pub fn complex_normal(&mut self) -> C64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        C64::new(self.normal() * s, self.normal() * s)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |M - M^dag|`.
pub fn hermitian_residual(m: &CMat) -> f64 {
    let mut r = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

/// `max |V^dag V - I|`, the column orthonormality residual.
pub fn isometry_residual(v: &CMat) -> f64 {
    let g = v.adjoint() * v;
    let mut r = 0.0_f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            r = r.max((g[(i, j)] - target).norm());
        }
    }
    r
}

fn check_square(m: &CMat, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidDimension(format!(
            "{what} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_hermitian(h: &CMat, what: &str) -> Result<()> {
    check_square(h, what)?;
    let scale = max_abs(h).max(1.0);
    let r = hermitian_residual(h);
    if !(r < HERMITIAN_TOL * scale) {
        return Err(Error::ContractViolation(format!(
            "{what} is not Hermitian (residual {r:e})"
        )));
    }
    Ok(())
}

/// Haar-distributed `n x n` unitary: QR of a complex Ginibre matrix, with
/// column `j` of `Q` multiplied by the phase `R_jj / |R_jj|`. Without the
/// phase fix the distribution depends on the QR sign convention.
pub fn haar_unitary(n: usize, rng: &mut RngStream) -> Result<CMat> {
    if n == 0 {
        return Err(Error::InvalidDimension("haar_unitary requires n >= 1".into()));
    }
    let g = CMat::from_fn(n, n, |_, _| rng.complex_normal());
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let rjj = r[(j, j)];
        let norm = rjj.norm();
        let phase = if norm > 0.0 { rjj / norm } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
/// Columns of the returned matrix are the matching eigenvectors.
pub fn hermitian_eigensystem(h: &CMat) -> Result<(Vec<f64>, CMat)> {
    check_hermitian(h, "hermitian_eigensystem input")?;
    let hs = symmetrize(h);
    let eig = hs.symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Ascending eigenvalues only.
pub fn hermitian_eigenvalues(h: &CMat) -> Result<Vec<f64>> {
    check_hermitian(h, "hermitian_eigenvalues input")?;
    let mut v: Vec<f64> = symmetrize(h).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `(M + M^dag) / 2`.
pub fn symmetrize(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `log det G` for a positive-semidefinite Hermitian `G`. Returns `-inf` when
/// any eigenvalue sits at or below [`SINGULARITY_FLOOR`].
pub fn log_det_psd(g: &CMat) -> Result<f64> {
    check_hermitian(g, "log_det_psd input")?;
    let gs = symmetrize(g);
    if let Some(chol) = gs.clone().cholesky() {
        let l = chol.l_dirty();
        let mut acc = 0.0;
        let mut singular = false;
        for k in 0..l.nrows() {
            // complex Cholesky will happily take sqrt of a negative pivot
            let z = l[(k, k)];
            let d = z.re;
            if d * d <= SINGULARITY_FLOOR || z.im.abs() > 1e-8 * d {
                singular = true;
                break;
            }
            acc += 2.0 * d.ln();
        }
        if !singular {
            return Ok(acc);
        }
    }
    let eig = hermitian_eigenvalues(&gs)?;
    log_det_from_eigenvalues(&eig, trace_re(&gs))
}

fn log_det_from_eigenvalues(eig: &[f64], trace: f64) -> Result<f64> {
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * trace.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::ContractViolation(format!(
            "log_det_psd input is indefinite (eigenvalue {min:e})"
        )));
    }
    if eig.iter().any(|&l| l <= SINGULARITY_FLOOR) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(eig.iter().map(|l| l.ln()).sum())
}

pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|k| m[(k, k)].re).sum()
}

/// Polar decomposition `C = U_C sqrt(W)` of an `m x n` matrix with `m >= n`,
/// where `W = C^dag C` and `U_C` has orthonormal columns.
pub fn polar_decompose(c: &CMat) -> Result<(CMat, CMat)> {
    let (m, n) = c.shape();
    if n == 0 || m < n {
        return Err(Error::InvalidDimension(format!(
            "polar_decompose needs m >= n >= 1, got {m}x{n}"
        )));
    }
    let w = symmetrize(&(c.adjoint() * c));
    let (vals, vecs) = hermitian_eigensystem(&w)?;
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let floor = 1e-13 * top.max(f64::MIN_POSITIVE);
    if vals[0] <= floor {
        return Err(Error::DegeneratePolar(vals[0]));
    }
    let inv_sqrt = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        vals.iter().map(|&l| C64::new(1.0 / l.sqrt(), 0.0)),
    ));
    let u = c * &vecs * inv_sqrt * vecs.adjoint();
    Ok((u, w))
}

/// Apply `f` to the spectrum of a Hermitian matrix given its eigensystem.
pub fn spectral_map<F: Fn(f64) -> C64>(vals: &[f64], vecs: &CMat, f: F) -> CMat {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let fl = f(l);
        for i in 0..n {
            scaled[(i, j)] *= fl;
        }
    }
    scaled * vecs.adjoint()
}

/// `exp(K)` for anti-Hermitian `K`, via the eigensystem of the Hermitian
/// matrix `iK`: with `iK = V diag(l) V^dag`, `exp(K) = V diag(e^{-il}) V^dag`.
pub fn anti_hermitian_exp(k: &CMat) -> Result<CMat> {
    check_square(k, "anti_hermitian_exp input")?;
    let h = k * C64::new(0.0, 1.0);
    let scale = max_abs(k).max(1.0);
    if !(hermitian_residual(&h) < HERMITIAN_TOL * scale) {
        return Err(Error::ContractViolation(
            "anti_hermitian_exp input is not anti-Hermitian".into(),
        ));
    }
    let (vals, vecs) = hermitian_eigensystem(&symmetrize(&h))?;
    Ok(spectral_map(&vals, &vecs, |l| C64::new(0.0, -l).exp()))
}

/// Anti-Hermitian generator `i G` where `G` is drawn from the GUE with unit
/// diagonal variance (off-diagonal real and imaginary parts have variance 1/2).
pub fn gue_anti_hermitian(n: usize, rng: &mut RngStream) -> CMat {
    let mut g = CMat::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = C64::new(rng.normal(), 0.0);
        for j in (i + 1)..n {
            let z = rng.complex_normal();
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
        }
    }
    g * C64::new(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_hermitian(n: usize, rng: &mut RngStream) -> CMat {
        let g = CMat::from_fn(n, n, |_, _| rng.complex_normal());
        symmetrize(&g)
    }

    fn random_psd(n: usize, rng: &mut RngStream) -> CMat {
        let g = CMat::from_fn(n, n + 2, |_, _| rng.complex_normal());
        symmetrize(&(&g * g.adjoint()))
    }

    #[test]
    fn rng_streams_reproducible_and_distinct() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut other = RngStream::new(7, 4);
        let xa: Vec<f64> = (0..16).map(|_| a.normal()).collect();
        let xb: Vec<f64> = (0..16).map(|_| b.normal()).collect();
        let xo: Vec<f64> = (0..16).map(|_| other.normal()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xo);
    }

    #[test]
    fn rng_state_resumes_bit_exact() {
        let mut a = RngStream::new(11, 2);
        for _ in 0..37 {
            a.normal();
        }
        let st = a.state();
        let json = serde_json::to_string(&st).unwrap();
        let mut b = RngStream::from_state(&serde_json::from_str(&json).unwrap()).unwrap();
        for _ in 0..50 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
    }

    #[test]
    fn haar_n1_is_a_phase() {
        let mut rng = RngStream::new(1, 0);
        let u = haar_unitary(1, &mut rng).unwrap();
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn haar_rejects_zero() {
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(haar_unitary(0, &mut rng), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = RngStream::new(2, 0);
        for n in [2, 3, 5, 8, 17, 40] {
            let u = haar_unitary(n, &mut rng).unwrap();
            assert!(isometry_residual(&u) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn haar_second_moment() {
        // E|U_00|^2 = 1/n; Var|U_00|^2 = (n-1)/(n^2 (n+1)).
        let n = 4;
        let draws = 10_000;
        let mut rng = RngStream::new(3, 0);
        let xs: Vec<f64> = (0..draws)
            .map(|_| haar_unitary(n, &mut rng).unwrap()[(0, 0)].norm_sqr())
            .collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn haar_left_invariance_first_column() {
        // The phase of R_jj is what makes V U and U equal in law. Compare the
        // mean of |U_00|^4 (E = 2/(n(n+1))) for U and V U.
        let n = 3;
        let draws = 10_000;
        let mut rng = RngStream::new(4, 0);
        let v = haar_unitary(n, &mut RngStream::new(99, 0)).unwrap();
        let mut a = Vec::with_capacity(draws);
        let mut b = Vec::with_capacity(draws);
        for _ in 0..draws {
            let u = haar_unitary(n, &mut rng).unwrap();
            a.push(u[(0, 0)].norm_sqr().powi(2));
            let vu = &v * &u;
            b.push(vu[(0, 0)].norm_sqr().powi(2));
        }
        let stats = |x: &[f64]| {
            let m = x.iter().sum::<f64>() / x.len() as f64;
            let v = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
            (m, (v / x.len() as f64).sqrt())
        };
        let (ma, sa) = stats(&a);
        let (mb, sb) = stats(&b);
        let expected = 2.0 / (n as f64 * (n as f64 + 1.0));
        assert!((ma - expected).abs() < 3.0 * sa);
        assert!((mb - expected).abs() < 3.0 * sb);
        assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt());
    }

    #[test]
    fn eigensystem_identity_and_diagonal() {
        let (vals, _) = hermitian_eigensystem(&CMat::identity(3, 3)).unwrap();
        assert_eq!(vals.len(), 3);
        for v in vals {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let h = CMat::from_diagonal(&DVector::from_vec(vec![c(2.0), c(-1.0)]));
        let (vals, _) = hermitian_eigensystem(&h).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn eigensystem_reconstructs() {
        let mut rng = RngStream::new(5, 0);
        for n in [1, 2, 4, 9, 27] {
            let h = random_hermitian(n, &mut rng);
            let (vals, vecs) = hermitian_eigensystem(&h).unwrap();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            let back = spectral_map(&vals, &vecs, c);
            let err = max_abs(&(&back - &h));
            assert!(err < 1e-10 * max_abs(&h).max(1.0), "n={n} err={err}");
            assert!(isometry_residual(&vecs) < 1e-10);
        }
    }

    #[test]
    fn eigensystem_rejects_non_hermitian() {
        let mut m = CMat::identity(2, 2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(hermitian_eigensystem(&m), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn log_det_examples() {
        assert!(log_det_psd(&CMat::identity(4, 4)).unwrap().abs() < 1e-14);
        let h = CMat::from_diagonal(&DVector::from_vec(vec![c(0.5), c(0.5)]));
        assert!((log_det_psd(&h).unwrap() - 2.0 * 0.5f64.ln()).abs() < 1e-14);
        let sing = CMat::from_diagonal(&DVector::from_vec(vec![c(1.0), c(0.0)]));
        assert_eq!(log_det_psd(&sing).unwrap(), f64::NEG_INFINITY);
        let indef = CMat::from_diagonal(&DVector::from_vec(vec![c(1.0), c(-0.5)]));
        assert!(matches!(log_det_psd(&indef), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn log_det_matches_eigenvalues() {
        let mut rng = RngStream::new(6, 0);
        for n in [1, 3, 8, 27] {
            let g = random_psd(n, &mut rng);
            let want: f64 = hermitian_eigenvalues(&g).unwrap().iter().map(|l| l.ln()).sum();
            let got = log_det_psd(&g).unwrap();
            assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "n={n}");
        }
    }

    #[test]
    fn log_det_block_additive() {
        let mut rng = RngStream::new(7, 0);
        let a = random_psd(3, &mut rng);
        let b = random_psd(4, &mut rng);
        let mut ab = CMat::zeros(7, 7);
        ab.view_mut((0, 0), (3, 3)).copy_from(&a);
        ab.view_mut((3, 3), (4, 4)).copy_from(&b);
        let lhs = log_det_psd(&ab).unwrap();
        let rhs = log_det_psd(&a).unwrap() + log_det_psd(&b).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn polar_examples() {
        let mut rng = RngStream::new(8, 0);
        let u = haar_unitary(3, &mut rng).unwrap();
        let (uc, w) = polar_decompose(&u).unwrap();
        assert!(max_abs(&(&uc - &u)) < 1e-10);
        assert!(max_abs(&(&w - CMat::identity(3, 3))) < 1e-10);

        let two = CMat::identity(2, 2) * c(2.0);
        let (uc, w) = polar_decompose(&two).unwrap();
        assert!(max_abs(&(&uc - CMat::identity(2, 2))) < 1e-12);
        assert!(max_abs(&(&w - CMat::identity(2, 2) * c(4.0))) < 1e-12);
    }

    #[test]
    fn polar_reconstructs() {
        let mut rng = RngStream::new(9, 0);
        for (m, n) in [(2, 2), (4, 2), (6, 3), (9, 9)] {
            let cm = CMat::from_fn(m, n, |_, _| rng.complex_normal());
            let (uc, w) = polar_decompose(&cm).unwrap();
            assert!(isometry_residual(&uc) < 1e-10);
            let (vals, vecs) = hermitian_eigensystem(&w).unwrap();
            let sqrt_w = spectral_map(&vals, &vecs, |l| c(l.max(0.0).sqrt()));
            assert!(max_abs(&(&uc * sqrt_w - &cm)) < 1e-10);
        }
    }

    #[test]
    fn polar_degenerate() {
        let mut cm = CMat::zeros(3, 2);
        cm[(0, 0)] = c(1.0);
        assert!(matches!(polar_decompose(&cm), Err(Error::DegeneratePolar(_))));
        assert!(matches!(polar_decompose(&CMat::zeros(1, 2)), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn exp_examples() {
        let e = anti_hermitian_exp(&CMat::zeros(3, 3)).unwrap();
        assert!(max_abs(&(&e - CMat::identity(3, 3))) < 1e-14);
        let th = 0.7_f64;
        let mut k = CMat::zeros(2, 2);
        k[(0, 1)] = c(-th);
        k[(1, 0)] = c(th);
        let e = anti_hermitian_exp(&k).unwrap();
        let want = CMat::from_row_slice(
            2,
            2,
            &[c(th.cos()), c(-th.sin()), c(th.sin()), c(th.cos())],
        );
        assert!(max_abs(&(&e - want)) < 1e-14);
        let mut bad = CMat::zeros(2, 2);
        bad[(0, 1)] = c(1.0);
        bad[(1, 0)] = c(1.0);
        assert!(matches!(anti_hermitian_exp(&bad), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn exp_inverse_and_norm() {
        let mut rng = RngStream::new(10, 0);
        for n in [2, 5, 16] {
            let k = gue_anti_hermitian(n, &mut rng);
            let e = anti_hermitian_exp(&k).unwrap();
            let einv = anti_hermitian_exp(&(-&k)).unwrap();
            assert!(max_abs(&(&e * einv - CMat::identity(n, n))) < 1e-10);
            assert!(isometry_residual(&e) < 1e-12);
            let v = DVector::from_fn(n, |_, _| rng.complex_normal());
            assert!(((&e * &v).norm() - v.norm()).abs() < 1e-12 * v.norm());
        }
    }
}
