//! Gauge-fixed exponential chart on a site unitary.
//!
//! A site unitary of size `n` whose first `D` columns define the isometry is
//! written as `U = U0 exp([[0, -x^dag], [x, 0]])` with `x` a complex
//! `(n - D) x D` matrix. Only the first `D` columns matter, and on the
//! principal branch (singular values of `x` below pi/2) the chart is
//! injective up to a unitary gauge on the bond.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// Chart coordinates `x`, shape `w x D`.
#[derive(Clone, Debug)]
pub struct Coordinates {
    pub x: CMat,
}

impl Coordinates {
    pub fn new(x: CMat) -> Self {
        Self { x }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { x: CMat::zeros(rows, cols) }
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x.ncols()
    }

    /// Ascending eigenvalues of `x_hat = sqrt(x^dag x)`, i.e. the singular
    /// values of `x` padded with zeros to length `D`.
    pub fn x_hat_eigenvalues(&self) -> Vec<f64> {
        if self.cols() == 0 {
            return Vec::new();
        }
        let w = linalg::symmetrize(&(self.x.adjoint() * &self.x));
        linalg::hermitian_eigenvalues(&w)
            .expect("x^dag x is Hermitian by construction")
            .into_iter()
            .map(|l| l.max(0.0).sqrt())
            .collect()
    }

    /// `x_hat` itself.
    pub fn x_hat(&self) -> CMat {
        let w = linalg::symmetrize(&(self.x.adjoint() * &self.x));
        let (vals, vecs) = linalg::hermitian_eigensystem(&w).expect("Hermitian by construction");
        linalg::spectral_map(&vals, &vecs, |l| C64::new(l.max(0.0).sqrt(), 0.0))
    }
}

fn generator(x: &CMat) -> CMat {
    let (w, d) = x.shape();
    let n = w + d;
    let mut k = CMat::zeros(n, n);
    k.view_mut((d, 0), (w, d)).copy_from(x);
    k.view_mut((0, d), (d, w)).copy_from(&(-x.adjoint()));
    k
}

/// `U0 exp([[0, -x^dag], [x, 0]])`.
pub fn exp_param(x: &Coordinates, u0: &CMat) -> Result<CMat> {
    let n = x.rows() + x.cols();
    if u0.nrows() != n || u0.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "reference unitary is {}x{}, coordinates need {n}x{n}",
            u0.nrows(),
            u0.ncols()
        )));
    }
    Ok(u0 * linalg::anti_hermitian_exp(&generator(&x.x))?)
}

/// `arcsin(sqrt(w)) / sqrt(w)`, continued to 1 at `w = 0`.
fn arcsin_sqrt_ratio(w: f64) -> f64 {
    let w = w.max(0.0);
    if w < 1e-12 {
        1.0 + w / 6.0
    } else {
        let s = w.sqrt();
        s.asin() / s
    }
}

/// Coordinates of an `n x n` unitary whose first `cols` columns define the
/// isometry. The isometry splits into `A` (top `cols` rows) and `C` (the
/// rest); with `A = U_A sqrt(I - W)` and `C = U_C sqrt(W)` the result is
/// `x = U_C arcsin(sqrt W) U_A^dag`.
pub fn chart_coordinates(u: &CMat, cols: usize) -> Result<Coordinates> {
    let n = u.nrows();
    if u.ncols() != n || cols == 0 || cols > n {
        return Err(Error::InvalidArgument(format!(
            "chart needs a square unitary and 1 <= D <= n, got {}x{} with D={cols}",
            u.nrows(),
            u.ncols()
        )));
    }
    let a = u.view((0, 0), (cols, cols)).into_owned();
    let c = u.view((cols, 0), (n - cols, cols)).into_owned();
    let w = linalg::symmetrize(&(c.adjoint() * &c));
    let (wv, wvec) = linalg::hermitian_eigensystem(&w)?;
    let top = wv.last().copied().unwrap_or(0.0);
    if top >= 1.0 - 1e-12 {
        return Err(Error::OutOfBranch(top.min(1.0).sqrt().asin()));
    }
    let (u_a, _) = linalg::polar_decompose(&a).map_err(|e| match e {
        Error::DegeneratePolar(l) => {
            Error::DegenerateGauge(format!("A block is singular (smallest eigenvalue {l:e})"))
        }
        other => other,
    })?;
    // U_C arcsin(sqrt W) = C g(W) with g(w) = arcsin(sqrt w)/sqrt w, which
    // stays well defined when C is rank deficient.
    let g = linalg::spectral_map(&wv, &wvec, |l| C64::new(arcsin_sqrt_ratio(l), 0.0));
    Ok(Coordinates { x: c * g * u_a.adjoint() })
}

/// Inverse chart for a uniform site: `u` is `dD x dD`.
pub fn extract_coordinates(u: &CMat, d: usize, bond: usize) -> Result<Coordinates> {
    if u.nrows() != d * bond {
        return Err(Error::InvalidArgument(format!(
            "expected a {0}x{0} unitary for d={d}, D={bond}",
            d * bond
        )));
    }
    chart_coordinates(u, bond)
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        let t2 = t * t;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        t.sin() / t
    }
}

/// `log J` from the singular values `s` of a `rows x cols` coordinate matrix:
///
/// `J = prod (sin^2 s / s^2)^(rows - cols) * prod sin(2s)/(2s)
///      * prod_{k<l} ((sin^2 s_k - sin^2 s_l) / (s_k^2 - s_l^2))^2`.
///
/// The pair factor is evaluated as `sinc(s_k + s_l) sinc(s_k - s_l)`, which
/// is the same expression with the coincident-eigenvalue limit built in.
pub fn log_jacobian_from_singular_values(s: &[f64], rows: usize, cols: usize) -> Result<f64> {
    if rows < cols {
        return Err(Error::InvalidArgument(format!(
            "jacobian needs rows >= cols, got {rows}x{cols}"
        )));
    }
    if let Some(&bad) = s.iter().find(|&&v| !(v < FRAC_PI_2)) {
        return Err(Error::OutOfBranch(bad));
    }
    let excess = (rows - cols) as f64;
    let mut acc = 0.0;
    for &sk in s {
        acc += excess * 2.0 * sinc(sk).ln();
        acc += sinc(2.0 * sk).ln();
    }
    for k in 0..s.len() {
        for l in (k + 1)..s.len() {
            let f = sinc(s[k] + s[l]) * sinc(s[k] - s[l]);
            acc += 2.0 * f.ln();
        }
    }
    Ok(acc)
}

/// Density of the Haar measure relative to Lebesgue measure on the
/// coordinates of a uniform `(d, D)` site.
pub fn jacobian(x: &Coordinates, d: usize, bond: usize) -> Result<f64> {
    if x.cols() != bond || x.rows() != (d - 1) * bond {
        return Err(Error::InvalidArgument(format!(
            "coordinates are {}x{}, expected {}x{bond}",
            x.rows(),
            x.cols(),
            (d - 1) * bond
        )));
    }
    Ok(log_jacobian_from_singular_values(&x.x_hat_eigenvalues(), x.rows(), x.cols())?.exp())
}

/// Small-coordinate form `exp(-(D d / 3) Tr x_hat^2)`.
pub fn jacobian_first_order(x: &Coordinates) -> f64 {
    let dd = (x.rows() + x.cols()) as f64;
    let tr: f64 = x.x.iter().map(|z| z.norm_sqr()).sum();
    (-(dd / 3.0) * tr).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_unitary, isometry_residual, max_abs, RngStream};

    fn random_coords(rows: usize, cols: usize, radius: f64, rng: &mut RngStream) -> Coordinates {
        let x = CMat::from_fn(rows, cols, |_, _| rng.complex_normal());
        let c = Coordinates::new(x);
        let top = *c.x_hat_eigenvalues().last().unwrap();
        let target = radius * rng.uniform().max(0.05);
        Coordinates::new(c.x * C64::new(target / top, 0.0))
    }

    #[test]
    fn exp_param_zero_is_reference() {
        let mut rng = RngStream::new(1, 0);
        let u0 = haar_unitary(6, &mut rng).unwrap();
        let u = exp_param(&Coordinates::zeros(4, 2), &u0).unwrap();
        assert!(max_abs(&(&u - &u0)) < 1e-14);
        assert!(exp_param(&Coordinates::zeros(3, 2), &u0).is_err());
    }

    #[test]
    fn exp_param_qubit_rotation() {
        let th: f64 = 0.4;
        let x = Coordinates::new(CMat::from_element(1, 1, C64::new(th, 0.0)));
        let u = exp_param(&x, &CMat::identity(2, 2)).unwrap();
        let want = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(th.cos(), 0.0),
                C64::new(-th.sin(), 0.0),
                C64::new(th.sin(), 0.0),
                C64::new(th.cos(), 0.0),
            ],
        );
        assert!(max_abs(&(&u - want)) < 1e-14);
    }

    #[test]
    fn exp_param_unitary() {
        let mut rng = RngStream::new(2, 0);
        for (d, bond) in [(2, 1), (2, 3), (3, 2), (4, 4)] {
            let x = Coordinates::new(CMat::from_fn((d - 1) * bond, bond, |_, _| rng.complex_normal()));
            let u = exp_param(&x, &CMat::identity(d * bond, d * bond)).unwrap();
            assert!(isometry_residual(&u) < 1e-12);
        }
    }

    #[test]
    fn extract_examples() {
        let x = extract_coordinates(&CMat::identity(4, 4), 2, 2).unwrap();
        assert!(max_abs(&x.x) < 1e-15);
        let th: f64 = 1.1;
        let rot = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(th.cos(), 0.0),
                C64::new(-th.sin(), 0.0),
                C64::new(th.sin(), 0.0),
                C64::new(th.cos(), 0.0),
            ],
        );
        let x = extract_coordinates(&rot, 2, 1).unwrap();
        assert!((x.x[(0, 0)] - C64::new(th, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn extract_rejects_out_of_branch() {
        // first column entirely in the C block: A = 0
        let mut u = CMat::zeros(2, 2);
        u[(1, 0)] = C64::new(1.0, 0.0);
        u[(0, 1)] = C64::new(-1.0, 0.0);
        assert!(matches!(extract_coordinates(&u, 2, 1), Err(Error::OutOfBranch(_))));
    }

    #[test]
    fn roundtrip() {
        let mut rng = RngStream::new(3, 0);
        for (d, bond) in [(2, 1), (2, 2), (3, 2), (2, 4)] {
            for _ in 0..20 {
                let x = random_coords((d - 1) * bond, bond, FRAC_PI_2 - 0.1, &mut rng);
                let u = exp_param(&x, &CMat::identity(d * bond, d * bond)).unwrap();
                let back = extract_coordinates(&u, d, bond).unwrap();
                assert!(max_abs(&(&back.x - &x.x)) < 1e-8);
            }
        }
    }

    #[test]
    fn extract_of_haar_reproduces_column_space() {
        let mut rng = RngStream::new(4, 0);
        let (d, bond) = (3, 2);
        let u = haar_unitary(d * bond, &mut rng).unwrap();
        let x = extract_coordinates(&u, d, bond).unwrap();
        let v = exp_param(&x, &CMat::identity(d * bond, d * bond)).unwrap();
        // same isometry up to a bond gauge: the projectors agree
        let p = u.columns(0, bond) * u.columns(0, bond).adjoint();
        let q = v.columns(0, bond) * v.columns(0, bond).adjoint();
        assert!(max_abs(&(p - q)) < 1e-10);
        // and the gauge-fixed representative has a Hermitian PSD A block
        let a = v.view((0, 0), (bond, bond)).into_owned();
        assert!(linalg::hermitian_residual(&a) < 1e-10);
    }

    #[test]
    fn jacobian_at_origin_is_one() {
        for (d, bond) in [(2, 1), (3, 2), (2, 4)] {
            let j = jacobian(&Coordinates::zeros((d - 1) * bond, bond), d, bond).unwrap();
            assert!((j - 1.0).abs() < 1e-15);
            assert_eq!(jacobian_first_order(&Coordinates::zeros((d - 1) * bond, bond)), 1.0);
        }
    }

    #[test]
    fn jacobian_qubit_closed_form() {
        for s in [0.1_f64, 0.5, 1.2, 1.5] {
            let x = Coordinates::new(CMat::from_element(1, 1, C64::new(0.0, s)));
            let j = jacobian(&x, 2, 1).unwrap();
            assert!((j - (2.0 * s).sin() / (2.0 * s)).abs() < 1e-12);
        }
        let x = Coordinates::new(CMat::from_element(1, 1, C64::new(0.3, 0.0)));
        let fo = jacobian_first_order(&x);
        assert!((fo - (-(2.0 / 3.0) * 0.09_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn jacobian_out_of_branch() {
        let x = Coordinates::new(CMat::from_element(1, 1, C64::new(1.6, 0.0)));
        assert!(matches!(jacobian(&x, 2, 1), Err(Error::OutOfBranch(_))));
    }

    #[test]
    fn jacobian_depends_only_on_singular_values() {
        let mut rng = RngStream::new(5, 0);
        let (d, bond) = (3, 3);
        let x = random_coords((d - 1) * bond, bond, 1.2, &mut rng);
        let v1 = haar_unitary(bond, &mut rng).unwrap();
        let v2 = haar_unitary((d - 1) * bond, &mut rng).unwrap();
        let y = Coordinates::new(&v2 * &x.x * &v1);
        let (jx, jy) = (jacobian(&x, d, bond).unwrap(), jacobian(&y, d, bond).unwrap());
        assert!((jx - jy).abs() < 1e-10 * jx.abs().max(1.0));
    }

    #[test]
    fn jacobian_coincident_limit() {
        // pair factor -> (sin 2s / 2s)^2 as s_l -> s_k
        let s: f64 = 0.7;
        let pair = |a: f64, b: f64| {
            let full = log_jacobian_from_singular_values(&[a, b], 2, 2).unwrap();
            let singles = log_jacobian_from_singular_values(&[a], 1, 1).unwrap()
                + log_jacobian_from_singular_values(&[b], 1, 1).unwrap();
            (full - singles).exp()
        };
        let want = ((2.0 * s).sin() / (2.0 * s)).powi(2);
        for eps in [1e-3, 1e-5, 1e-7, 0.0] {
            assert!((pair(s + eps, s) - want).abs() < 1e-6 + 2.0 * eps, "eps {eps}");
        }
        // and the direct quotient agrees away from the limit
        let (a, b) = (0.9_f64, 0.4_f64);
        let direct = ((a.sin().powi(2) - b.sin().powi(2)) / (a * a - b * b)).powi(2);
        assert!((pair(a, b) - direct).abs() < 1e-13);
    }

    #[test]
    fn first_order_agreement_scales_quartically() {
        // error of the first-order form should shrink ~16x when x halves
        let mut rng = RngStream::new(6, 0);
        let (d, bond) = (2, 2);
        let base = random_coords((d - 1) * bond, bond, 1.0, &mut rng);
        let top = *base.x_hat_eigenvalues().last().unwrap();
        let mut errs = Vec::new();
        for r in [0.2, 0.1, 0.05] {
            let x = Coordinates::new(&base.x * C64::new(r / top, 0.0));
            let j = jacobian(&x, d, bond).unwrap();
            errs.push((j - jacobian_first_order(&x)).abs());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}, errs {errs:?}");
        }
    }

    /// Haar pushforward onto the two singular values of a (d, D) = (2, 2)
    /// chart, compared with the two candidate Vandermonde denominators.
    #[test]
    fn vandermonde_denominator_is_squared_eigenvalues() {
        let mut rng = RngStream::new(7, 0);
        let draws = 20_000;
        let mut stat = Vec::with_capacity(draws);
        for _ in 0..draws {
            let u = haar_unitary(4, &mut rng).unwrap();
            let s = extract_coordinates(&u, 2, 2).unwrap().x_hat_eigenvalues();
            stat.push(s[0] * s[0] + s[1] * s[1]);
        }
        let mean = stat.iter().sum::<f64>() / draws as f64;
        let var = stat.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();

        // Lebesgue measure on 2x2 complex x in singular values:
        // s1 s2 (s1^2 - s2^2)^2 ds1 ds2.
        let expect = |squared_denominator: bool| {
            let m = 600;
            let h = FRAC_PI_2 / m as f64;
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..m {
                let a = (i as f64 + 0.5) * h;
                for k in 0..m {
                    let b = (k as f64 + 0.5) * h;
                    let lebesgue = a * b * (a * a - b * b).powi(2);
                    let mut j = log_jacobian_from_singular_values(&[a, b], 2, 2).unwrap().exp();
                    if !squared_denominator {
                        j *= (a + b).powi(2);
                    }
                    let p = lebesgue * j;
                    num += p * (a * a + b * b);
                    den += p;
                }
            }
            num / den
        };
        let eq_sq = expect(true);
        let eq_lin = expect(false);
        assert!((mean - eq_sq).abs() < 3.0 * se, "mc {mean} vs {eq_sq} (se {se})");
        assert!((mean - eq_lin).abs() > 5.0 * se, "linear denominator not excluded");
    }
}
