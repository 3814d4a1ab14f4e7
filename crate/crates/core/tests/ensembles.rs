//! Statistical checks of the ensembles at desk scale. Each runs in seconds.

use mpsm::linalg::{haar_unitary, RngStream};
use mpsm::measure::fs_expectation_reweighted;
use mpsm::mps::{self, bond_profile, BondProfile, Mps, RightEnvironments};
use mpsm::sampler::{chain_mean, run_chain, run_fs_chains, ChainState, SamplerConfig};
use mpsm::spectra::ks_two_sample;

fn entropy(envs: &RightEnvironments, cut: usize) -> f64 {
    mps::entropy_bits(&envs.spectrum(cut).unwrap())
}

/// `<Z>` on `site` from a left-canonical chain: `rho_nm = Tr(A_n Gamma A_m^dag)`.
fn local_z(m: &Mps, envs: &RightEnvironments, site: usize) -> f64 {
    let s = &m.sites[site - 1];
    let g = if site == m.profile.n_sites() { mpsm::CMat::identity(1, 1) } else { envs.gamma(site).clone() };
    let pop = |n: usize| {
        let a = s.block(n);
        (&a * &g * a.adjoint()).trace().re
    };
    pop(0) - pop(1)
}

#[test]
fn rmps_local_statistics_are_rotation_invariant() {
    let p = bond_profile(5, 2, 4).unwrap();
    let site = 3;
    let v = haar_unitary(2, &mut RngStream::new(99, 0)).unwrap();
    let mut ra = RngStream::new(1, 0);
    let mut rb = RngStream::new(1, 1);
    let (mut za, mut zb, mut sa, mut sb) = (vec![], vec![], vec![], vec![]);
    for _ in 0..3000 {
        let a = mps::sample_rmps(&p, &mut ra).unwrap();
        let ea = mps::right_environments(&a);
        za.push(local_z(&a, &ea, site));
        sa.push(entropy(&ea, 2));

        let mut b = mps::sample_rmps(&p, &mut rb).unwrap();
        let s = &b.sites[site - 1];
        let mut mat = mpsm::CMat::zeros(s.matrix.nrows(), s.matrix.ncols());
        for n in 0..2 {
            for k in 0..2 {
                let mut rows = mat.rows_mut(n * s.left, s.left);
                rows += s.block(k) * v[(n, k)];
            }
        }
        b.sites[site - 1].matrix = mat;
        let eb = mps::right_environments(&b);
        zb.push(local_z(&b, &eb, site));
        sb.push(entropy(&eb, 2));
    }
    let z = ks_two_sample(&za, &zb).unwrap();
    let s = ks_two_sample(&sa, &sb).unwrap();
    assert!(z.p_value > 0.01, "{z:?}");
    assert!(s.p_value > 0.01, "{s:?}");
    // and a biased observable is detected
    let shifted: Vec<f64> = zb.iter().map(|x| x * 0.8).collect();
    assert!(ks_two_sample(&za, &shifted).unwrap().p_value < 0.01);
}

fn config(seed: u64, chains: usize, samples: usize) -> SamplerConfig {
    let mut c = SamplerConfig::new(6, 2, 4, samples, seed);
    c.chains = chains;
    c.burn_in_sweeps = 300;
    c.thin_sweeps = 2;
    c
}

/// The highest-weight RMPS draw out of `k`.
fn heavy_start(p: &BondProfile, rng: &mut RngStream, k: usize) -> Vec<mpsm::CMat> {
    (0..k)
        .map(|_| {
            let ch = mps::sample_rmps_unitaries(p, rng).unwrap();
            let w = mpsm::fs_log_weight(&mps::right_environments(&ch.to_mps()), p).unwrap().0;
            (w, ch.unitaries)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
        .1
}

#[test]
fn chains_forget_their_start() {
    let c = config(21, 4, 2000);
    let p = c.profile().unwrap();
    let mid = p.mid_cut();
    let obs = |s: &ChainState, _| mps::entropy_bits(&s.spectra()[mid - 1]);

    let plain: Vec<Vec<f64>> = run_fs_chains(&c, obs).unwrap().into_iter().map(|o| o.observations).collect();
    let heavy: Vec<Vec<f64>> = (0..c.chains)
        .map(|k| {
            let mut rng = RngStream::new(c.seed, 100 + k as u64);
            let start = heavy_start(&p, &mut rng, 64);
            let state = mpsm::ChainState::from_unitaries(p.clone(), start, rng, c.sigma0).unwrap();
            run_chain(&c, k, state, &obs).observations
        })
        .collect();
    let (ma, sa, _) = chain_mean(&plain);
    let (mb, sb, _) = chain_mean(&heavy);
    let z = (ma - mb).abs() / (sa * sa + sb * sb).sqrt();
    assert!(z < 3.0, "{ma} +- {sa} vs {mb} +- {sb}");
}

#[test]
fn fs_profile_is_mirror_symmetric() {
    let mut c = config(22, 4, 2000);
    c.n_sites = 7;
    let out = run_fs_chains(&c, |s, _| s.spectra().iter().map(|sp| mps::entropy_bits(sp)).collect::<Vec<f64>>()).unwrap();
    let n = c.n_sites;
    for cut in 1..n / 2 + 1 {
        let diffs: Vec<Vec<f64>> = out
            .iter()
            .map(|o| o.observations.iter().map(|e| e[cut - 1] - e[n - cut - 1]).collect())
            .collect();
        let (m, se, _) = chain_mean(&diffs);
        assert!(m.abs() < 3.0 * se.max(1e-12), "cut {cut}: {m} +- {se}");
    }
}

#[test]
fn rmps_profile_is_not_mirror_symmetric() {
    // the sequential ensemble is biased toward low entanglement on the right
    let p = bond_profile(7, 2, 4).unwrap();
    let mut rng = RngStream::new(23, 0);
    let diffs: Vec<f64> = (0..2000)
        .map(|_| {
            let e = mps::right_environments(&mps::sample_rmps(&p, &mut rng).unwrap());
            entropy(&e, 2) - entropy(&e, 5)
        })
        .collect();
    let (m, se, _) = chain_mean(&[diffs]);
    assert!(m.abs() > 3.0 * se, "{m} +- {se}");
}

#[test]
fn sampler_agrees_with_reweighting() {
    let mut c = config(24, 4, 4000);
    c.n_sites = 5;
    let p = c.profile().unwrap();
    let mid = p.mid_cut();
    let mh: Vec<Vec<f64>> = run_fs_chains(&c, |s, _| mps::entropy_bits(&s.spectra()[mid - 1]))
        .unwrap()
        .into_iter()
        .map(|o| o.observations)
        .collect();
    let (m, se, ess) = chain_mean(&mh);
    assert!(ess > 500.0, "{ess}");
    let is = fs_expectation_reweighted(|_, e| entropy(e, mid), &p, 20_000, &RngStream::new(25, 0)).unwrap();
    let z = (m - is.mean).abs() / (se * se + is.standard_error * is.standard_error).sqrt();
    assert!(z < 3.0, "MH {m} +- {se}, IS {} +- {}", is.mean, is.standard_error);
}
