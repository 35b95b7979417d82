use corrdyn::linalg::{adjoint, c, eigenvalues, max_abs, r, scale, transpose, zeros, CMat, C64, I};
use corrdyn::model::{FermionChainModel, LinearDissipator};
use corrdyn::spectrum::match_spectra;
use corrdyn::structure::{rapid_spectrum, StructureMatrices};
use proptest::prelude::*;

fn single_mode(gamma: f64) -> FermionChainModel {
    let h = CMat::from_fn(1, 1, |_, _| r(1.0));
    let linear = if gamma > 0.0 {
        vec![LinearDissipator { l: vec![r(gamma.sqrt())], g: vec![r(0.0)] }]
    } else {
        vec![]
    };
    FermionChainModel::new(1, h, zeros(1, 1), linear, vec![], false).unwrap().0
}

fn mat(rows: &[[C64; 2]; 2]) -> CMat {
    CMat::from_fn(2, 2, |i, j| rows[i][j])
}

#[test]
fn closed_single_mode_blocks() {
    let sm = StructureMatrices::build(&single_mode(0.0));
    let fa = mat(&[[r(0.0), r(-1.0)], [r(1.0), r(0.0)]]);
    assert_eq!(max_abs(&(&sm.f_a - fa)), 0.0);
    assert_eq!(max_abs(&sm.f_b), 0.0);
    let x = mat(&[[c(0.0, -0.5), r(0.0)], [r(0.0), c(0.0, 0.5)]]);
    assert_eq!(max_abs(&(&sm.x - x)), 0.0);
    assert_eq!(sm.f0, 0.0);
    assert_eq!(max_abs(&(&sm.f1 - &sm.f_a)), 0.0);
}

#[test]
fn lossy_single_mode_x_and_alphas() {
    let g = 0.4;
    let sm = StructureMatrices::build(&single_mode(g));
    let x = mat(&[[c(g / 2.0, -0.5), r(0.0)], [r(0.0), c(g / 2.0, 0.5)]]);
    assert!(max_abs(&(&sm.x - x)) < 1e-15);
    let rs = rapid_spectrum(&sm).unwrap();
    assert!((rs.alphas[0] - c(0.2, -0.5)).norm() < 1e-14);
    assert!((rs.alphas[1] - c(0.2, 0.5)).norm() < 1e-14);
    // F₁ and F_B for a damped mode with h = 1.
    let f1 = mat(&[[r(-g), r(-1.0)], [r(1.0), r(-g)]]);
    assert!(max_abs(&(&sm.f1 - f1)) < 1e-15);
}

#[test]
fn preset_trace_identity() {
    let m = FermionChainModel::preset(4, 1.0, 0.1, 0.2, 0.0).unwrap();
    let sm = StructureMatrices::build(&m);
    let rs = rapid_spectrum(&sm).unwrap();
    let sum: C64 = rs.alphas.iter().sum();
    assert!((sum - r(0.3)).norm() < 1e-12);
    assert!((sm.f0 + 0.3).abs() < 1e-15);
}

/// Majorana-form generators: F₁ = −2iH_m − 2Re M and F_B = 2iM*, with
/// M_kj = Σ_μ c*_μk c_μj built from the ω-coefficients of each L_μ.
#[test]
fn majorana_form_identities() {
    let m = random_model(3, 11);
    let sm = StructureMatrices::build(&m);
    let n = 6;
    let mut mm = zeros(n, n);
    for cv in m.linear_majorana() {
        for k in 0..n {
            for j in 0..n {
                mm[(k, j)] += cv[k].conj() * cv[j];
            }
        }
    }
    let hm = m.hamiltonian_majorana();
    let f1 = scale(&hm, c(0.0, -2.0)) - scale(&corrdyn::linalg::re_part(&mm), r(2.0));
    let fb = scale(&corrdyn::linalg::conj(&mm), c(0.0, 2.0));
    assert!(max_abs(&(&sm.f1 - f1)) < 1e-12);
    assert!(max_abs(&(&sm.f_b - fb)) < 1e-12);
}

fn random_model(l: usize, seed: u64) -> FermionChainModel {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut z = || c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let h0 = CMat::from_fn(l, l, |_, _| z());
    let h = scale(&(&h0 + adjoint(&h0)), r(0.5));
    let delta = CMat::from_fn(l, l, |_, _| z());
    let linear = (0..2)
        .map(|_| LinearDissipator { l: (0..l).map(|_| z()).collect(), g: (0..l).map(|_| z()).collect() })
        .collect();
    FermionChainModel::new(l, h, delta, linear, vec![], false).unwrap().0
}

fn check_invariants(m: &FermionChainModel) {
    let sm = StructureMatrices::build(m);
    let tol = 1e-10 * sm.scale_norm();
    for fp in [&sm.f_plus, &sm.f_minus] {
        assert!(max_abs(&(fp + transpose(fp))) <= tol);
    }
    assert!(max_abs(&(&sm.f_a + transpose(&sm.f_a))) <= tol);
    assert!(sm.f1_imag_residual() <= tol);
    assert!(sm.similarity_residual() <= tol);
    assert!(sm.fb_residual() <= tol);
    // −iF_B ⪰ 0
    let mib = scale(&sm.f_b, -I);
    let herm = scale(&(&mib + adjoint(&mib)), r(0.5));
    assert!(max_abs(&(&mib - &herm)) <= tol);
    let ev = herm.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    assert!(ev.iter().all(|&x| x >= -tol));
    let rs = rapid_spectrum(&sm).unwrap();
    assert!(rs.alphas.iter().all(|a| a.re >= -tol));
    let sum: C64 = rs.alphas.iter().sum();
    assert!((sum + r(sm.f0)).norm() <= tol);
    // eig(F_p) = {±α}, independent of p.
    let mut pm: Vec<C64> = rs.alphas.iter().flat_map(|&a| [a, -a]).collect();
    pm.sort_by(|a, b| a.re.total_cmp(&b.re));
    for fp in [&sm.f_plus, &sm.f_minus] {
        let e = eigenvalues(fp).unwrap();
        assert!(match_spectra(&e, &pm).unwrap().max_distance <= 1e-8);
    }
}

#[test]
fn preset_invariants() {
    check_invariants(&FermionChainModel::preset(4, 1.0, 0.1, 0.2, 0.0).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_quadratic_models_satisfy_invariants(seed in any::<u64>(), l in 1usize..4) {
        check_invariants(&random_model(l, seed));
    }
}
