use corrdyn::combinatorics::binomial;
use corrdyn::linalg::{c, r, CMat, C64};
use corrdyn::model::{FermionChainModel, LinearDissipator};
use corrdyn::oracle::build_liouvillian;
use corrdyn::quartic_dynamics::QuarticCore;
use corrdyn::spectrum::*;
use corrdyn::structure::{rapid_spectrum, StructureMatrices};
use proptest::prelude::*;

fn single_mode(gamma: f64) -> FermionChainModel {
    let lin = if gamma > 0.0 { vec![LinearDissipator { l: vec![r(gamma.sqrt())], g: vec![r(0.0)] }] } else { vec![] };
    FermionChainModel::new(1, CMat::from_fn(1, 1, |_, _| r(1.0)), CMat::zeros(1, 1), lin, vec![], false)
        .unwrap()
        .0
}

fn analytic(model: &FermionChainModel, parity: ParityFilter) -> SpectrumResult {
    quadratic_spectrum(&rapid_spectrum(&StructureMatrices::build(model)).unwrap(), parity, None).unwrap()
}

fn assert_same(a: &[C64], b: &[C64], tol: f64) {
    let rep = match_spectra(a, b).unwrap();
    assert!(rep.max_distance <= tol, "max distance {}", rep.max_distance);
}

#[test]
fn closed_single_mode() {
    let res = analytic(&single_mode(0.0), ParityFilter::All);
    let even: Vec<C64> = res.entries.iter().filter(|e| e.parity == Parity::Even).flat_map(|e| vec![e.eigenvalue(); e.multiplicity]).collect();
    let odd: Vec<C64> = res.entries.iter().filter(|e| e.parity == Parity::Odd).map(|e| e.eigenvalue()).collect();
    assert_same(&even, &[r(0.0), r(0.0)], 1e-14);
    assert_same(&odd, &[c(0.0, 1.0), c(0.0, -1.0)], 1e-14);
}

#[test]
fn lossy_single_mode() {
    let g = 0.3;
    let res = analytic(&single_mode(g), ParityFilter::All);
    let want = [r(0.0), r(-2.0 * g), c(-g, 1.0), c(-g, -1.0)];
    assert_same(&res.values(), &want, 1e-14);
    for e in &res.entries {
        let even = e.eigenvalue().im.abs() < 1e-12;
        assert_eq!(e.parity, if even { Parity::Even } else { Parity::Odd });
    }
    let ev = build_liouvillian(&single_mode(g)).unwrap().eigenvalues().unwrap();
    assert_same(&ev, &want, 1e-12);
}

#[test]
fn unique_zero_from_empty_occupation() {
    let res = analytic(&FermionChainModel::preset(3, 1.0, 0.2, 0.1, 0.0).unwrap(), ParityFilter::All);
    let zeros: Vec<&SpectrumEntry> = res.entries.iter().filter(|e| e.eigenvalue().norm() < 1e-12).collect();
    assert_eq!(zeros.len(), 1);
    assert_eq!(zeros[0].multiplicity, 1);
    assert_eq!(zeros[0].source, Source::Analytic(0));
    assert_eq!(zeros[0].value, [0.0, 0.0]);
    assert!(res.entries.iter().all(|e| e.value[0] <= 1e-12));
    assert_eq!(res.total_count(), 64);
    let even = analytic(&FermionChainModel::preset(3, 1.0, 0.2, 0.1, 0.0).unwrap(), ParityFilter::Even);
    assert_eq!(even.total_count(), 32);
}

#[test]
fn entries_are_ordered() {
    let res = analytic(&FermionChainModel::preset(3, 1.0, 0.2, 0.1, 0.0).unwrap(), ParityFilter::All);
    for w in res.entries.windows(2) {
        let (a, b) = (w[0].value, w[1].value);
        assert!(a[0] > b[0] || (a[0] == b[0] && a[1] <= b[1]));
    }
}

#[test]
fn truncation_keeps_slowest() {
    let rs = rapid_spectrum(&StructureMatrices::build(&FermionChainModel::preset(3, 1.0, 0.2, 0.1, 0.0).unwrap())).unwrap();
    let full = quadratic_spectrum(&rs, ParityFilter::All, None).unwrap();
    let cut = quadratic_spectrum(&rs, ParityFilter::All, Some(5)).unwrap();
    assert!(cut.truncated && !full.truncated);
    assert_eq!(cut.total_count(), 5);
    let mut re: Vec<f64> = full.values().iter().map(|z| z.re).collect();
    re.sort_by(|a, b| b.total_cmp(a));
    let slowest_cut = cut.values().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    assert!(slowest_cut >= re[4] - 1e-12);
}

#[test]
fn large_chains_need_a_budget() {
    let model = FermionChainModel::preset(13, 1.0, 0.2, 0.1, 0.0).unwrap();
    let rs = rapid_spectrum(&StructureMatrices::build(&model)).unwrap();
    assert!(matches!(quadratic_spectrum(&rs, ParityFilter::All, None), Err(corrdyn::Error::SizeGuard(_))));
    let cut = quadratic_spectrum(&rs, ParityFilter::Even, Some(10)).unwrap();
    assert!(cut.truncated);
    assert_eq!(cut.total_count(), 10);
    assert!(cut.entries.iter().all(|e| e.parity == Parity::Even));
    assert!(cut.values().iter().any(|z| z.norm() < 1e-12));
}

#[test]
fn sectors_reproduce_analytic_spectrum_without_pairs() {
    let model = FermionChainModel::preset(3, 1.0, 0.3, 0.2, 0.0).unwrap();
    let core = QuarticCore::new(&model, &StructureMatrices::build(&model)).unwrap();
    let even = quartic_spectrum(&core, &[0, 2, 4, 6]).unwrap();
    assert_same(&even.values(), &analytic(&model, ParityFilter::Even).values(), 1e-8);
    let odd = quartic_spectrum(&core, &[1, 3, 5]).unwrap();
    assert!(odd.entries.iter().all(|e| e.conjectured && e.parity == Parity::Odd));
    assert!(even.entries.iter().all(|e| !e.conjectured));
    assert_same(&odd.values(), &analytic(&model, ParityFilter::Odd).values(), 1e-8);
}

#[test]
fn sector_dimensions_fill_the_liouville_space() {
    let model = FermionChainModel::preset(3, 1.0, 0.5, 0.5, 0.5).unwrap();
    let core = QuarticCore::new(&model, &StructureMatrices::build(&model)).unwrap();
    let all: Vec<usize> = (0..=6).collect();
    let res = quartic_spectrum(&core, &all).unwrap();
    assert_eq!(res.total_count(), 64);
    assert_eq!((0..=6).map(|n| binomial(6, n)).sum::<usize>(), 64);
    assert!(res.values().iter().all(|z| z.re <= 1e-9));
}

#[test]
fn pair_dissipation_spectrum_matches_oracle() {
    let model = FermionChainModel::preset(3, 1.0, 0.4, 0.2, 0.3).unwrap();
    let core = QuarticCore::new(&model, &StructureMatrices::build(&model)).unwrap();
    let (even, odd) = build_liouvillian(&model).unwrap().parity_eigenvalues().unwrap();
    let rep = match_spectra(&quartic_spectrum(&core, &[0, 2, 4, 6]).unwrap().values(), &even).unwrap();
    assert!(rep.max_distance < 1e-8 && rep.hausdorff <= rep.max_distance + 1e-15);
    assert_same(&quartic_spectrum(&core, &[1, 3, 5]).unwrap().values(), &odd, 1e-8);
}

#[test]
fn match_spectra_requires_equal_sizes() {
    assert!(match_spectra(&[r(0.0)], &[]).is_err());
    let rep = match_spectra(&[], &[]).unwrap();
    assert_eq!(rep.count, 0);
}

#[test]
fn assignment_beats_sorting() {
    // Sorting by real part would pair these crosswise.
    let a = [c(-1.0, 1.0), c(-1.0 + 1e-12, -1.0)];
    let b = [c(-1.0 + 2e-12, -1.0), c(-1.0 - 1e-12, 1.0)];
    let rep = match_spectra(&a, &b).unwrap();
    assert!(rep.max_distance < 1e-11);
    assert_eq!(rep.assignment, vec![1, 0]);
}

proptest! {
    #[test]
    fn matching_is_permutation_invariant(
        pts in proptest::collection::vec((-3.0f64..0.0, -3.0f64..3.0), 1..12),
        shift in 0usize..12,
    ) {
        let a: Vec<C64> = pts.iter().map(|&(x, y)| c(x, y)).collect();
        let mut b = a.clone();
        b.rotate_left(shift % a.len());
        let rep = match_spectra(&a, &b).unwrap();
        prop_assert!(rep.max_distance < 1e-12);
        prop_assert!(hausdorff(&a, &b) < 1e-12);
    }

    #[test]
    fn hausdorff_bounded_by_assignment(
        pts in proptest::collection::vec((-3.0f64..0.0, -3.0f64..3.0, -0.1f64..0.1), 1..10),
    ) {
        let a: Vec<C64> = pts.iter().map(|&(x, y, _)| c(x, y)).collect();
        let b: Vec<C64> = pts.iter().map(|&(x, y, d)| c(x + d, y - d)).collect();
        let rep = match_spectra(&a, &b).unwrap();
        prop_assert!(rep.hausdorff <= rep.max_distance + 1e-12);
        prop_assert!(rep.mean_distance <= rep.max_distance + 1e-12);
    }
}
