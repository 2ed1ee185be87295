use super::*;
use crate::anisotropy::{Anisotropy, HarmonicTerm};
use crate::discretization::SphereGrid;
use proptest::prelude::*;

fn op(grid: SphereGrid<f64>, a: Anisotropy<f64>) -> LinearizedOperator<f64> {
    build_operator(&WulffChart::new(grid, a).unwrap()).unwrap()
}

fn harmonic() -> Anisotropy<f64> {
    Anisotropy::harmonic(2, 0.1, &[HarmonicTerm::new(2, 1, 1.0), HarmonicTerm::new(3, -2, 0.7)]).unwrap()
}

#[test]
fn round_operator_is_the_spherical_laplacian() {
    let l = op(SphereGrid::full(32, 64).unwrap(), Anisotropy::round(2));
    let x3 = l.chart.grid.sample(|x| x[2]);
    let lx = l.apply(&x3);
    for i in 0..l.len() {
        assert!((lx[i] + 2.0 * x3[i]).abs() < 1e-9);
    }
    assert!(l.kernel_residual() < 1e-10);
}

#[test]
fn operator_invariants_on_anisotropic_charts() {
    for l in [
        op(SphereGrid::full(24, 48).unwrap(), harmonic()),
        op(SphereGrid::full(24, 48).unwrap(), Anisotropy::ellipsoid(&[2.0, 1.0, 1.0]).unwrap()),
        op(SphereGrid::axisymmetric(3, 64).unwrap(), Anisotropy::ellipsoid(&[1.5, 1.0, 1.0, 1.0]).unwrap()),
    ] {
        assert!(l.weighted_asymmetry() < 1e-12);
        assert!(l.kernel_residual() < 1e-8, "{}", l.kernel_residual());
    }
}

#[test]
fn dense_spectrum_has_one_dimensional_kernel() {
    let l = op(SphereGrid::full(16, 32).unwrap(), harmonic());
    let ev = l.dense_eigenvalues().unwrap();
    // −L is positive semidefinite with the constants as its only kernel
    assert!(ev[0].abs() < 1e-8 * ev[1], "{:?}", &ev[..3]);
    assert!(ev[1] > 0.5, "{:?}", &ev[..3]);
    assert!(ev.iter().all(|&v| v > -1e-8));
}

#[test]
fn iterative_solver_matches_dense_spectrum() {
    let l = op(SphereGrid::full(16, 32).unwrap(), harmonic());
    let dense = l.dense_eigenvalues().unwrap();
    let it = l.iterative_lowest(4).unwrap();
    for k in 1..4 {
        assert!((it[k] - dense[k]).abs() < 1e-8 * dense[k], "{k}: {} vs {}", it[k], dense[k]);
    }
}

#[test]
fn round_lambda1_full_grid() {
    let l = op(SphereGrid::full(32, 64).unwrap(), Anisotropy::round(2));
    let ev = l.lowest_eigenvalues(4).unwrap();
    // ℓ = 1 is triple
    for v in &ev[1..4] {
        assert!((v - 2.0).abs() < 0.02, "{ev:?}");
    }
    assert!((lambda1(&l).unwrap() - 2.0).abs() < 0.02);
}

#[test]
fn round_axisymmetric_spectra() {
    // ℓ(ℓ + n − 1) on S^n, multiplicities from the orbit sectors
    let l2 = op(SphereGrid::axisymmetric(2, 128).unwrap(), Anisotropy::round(2));
    let ev = l2.lowest_eigenvalues(9).unwrap();
    let want = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0];
    for (g, w) in ev.iter().zip(want) {
        assert!((g - w).abs() < 1e-2 * w.max(1.0), "{ev:?}");
    }
    let l3 = op(SphereGrid::axisymmetric(3, 128).unwrap(), Anisotropy::round(3));
    let ev = l3.lowest_eigenvalues(5).unwrap();
    for (g, w) in ev.iter().zip([0.0, 3.0, 3.0, 3.0, 3.0]) {
        assert!((g - w).abs() < 1e-2 * w.max(1.0), "{ev:?}");
    }
    assert!((lambda1(&l3).unwrap() - 3.0).abs() < 0.03);
    let s0 = l3.sector_eigenvalues(0).unwrap();
    assert!((s0[2] - 8.0).abs() < 0.08, "{:?}", &s0[..3]);
}

#[test]
fn orbit_multiplicities() {
    assert_eq!((0..4).map(|j| orbit_multiplicity(1, j)).collect::<Vec<_>>(), [1, 2, 2, 2]);
    assert_eq!((0..4).map(|j| orbit_multiplicity(2, j)).collect::<Vec<_>>(), [1, 3, 5, 7]);
    assert_eq!((0..3).map(|j| orbit_multiplicity(3, j)).collect::<Vec<_>>(), [1, 4, 9]);
}

#[test]
fn ellipsoid_lambda1_converges_at_second_order() {
    // F(x) = |A x| makes Σ_F a linear image of the sphere and L conjugate to
    // the round Laplacian, so the refinement limit must be ℓ(ℓ + 1)
    let a = Anisotropy::ellipsoid(&[2.0, 1.0, 1.0]).unwrap();
    let lam: Vec<f64> =
        [16, 32, 64].iter().map(|&nt| lambda1(&op(SphereGrid::full(nt, 2 * nt).unwrap(), a.clone())).unwrap()).collect();
    let order = ((lam[0] - lam[1]) / (lam[1] - lam[2])).abs().log2();
    assert!(order > 1.9, "{lam:?} order {order}");
    let limit = lam[2] + (lam[2] - lam[1]) / 3.0;
    assert!((limit - 2.0).abs() < 1e-4, "{lam:?} limit {limit}");
    // untuned axisymmetric sectors
    let sec: Vec<f64> =
        [32, 64, 128].iter().map(|&nt| op(SphereGrid::axisymmetric(2, nt).unwrap(), a.clone()).sector_eigenvalues(2).unwrap()[0]).collect();
    let order = ((sec[0] - sec[1]) / (sec[1] - sec[2])).abs().log2();
    assert!(order > 1.9 && (sec[2] - 6.0).abs() < 1e-3, "{sec:?} order {order}");
}

#[test]
fn full_and_axisymmetric_grids_agree() {
    let a = Anisotropy::ellipsoid(&[1.5, 1.0, 1.0]).unwrap();
    let full = lambda1(&op(SphereGrid::full(32, 64).unwrap(), a.clone())).unwrap();
    let axi = lambda1(&op(SphereGrid::axisymmetric(2, 256).unwrap(), a)).unwrap();
    assert!((full - axi).abs() < 1e-2 * axi, "{full} vs {axi}");
}

#[test]
fn synthetic_decay_is_recovered() {
    let recs: Vec<(f64, f64)> = (0..300).map(|i| {
        let t = i as f64 * 0.1;
        (t, 3.0 * (-0.7 * t).exp())
    }).collect();
    let fit = fit_decay(&recs).unwrap();
    assert!((fit.rate - 0.7).abs() < 1e-6);
    assert!(fit.r_squared > 0.999_999 && fit.warning.is_none());
    assert!(fit.ci95.0 <= fit.rate && fit.rate <= fit.ci95.1);
    // the tail starts once the deviation is below 10% of the initial value
    assert!((fit.t_start - 3.3).abs() < 1e-9, "{}", fit.t_start);
}

#[test]
fn decay_fit_rejects_short_or_flat_series() {
    let short: Vec<(f64, f64)> = (0..25).map(|i| (i as f64, (-0.2 * i as f64).exp())).collect();
    assert!(fit_decay(&short).is_err());
    let flat: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 1.0)).collect();
    assert!(fit_decay(&flat).is_err());
    assert!(fit_decay::<f64>(&[]).is_err());
}

#[test]
fn noisy_decay_reports_poor_fit() {
    let recs: Vec<(f64, f64)> = (0..200)
        .map(|i| {
            let t = i as f64 * 0.1;
            (t, (-0.5 * t).exp() * if i % 2 == 0 { 1.0 } else { 0.3 })
        })
        .collect();
    let fit = fit_decay(&recs).unwrap();
    assert!(fit.warning.is_some(), "{fit:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fitted_rate_is_exact_on_exponentials(rate in 0.05f64..3.0, amp in 0.1f64..10.0) {
        let dt = 10.0 / rate / 200.0;
        let recs: Vec<(f64, f64)> = (0..200).map(|i| (i as f64 * dt, amp * (-rate * i as f64 * dt).exp())).collect();
        let fit = fit_decay(&recs).unwrap();
        prop_assert!((fit.rate - rate).abs() < 1e-8 * rate);
    }
}

