use super::*;
use crate::bodies::ConvexBody;
use num_rational::Ratio;
use proptest::prelude::*;

/// Brute-force normalized `E_k` by subset enumeration.
fn ek_by_subsets(v: &[f64], k: usize) -> f64 {
    let n = v.len();
    let (mut sum, mut count) = (0.0, 0usize);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            sum += (0..n).filter(|i| mask & (1 << i) != 0).map(|i| v[i]).product::<f64>();
            count += 1;
        }
    }
    sum / count as f64
}

/// Gauss curvature of the ellipsoid with semi-axes `a` at the point with unit normal `u`.
fn ellipsoid_gauss(a: &[f64], u: &SVec<f64>) -> f64 {
    let n = a.len() - 1;
    let q: f64 = a.iter().enumerate().map(|(i, ai)| ai * ai * u[i] * u[i]).sum();
    q.powf((n + 2) as f64 / 2.0) / a.iter().map(|x| x * x).product::<f64>()
}

fn interior(grid: &SphereGrid<f64>, idx: usize, margin: f64) -> bool {
    let th = grid.theta[grid.ij(idx).0];
    th > margin && th < std::f64::consts::PI - margin
}

#[test]
fn elementary_examples() {
    let v = [1.0f64, 2.0, 3.0];
    assert_eq!(elementary_ek(&v, 0), 1.0);
    assert_eq!(elementary_ek(&v, 1), 2.0);
    assert!((elementary_ek(&v, 2) - 11.0 / 3.0).abs() < 1e-15);
    assert_eq!(elementary_ek(&v, 3), 6.0);
    let r: Vec<Ratio<i64>> = [1, 2, 3].iter().map(|&x| Ratio::from_integer(x)).collect();
    assert_eq!(elementary_ek(&r, 2), Ratio::new(11, 3));
    assert_eq!(elementary_all(&r), vec![1, 6, 11, 6].into_iter().map(Ratio::from_integer).collect::<Vec<_>>());
}

#[test]
fn phi_dual_examples() {
    assert!((phi_dual(&[1.0f64, 4.0], 2).unwrap() - 2.0).abs() < 1e-15);
    assert!((phi_dual(&[1.0, 2.0, 3.0], 2).unwrap() - 3f64.sqrt()).abs() < 1e-14);
    assert!((phi_dual(&[2.5f64, 2.5, 2.5], 1).unwrap() - 2.5).abs() < 1e-15);
    assert!(phi_dual(&[1.0, 2.0], 0).is_err());
    assert!(phi_dual(&[1.0, 2.0], 3).is_err());
    assert!(phi_dual(&[1.0, -2.0], 1).is_err());
}

#[test]
fn umbilicity_examples() {
    assert!((umbilicity(&[1.0f64, 3.0]) - 4.0).abs() < 1e-13);
    assert_eq!(umbilicity(&[2.0, 2.0, 2.0]), 0.0);
    assert_eq!(umbilicity(&[5.0]), 0.0);
}

#[test]
fn round_sphere_graph() {
    let aniso = Anisotropy::<f64>::round(2);
    let grid = SphereGrid::full(16, 32).unwrap();
    let state = RadialGraphState::from_radius(&vec![1.7; grid.len()]).unwrap();
    let geom = graph_geometry(&aniso, &grid, &state).unwrap();
    for g in &geom.nodes {
        for a in 0..2 {
            assert!((g.kappa[a] - 1.0 / 1.7).abs() < 1e-12);
        }
        assert!((g.sigma_f - 1.7).abs() < 1e-12);
    }
    assert!(geom.convexity.is_none());
    assert!(umbilicity_defect(&geom) < 1e-14);
}

#[test]
fn wulff_shape_has_constant_curvature() {
    // r̄·W_F, both centred and shifted, on two resolutions: κ → 1/r̄ at second order
    let aniso = Anisotropy::ellipsoid(&[1.3, 0.9, 1.0]).unwrap();
    let center = SVec::from_slice(&[0.1, -0.05, 0.08]);
    for body in [ConvexBody::wulff(2, 1.5), ConvexBody::Wulff { scale: 1.5, center }] {
        let mut errs = Vec::new();
        for (nt, np) in [(32, 64), (64, 128)] {
            let grid = SphereGrid::full(nt, np).unwrap();
            let geom = graph_geometry(&aniso, &grid, &body.radial_state(&aniso, &grid).unwrap()).unwrap();
            let err = (0..grid.len())
                .filter(|&i| interior(&grid, i, 0.5))
                .flat_map(|i| geom.nodes[i].kappa.as_slice().to_vec())
                .map(|k| (k - 1.0 / 1.5).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[1] < 2e-3, "{errs:?}");
        assert!((errs[0] / errs[1]).log2() > 1.8, "{errs:?}");
    }
}

#[test]
fn graph_gauss_curvature_matches_ellipsoid() {
    let axes = [1.2, 0.8, 1.0];
    let aniso = Anisotropy::ellipsoid(&[1.1, 1.0, 0.85]).unwrap();
    let body = ConvexBody::ellipsoid(&axes);
    let mut errs = Vec::new();
    for (nt, np) in [(32, 64), (64, 128)] {
        let grid = SphereGrid::full(nt, np).unwrap();
        let geom = graph_geometry(&aniso, &grid, &body.radial_state(&aniso, &grid).unwrap()).unwrap();
        let mut err: f64 = 0.0;
        for i in (0..grid.len()).filter(|&i| interior(&grid, i, 0.5)) {
            let g = &geom.nodes[i];
            let det_a = aniso.a_matrix(&g.nu).unwrap().det();
            let exact = det_a * ellipsoid_gauss(&axes, &g.nu);
            let got = elementary_ek(g.kappa.as_slice(), 2);
            err = err.max((got / exact - 1.0).abs());
            // E_n(κ) = det A · E_n(κ_iso)
            let iso = elementary_ek(g.kappa_iso.as_slice(), 2);
            assert!((got - g.a_det * iso).abs() < 1e-10 * got.abs());
            // anisotropic normal is ∇F(ν)
            assert!(g.nu_f.sub(&aniso.jet(&g.nu, 1).unwrap().grad).max_abs() < 1e-14);
        }
        errs.push(err);
    }
    assert!(errs[1] < 2e-3, "{errs:?}");
    assert!((errs[0] / errs[1]).log2() > 1.5, "{errs:?}");
}

#[test]
fn support_radii_match_ellipsoid() {
    let axes = [1.2, 0.8, 1.0];
    let aniso = Anisotropy::ellipsoid(&[1.1, 1.0, 0.85]).unwrap();
    let body = ConvexBody::ellipsoid(&axes);
    let mut errs = Vec::new();
    for (nt, np) in [(32, 64), (64, 128)] {
        let chart = WulffChart::new(SphereGrid::full(nt, np).unwrap(), aniso.clone()).unwrap();
        let s = body.support_state(&chart).unwrap().s;
        let geom = support_geometry(&chart, &s, TauMode::Raw).unwrap();
        assert!(geom.convexity.is_none());
        let en = geom.elementary(2);
        let mut err: f64 = 0.0;
        for i in (0..chart.len()).filter(|&i| interior(&chart.grid, i, 0.5)) {
            let x = &chart.grid.nodes[i];
            let exact = 1.0 / (aniso.a_matrix(x).unwrap().det() * ellipsoid_gauss(&axes, x));
            err = err.max((en[i] / exact - 1.0).abs());
        }
        errs.push(err);
    }
    assert!(errs[1] < 2e-3, "{errs:?}");
    assert!((errs[0] / errs[1]).log2() > 1.8, "{errs:?}");
}

#[test]
fn axisymmetric_support_radii_match_ellipsoid() {
    // S³ with axisymmetric anisotropy and body
    let axes = [1.3, 0.9, 0.9, 0.9];
    let aniso = Anisotropy::ellipsoid(&[0.8, 1.0, 1.0, 1.0]).unwrap();
    let body = ConvexBody::ellipsoid(&axes);
    let mut errs = Vec::new();
    for nt in [64, 128] {
        let chart = WulffChart::new(SphereGrid::axisymmetric(3, nt).unwrap(), aniso.clone()).unwrap();
        let s = body.support_state(&chart).unwrap().s;
        let mut err: f64 = 0.0;
        for mode in [TauMode::Raw, TauMode::Balanced] {
            let en = support_geometry(&chart, &s, mode).unwrap().elementary(3);
            for i in (0..chart.len()).filter(|&i| interior(&chart.grid, i, 0.5)) {
                let x = &chart.grid.nodes[i];
                let exact = 1.0 / (aniso.a_matrix(x).unwrap().det() * ellipsoid_gauss(&axes, x));
                err = err.max((en[i] / exact - 1.0).abs());
            }
        }
        errs.push(err);
    }
    assert!(errs[1] < 2e-3, "{errs:?}");
    assert!((errs[0] / errs[1]).log2() > 1.8, "{errs:?}");
}

#[test]
fn constant_support_is_a_scaled_wulff_shape() {
    let aniso = Anisotropy::ellipsoid(&[1.3, 0.9, 1.0]).unwrap();
    let chart = WulffChart::<f64>::new(SphereGrid::full(16, 32).unwrap(), aniso).unwrap();
    let s = SupportState::constant(chart.len(), 2.0f64).s;
    for mode in [TauMode::Raw, TauMode::Balanced] {
        let geom = support_geometry(&chart, &s, mode).unwrap();
        for r in &geom.radii {
            assert!((r[0] - 2.0).abs() < 1e-10 && (r[1] - 2.0).abs() < 1e-10, "{r:?}");
        }
        assert!(geom.umbilicity_defect() < 1e-14);
    }
}

#[test]
fn round_translated_sphere_radii() {
    // s = r + ⟨x, v⟩ for round F is a translated sphere of radius r
    let chart = WulffChart::new(SphereGrid::full(24, 48).unwrap(), Anisotropy::round(2)).unwrap();
    let v = SVec::from_slice(&[0.2, -0.1, 0.3]);
    let s: Vec<f64> = chart.grid.nodes.iter().map(|x| 1.5 + x.dot(&v)).collect();
    let geom = support_geometry(&chart, &s, TauMode::Raw).unwrap();
    for r in &geom.radii {
        assert!((r[0] - 1.5).abs() < 1e-8 && (r[1] - 1.5).abs() < 1e-8, "{r:?}");
    }
}

#[test]
fn support_points_reconstruct_the_boundary() {
    // h = ⟨c, x⟩ + r is degree one, where the stencils are exact
    let a = Anisotropy::ellipsoid(&[1.3, 0.9, 1.1]).unwrap();
    let chart = WulffChart::new(SphereGrid::full(16, 32).unwrap(), a.clone()).unwrap();
    let c = SVec::from_slice(&[0.2, -0.1, 0.3]);
    let s = ConvexBody::ball_at(c, 1.2).support_state(&chart).unwrap().s;
    for (p, x) in support_points(&chart, &s).unwrap().iter().zip(&chart.grid.nodes) {
        assert!(p.sub(&c).sub(&x.scale(1.2)).max_abs() < 1e-12);
    }
    let axes = [1.4f64, 0.8, 0.8];
    let chart = WulffChart::new(SphereGrid::axisymmetric(2, 64).unwrap(), Anisotropy::ellipsoid(&[1.2, 1.0, 1.0]).unwrap()).unwrap();
    let s = ConvexBody::ellipsoid(&axes).support_state(&chart).unwrap().s;
    for p in support_points(&chart, &s).unwrap() {
        let q: f64 = (0..3).map(|i| (p[i] / axes[i]).powi(2)).sum();
        assert!((q - 1.0).abs() < 2e-3, "{q}");
    }
}

#[test]
fn codazzi_residual_converges() {
    let aniso = Anisotropy::ellipsoid(&[1.2, 0.9, 1.0]).unwrap();
    let body = ConvexBody::ellipsoid(&[1.1, 0.8, 1.3]);
    let mut errs = Vec::new();
    for (nt, np) in [(16, 32), (32, 64), (64, 128)] {
        let chart = WulffChart::new(SphereGrid::full(nt, np).unwrap(), aniso.clone()).unwrap();
        let s = body.support_state(&chart).unwrap().s;
        let r = codazzi_residual(&chart, &s).unwrap();
        errs.push((0..chart.len()).filter(|&i| interior(&chart.grid, i, 0.5)).map(|i| r[i]).fold(0.0, f64::max));
    }
    assert!(errs[2] < 2e-2, "{errs:?}");
    assert!((errs[1] / errs[2]).log2() > 1.5, "{errs:?}");
    let axi = WulffChart::new(SphereGrid::axisymmetric(2, 16).unwrap(), Anisotropy::round(2)).unwrap();
    assert!(codazzi_residual(&axi, &vec![1.0; axi.len()]).is_err());
}

#[test]
fn single_precision_graph() {
    let aniso = Anisotropy::<f32>::round(2);
    let grid = SphereGrid::<f32>::full(16, 32).unwrap();
    let state = RadialGraphState::from_radius(&vec![2.0f32; grid.len()]).unwrap();
    let geom = graph_geometry(&aniso, &grid, &state).unwrap();
    assert!(geom.nodes.iter().all(|g| (g.kappa[1] - 0.5).abs() < 1e-5));
}

fn positive_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1..5.0f64, 1..6)
}

proptest! {
    #[test]
    fn elementary_matches_subset_enumeration(v in prop::collection::vec(-3.0..3.0f64, 1..7)) {
        for k in 0..=v.len() {
            let a = elementary_ek(&v, k);
            let b = ek_by_subsets(&v, k);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn newton_maclaurin(v in positive_vec()) {
        let e = elementary_normalized(&v);
        let n = v.len();
        for k in 1..n {
            prop_assert!(e[k - 1] * e[k + 1] <= e[k] * e[k] * (1.0 + 1e-12));
            let a = e[k].powf(1.0 / k as f64);
            let b = e[k + 1].powf(1.0 / (k + 1) as f64);
            prop_assert!(b <= a * (1.0 + 1e-12));
        }
    }

    #[test]
    fn phi_dual_inverts_psi(v in positive_vec(), k in 1usize..6) {
        let k = k.min(v.len());
        let inv: Vec<f64> = v.iter().map(|t| 1.0 / t).collect();
        let phi = phi_dual(&v, k).unwrap();
        prop_assert!((phi * psi(&inv, k) - 1.0).abs() < 1e-12);
        let scaled: Vec<f64> = v.iter().map(|t| 3.0 * t).collect();
        prop_assert!((phi_dual(&scaled, k).unwrap() - 3.0 * phi).abs() < 1e-12 * phi);
    }

    #[test]
    fn gradients_match_finite_differences(v in positive_vec(), k in 1usize..6) {
        let k = k.min(v.len());
        let gp = phi_dual_gradient(&v, k).unwrap();
        let gs = psi_gradient(&v, k);
        for i in 0..v.len() {
            let h = 1e-6 * v[i];
            let (mut a, mut b) = (v.clone(), v.clone());
            a[i] += h;
            b[i] -= h;
            let fd_p = (phi_dual(&a, k).unwrap() - phi_dual(&b, k).unwrap()) / (2.0 * h);
            let fd_s = (psi(&a, k) - psi(&b, k)) / (2.0 * h);
            prop_assert!((gp[i] - fd_p).abs() < 1e-6 * (1.0 + fd_p.abs()));
            prop_assert!((gs[i] - fd_s).abs() < 1e-6 * (1.0 + fd_s.abs()));
            prop_assert!(gp[i] > 0.0 && gs[i] > 0.0);
        }
    }

    #[test]
    fn umbilicity_is_pairwise_spread(v in prop::collection::vec(-3.0..3.0f64, 2..6)) {
        let mut pair = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                pair += (v[i] - v[j]).powi(2);
            }
        }
        prop_assert!((umbilicity(&v) - pair).abs() < 1e-10 * (1.0 + pair));
    }
}
