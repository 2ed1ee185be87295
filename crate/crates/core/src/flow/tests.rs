use super::*;
use crate::bodies::ConvexBody;
use crate::discretization::StencilOrder;
use crate::linalg::SVec;
use crate::HarmonicTerm;
use std::f64::consts::PI;

fn support_flow(aniso: Anisotropy<f64>, grid: SphereGrid<f64>, k: usize) -> Flow<f64> {
    Flow::new(aniso, grid, FlowConfig { k, ..FlowConfig::default() }).unwrap()
}

fn radial_flow(aniso: Anisotropy<f64>, grid: SphereGrid<f64>, k: usize) -> Flow<f64> {
    Flow::new(aniso, grid, FlowConfig { k, parametrization: Parametrization::RadialGraph, ..FlowConfig::default() })
        .unwrap()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

#[test]
fn round_sphere_is_stationary() {
    let grid = SphereGrid::full(16, 32).unwrap();
    let aniso = Anisotropy::round(2);
    let state = RadialGraphState::from_radius(&vec![1.3; grid.len()]).unwrap();
    for k in 1..=2 {
        let rhs = rhs_radial(&aniso, &grid, &state, k).unwrap();
        assert!(sup(&rhs.values) < 1e-12 && rhs.sup_speed() < 1e-12);
    }
}

#[test]
fn constant_support_is_stationary() {
    let aniso = Anisotropy::ellipsoid(&[2.0, 1.0, 1.0]).unwrap();
    for grid in [SphereGrid::full(16, 32).unwrap(), SphereGrid::axisymmetric(2, 32).unwrap()] {
        let flow = support_flow(aniso.clone(), grid, 2);
        let state = FlowState::Support(SupportState::constant(flow.grid.len(), 0.8));
        let rhs = flow.rhs(&state).unwrap();
        assert!(sup(&rhs.values) < 1e-12);
        let (next, dt) = flow.step(&state).unwrap();
        assert!(dt > 0.0);
        let change = next.values().iter().zip(state.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(change < 1e-12);
    }
}

#[test]
fn translated_round_sphere_moves_toward_origin() {
    let v = SVec::from_slice(&[0.2, -0.1, 0.15]);
    let mut errs: Vec<f64> = Vec::new();
    for (a, b) in [(32, 64), (64, 128)] {
        let chart = WulffChart::new(SphereGrid::full(a, b).unwrap(), Anisotropy::round(2)).unwrap();
        let s: Vec<f64> = chart.grid.nodes.iter().map(|x| 1.0 + x.dot(&v)).collect();
        let rhs = rhs_support(&chart, &SupportState::new(s), 2, TauMode::Raw).unwrap();
        let err = chart.grid.nodes.iter().zip(&rhs.values).map(|(x, r)| (r + x.dot(&v)).abs()).fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[1] < 1e-6, "{errs:?}");
}

#[test]
fn scaled_wulff_graph_is_stationary() {
    let aniso = Anisotropy::ellipsoid(&[1.3, 0.9, 1.0]).unwrap();
    let body = ConvexBody::wulff(2, 1.2);
    for (order, rate) in [(StencilOrder::Second, 1.8), (StencilOrder::Fourth, 3.5)] {
        let mut errs: Vec<f64> = Vec::new();
        for (a, b) in [(32, 64), (64, 128)] {
            let grid = SphereGrid::full(a, b).unwrap().with_order(order);
            let state = body.radial_state(&aniso, &grid).unwrap();
            errs.push(rhs_radial(&aniso, &grid, &state, 2).unwrap().sup_speed());
        }
        assert!(errs[1] < 2e-3, "{errs:?}");
        assert!((errs[0] / errs[1]).log2() > rate, "{order:?} {errs:?}");
    }
}

#[test]
fn radial_and_support_runs_agree_on_volume() {
    let aniso = Anisotropy::<f64>::ellipsoid(&[1.5, 1.0, 1.0]).unwrap();
    let grid = SphereGrid::axisymmetric(2, 48).unwrap();
    let body = ConvexBody::harmonic(2, 1.0, &[HarmonicTerm::new(2, 0, 0.2)]).unwrap();
    let cfg = FlowConfig { t_max: 1.0, record_stride: 20, ..FlowConfig::default() };
    let sflow = Flow::new(aniso.clone(), grid.clone(), cfg.clone()).unwrap();
    let rflow = radial_flow(aniso.clone(), grid.clone(), 2);
    // The graph discretization lacks the balanced trace, so its area drifts at O(h²) near the limit.
    let rcfg = FlowConfig { parametrization: Parametrization::RadialGraph, monotonicity_slack: 1e-4, ..cfg };
    let rflow = Flow { config: rcfg, ..rflow };
    let s = sflow.run(FlowState::Support(body.support_state(sflow.chart.as_ref().unwrap()).unwrap())).unwrap();
    let r = rflow.run(FlowState::Radial(body.radial_state(&aniso, &grid).unwrap())).unwrap();
    assert!(s.violations.is_empty() && r.violations.is_empty(), "{:?} {:?}", s.violations, r.violations);
    let vol_at = |recs: &[FlowRecord<f64>], t: f64| {
        let k = recs.iter().position(|x| x.t >= t).unwrap_or(recs.len() - 1).max(1);
        let (a, b) = (&recs[k - 1], &recs[k]);
        a.vol + (b.vol - a.vol) * ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0)
    };
    for rec in &s.records {
        let other = vol_at(&r.records, rec.t);
        assert!((rec.vol / other - 1.0).abs() < 5e-3, "t = {} {} {}", rec.t, rec.vol, other);
    }
}

#[test]
fn radial_and_support_speeds_agree() {
    // axisymmetric perturbed sphere: compare 1 − Ψσ_F as a function of the normal's polar angle
    let aniso = Anisotropy::<f64>::round(2);
    let body = ConvexBody::harmonic(2, 1.0, &[HarmonicTerm::new(2, 0, 0.15)]).unwrap();
    let mut errs: Vec<f64> = Vec::new();
    for nt in [64, 128] {
        let grid = SphereGrid::axisymmetric(2, nt).unwrap();
        let rg = graph_geometry(&aniso, &grid, &body.radial_state(&aniso, &grid).unwrap()).unwrap();
        let rr = rhs_radial_from(&rg, 2, 0.0).unwrap();
        let chart = WulffChart::new(grid.clone(), aniso.clone()).unwrap();
        let sr = rhs_support(&chart, &body.support_state(&chart).unwrap(), 2, TauMode::Balanced).unwrap();
        let mut err: f64 = 0.0;
        for (g, &sp) in rg.nodes.iter().zip(&rr.speed) {
            let th = g.nu[0].clamp(-1.0, 1.0).acos();
            if th < 0.3 || th > PI - 0.3 {
                continue;
            }
            let pos = th / grid.dtheta - 0.5;
            let i = pos.floor() as usize;
            let w = pos - i as f64;
            let interp = (1.0 - w) * sr.speed[i] + w * sr.speed[i + 1];
            err = err.max((interp - sp).abs());
        }
        errs.push(err);
    }
    assert!(errs[1] < 1e-3, "{errs:?}");
    assert!((errs[0] / errs[1]).log2() > 1.7, "{errs:?}");
}

#[test]
fn cfl_step_scales_with_h_squared() {
    let aniso = Anisotropy::round(2);
    let dts: Vec<f64> = [32, 64]
        .iter()
        .map(|&nt| {
            let flow = support_flow(aniso.clone(), SphereGrid::axisymmetric(2, nt).unwrap(), 2);
            let state = FlowState::Support(SupportState::constant(flow.grid.len(), 1.0));
            flow.stable_dt(&flow.rhs(&state).unwrap())
        })
        .collect();
    assert!((dts[0] / dts[1] - 4.0).abs() < 0.2, "{dts:?}");
}

#[test]
fn heun_is_second_order_in_time() {
    let aniso = Anisotropy::ellipsoid(&[2.0, 1.0, 1.0]).unwrap();
    let flow = support_flow(aniso, SphereGrid::axisymmetric(2, 32).unwrap(), 2);
    let body = ConvexBody::harmonic(2, 1.0, &[HarmonicTerm::new(2, 0, 0.2)]).unwrap();
    let state = FlowState::Support(body.support_state(flow.chart.as_ref().unwrap()).unwrap());
    let rhs = flow.rhs(&state).unwrap();
    let dt0 = flow.stable_dt(&rhs);
    let diffs: Vec<f64> = [dt0, dt0 / 2.0]
        .iter()
        .map(|&dt| {
            let a = flow.heun(&state, &rhs, dt).unwrap();
            let b = flow.euler(&state, &rhs, dt);
            sup(&a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect::<Vec<_>>())
        })
        .collect();
    assert!((diffs[0] / diffs[1] - 4.0).abs() < 0.3, "{diffs:?}");
}

#[test]
fn maximum_principle_spot_check() {
    let aniso = Anisotropy::ellipsoid(&[1.3, 0.9, 1.1]).unwrap();
    let grid = SphereGrid::full(24, 48).unwrap();
    let flow = support_flow(aniso.clone(), grid.clone(), 2);
    for body in crate::bodies::random_bodies(&aniso, &grid, 4, 3).unwrap() {
        let s = body.support_state(flow.chart.as_ref().unwrap()).unwrap();
        let (imax, _) = s.s.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        let (imin, _) = s.s.iter().enumerate().fold((0, f64::MAX), |a, (i, &v)| if v < a.1 { (i, v) } else { a });
        let rhs = flow.rhs(&FlowState::Support(s)).unwrap();
        assert!(rhs.values[imax] <= 1e-3 && rhs.values[imin] >= -1e-3, "{} {}", rhs.values[imax], rhs.values[imin]);
    }
}

#[test]
fn unit_sphere_converges_at_step_zero() {
    let flow = support_flow(Anisotropy::round(2), SphereGrid::axisymmetric(2, 32).unwrap(), 2);
    let out = flow.run(FlowState::Support(SupportState::constant(flow.grid.len(), 1.0))).unwrap();
    assert!(out.converged());
    assert_eq!(out.steps, 0);
    assert_eq!(out.records.len(), 1);
    assert!((out.r_bar - 1.0).abs() < 1e-12);
}

#[test]
fn perturbed_round_sphere_flows_to_a_sphere() {
    let grid = SphereGrid::axisymmetric(2, 48).unwrap();
    let flow = support_flow(Anisotropy::round(2), grid, 2);
    let body = ConvexBody::harmonic(2, 1.0, &[HarmonicTerm::new(2, 0, 0.3)]).unwrap();
    let s0 = body.support_state(flow.chart.as_ref().unwrap()).unwrap();
    let out = flow.run(FlowState::Support(s0)).unwrap();
    assert!(out.converged(), "{:?}", out.status);
    assert!(out.violations.is_empty(), "{:?}", &out.violations[..out.violations.len().min(5)]);
    let last = out.records.last().unwrap();
    assert!((last.i_k / (4.0 * PI).powf(1.0 / 3.0) - 1.0).abs() < 1e-3, "{}", last.i_k);
    assert!(out.shape_error < 1e-3);
}

#[test]
fn timeout_and_convexity_loss_are_reported() {
    let grid = SphereGrid::axisymmetric(2, 32).unwrap();
    let cfg = FlowConfig { t_max: 0.01, ..FlowConfig::default() };
    let flow = Flow::new(Anisotropy::round(2), grid.clone(), cfg).unwrap();
    let body = ConvexBody::harmonic(2, 1.0, &[HarmonicTerm::new(2, 0, 0.2)]).unwrap();
    let mut seen = Vec::new();
    let s0 = body.support_state(flow.chart.as_ref().unwrap()).unwrap();
    let out = flow.run_observed(FlowState::Support(s0), |st, rec| seen.push((st.time(), rec.t))).unwrap();
    assert_eq!(out.status, FlowStatus::Timeout);
    assert!(out.records.last().unwrap().t >= 0.01);
    assert_eq!(seen.len(), out.records.len());
    assert!(seen.iter().zip(&out.records).all(|(&(a, b), r)| a == r.t && b == r.t));

    // a dented support function is not the support function of a convex body
    let chart = flow.chart.as_ref().unwrap();
    let s: Vec<f64> = chart.grid.theta.iter().map(|&th: &f64| 1.0 + 0.6 * (4.0 * th).cos()).collect();
    let out = flow.run(FlowState::Support(SupportState::new(s))).unwrap();
    assert!(matches!(out.status, FlowStatus::ConvexityLost { .. }), "{:?}", out.status);
}

#[test]
fn configuration_is_validated() {
    let grid = SphereGrid::axisymmetric(2, 32).unwrap();
    let bad = [
        FlowConfig { k: 3, ..FlowConfig::default() },
        FlowConfig { k: 0, ..FlowConfig::default() },
        FlowConfig { cfl: 1.0, ..FlowConfig::default() },
        FlowConfig { record_stride: 0, ..FlowConfig::default() },
    ];
    for cfg in bad {
        assert!(matches!(Flow::new(Anisotropy::round(2), grid.clone(), cfg), Err(WulffError::Config(_))));
    }
    let flow = support_flow(Anisotropy::round(2), grid, 2);
    let wrong = FlowState::Radial(RadialGraphState::from_radius(&vec![1.0; flow.grid.len()]).unwrap());
    assert!(flow.run(wrong).is_err());
}

