use std::f64::consts::PI;

use anyhow::Result;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wulff_core::anisotropy::ADMISSION_TOL;
use wulff_core::bodies::ConvexBody;
use wulff_core::curvature::{codazzi_residual, elementary_normalized, graph_geometry, GraphGeometry, SupportState, TauMode};
use wulff_core::discretization::{GridMode, SphereGrid, WulffChart};
use wulff_core::flow::rhs_support;
use wulff_core::functionals::{wulff_volume, FunctionalReport, SurfaceMeasure};
use wulff_core::linalg::SVec;
use wulff_core::spectral::build_operator;
use wulff_core::sphere::spread_points;
use wulff_core::{Anisotropy, WulffError};

use super::Session;
use crate::output::csv_writer;

/// Residuals below this are rounding; no refinement order is claimed for them.
const EXACT_FLOOR: f64 = 1e-10;
const MIN_ORDER: f64 = 1.0;

#[derive(Debug)]
pub struct Check {
    pub name: String,
    pub observed: String,
    pub tolerance: String,
    pub passed: bool,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn at_most(&mut self, name: impl Into<String>, observed: f64, tol: f64) {
        self.push(name, format!("{observed:.3e}"), format!("<= {tol:.1e}"), observed <= tol);
    }

    fn at_least(&mut self, name: impl Into<String>, observed: f64, tol: f64) {
        self.push(name, format!("{observed:.3e}"), format!(">= {tol:.1e}"), observed >= tol);
    }

    /// Empirical order from a refinement pair, or "exact" below the rounding floor.
    fn order(&mut self, name: impl Into<String>, coarse: f64, fine: f64) {
        if coarse.abs() < EXACT_FLOOR {
            self.push(name, format!("exact ({coarse:.1e} -> {fine:.1e})"), format!(">= {MIN_ORDER}"), fine.abs() < EXACT_FLOOR);
        } else {
            let p = (coarse.abs() / fine.abs()).log2();
            self.push(name, format!("{p:.2} ({coarse:.2e} -> {fine:.2e})"), format!(">= {MIN_ORDER}"), p >= MIN_ORDER);
        }
    }

    fn push(&mut self, name: impl Into<String>, observed: String, tolerance: String, passed: bool) {
        self.0.push(Check { name: name.into(), observed, tolerance, passed });
    }
}

pub fn check(s: &mut Session) -> Result<u8> {
    let checks = run_checks(s)?;
    let mut w = csv_writer(&s.out.join("check.csv"), "# wulff check.csv v1")?;
    w.write_record(["check", "observed", "tolerance", "passed"])?;
    for c in &checks {
        w.write_record([c.name.as_str(), c.observed.as_str(), c.tolerance.as_str(), if c.passed { "true" } else { "false" }])?;
        if !s.quiet {
            println!("[{}] {:<28} {:<36} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.observed, c.tolerance);
        }
    }
    w.flush()?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    s.summary.set("checks", checks.len());
    s.summary.set("failed", failed.len());
    if failed.is_empty() {
        s.summary.set("status", "passed");
        s.summary.set("reason", "every invariant within tolerance");
        Ok(0)
    } else {
        s.summary.set("status", "failed");
        s.summary.set("reason", format!("failed checks: {}", failed.join(", ")));
        Ok(1)
    }
}

fn run_checks(s: &Session) -> Result<Vec<Check>> {
    let cfg = &s.config;
    let mut out = Checks::default();
    let aniso = match cfg.anisotropy() {
        Ok(a) => a,
        Err(WulffError::Admissibility(msg)) => {
            out.push("admission", msg, format!("lambda_min/lambda_max >= {ADMISSION_TOL:.0e}"), false);
            return Ok(out.0);
        }
        Err(e) => return Err(e.into()),
    };
    let (lo, hi) = aniso.convexity_range();
    out.at_least("admission", lo / hi, ADMISSION_TOL);
    anisotropy_checks(&aniso, cfg.seed, &mut out)?;

    let grid = cfg.grid()?;
    let fine = grid.refined(2)?;
    let body = cfg.body(&aniso, &grid)?;
    let kmin = body.min_curvature(&aniso, &grid)?;
    out.push("body_convex", format!("{kmin:.3e}"), "> 0".into(), kmin > 0.0);
    if !(kmin > 0.0) {
        return Ok(out.0);
    }

    let n = grid.n;
    let coarse_geom = graph_geometry(&aniso, &grid, &body.radial_state(&aniso, &grid)?)?;
    let fine_geom = graph_geometry(&aniso, &fine, &body.radial_state(&aniso, &fine)?)?;
    out.at_most("newton_maclaurin", newton_maclaurin_excess(&coarse_geom), 1e-12);

    let reports = [(&grid, &coarse_geom), (&fine, &fine_geom)]
        .map(|(g, geom)| -> Result<FunctionalReport<f64>> {
            Ok(FunctionalReport::new(&SurfaceMeasure::from_graph(g, geom)?, wulff_volume(&aniso, g)?)?)
        });
    let [coarse, finer] = reports;
    let (coarse, finer) = (coarse?, finer?);
    let np1 = (n + 1) as f64;
    out.at_most("v0_anchor", (finer.v[0] / (np1 * finer.wulff_volume) - 1.0).abs(), 1e-3);
    if let Some(r) = finer.volume_residual {
        out.at_most("volume_residual", (r / (np1 * finer.vol)).abs(), 1e-3);
    }
    for k in 0..n {
        // ∫E_k dμ_F = V_{n−k} normalizes the residual
        let rel = |r: &FunctionalReport<f64>| r.minkowski[k] / r.v[n - k];
        out.at_most(format!("minkowski_k{k}"), rel(&finer).abs(), 1e-3);
        out.order(format!("minkowski_k{k}_order"), rel(&coarse), rel(&finer));
    }
    for (k, &slack) in finer.af_slack.iter().enumerate() {
        out.at_least(format!("af_slack_k{k}"), slack / finer.v[n - k], -1e-6);
    }

    let chart = WulffChart::new(grid.clone(), aniso.clone())?;
    let op = build_operator(&chart)?;
    out.at_most("operator_asymmetry", op.weighted_asymmetry(), 1e-8);
    out.at_most("operator_kernel", op.kernel_residual(), 1e-8);

    // r W_F is stationary; second-order stencils leave O(h²)
    let speed = rhs_support(&chart, &SupportState::constant(chart.len(), 1.0), cfg.flow.k, TauMode::for_grid(grid.mode))?.sup_speed();
    let h_ratio = 64.0 / grid.n_theta as f64;
    out.at_most("wulff_stationarity", speed, 5e-4 * h_ratio * h_ratio);

    if let GridMode::Full2D { .. } = grid.mode {
        let cz = [&grid, &fine].map(|g| codazzi_interior(&aniso, g, &body));
        let [a, b] = cz;
        out.order("codazzi_order", a?, b?);
    }
    Ok(out.0)
}

fn anisotropy_checks(aniso: &Anisotropy<f64>, seed: u64, out: &mut Checks) -> Result<()> {
    let n = aniso.dimension();
    let d = n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || {
        let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = SVec::from_slice(&raw);
        v.scale(1.0 / v.norm())
    };
    let (mut emb, mut qz, mut q_all, mut phi_x) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for x in spread_points::<f64>(n, 200, seed) {
        let z = aniso.wulff_embedding(&x)?;
        emb = emb.max((aniso.dual_norm(&z)? - 1.0).abs());
        phi_x = phi_x.max(z.sub(&x).max_abs());
        let fr = aniso.frame_at(&x)?;
        let (u, v) = (unit(), unit());
        qz = qz.max(fr.q_form(&fr.z, &u, &v).abs());
        q_all = q_all.max(fr.q.iter().fold(0.0, |m, q| m.max(q.abs())));
    }
    out.at_most("wulff_embedding", emb, 1e-10);
    out.at_most("q_normal_direction", qz, 1e-8);
    if aniso.is_round() {
        out.at_most("round_q_vanishes", q_all, 1e-12);
        out.at_most("round_embedding_identity", phi_x, 1e-12);
    }
    Ok(())
}

/// Largest `E_k^{1/k} − E_{k−1}^{1/(k−1)}` over nodes, relative to `E_1`.
fn newton_maclaurin_excess(geom: &GraphGeometry<f64>) -> f64 {
    geom.nodes
        .iter()
        .map(|g| {
            let e = elementary_normalized(g.kappa.as_slice());
            let roots: Vec<f64> = (1..e.len()).map(|k| e[k].powf(1.0 / k as f64)).collect();
            roots.windows(2).map(|w| (w[1] - w[0]) / roots[0]).fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Codazzi residual away from the polar caps, where the tensor stencils are regular.
fn codazzi_interior(aniso: &Anisotropy<f64>, grid: &SphereGrid<f64>, body: &ConvexBody<f64>) -> Result<f64> {
    let chart = WulffChart::new(grid.clone(), aniso.clone())?;
    let s = body.support_state(&chart)?.s;
    let r = codazzi_residual(&chart, &s)?;
    Ok((0..chart.len())
        .filter(|&i| {
            let th = grid.theta[grid.ij(i).0];
            th > 0.5 && th < PI - 0.5
        })
        .map(|i| r[i])
        .fold(0.0, f64::max))
}
