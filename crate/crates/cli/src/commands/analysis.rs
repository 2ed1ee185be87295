use std::fs;

use anyhow::{ensure, Result};

use wulff_core::bodies::{random_bodies, ConvexBody};
use wulff_core::curvature::graph_geometry;
use wulff_core::discretization::{GridMode, SphereGrid, WulffChart};
use wulff_core::functionals::{mc_mixed_volumes, wulff_volume, FunctionalReport, SurfaceMeasure};
use wulff_core::spectral::{build_operator, lambda1, predicted_rate};
use wulff_core::Anisotropy;

use super::Session;
use crate::output::{csv_writer, num, AF_SCHEMA};

/// Alexandrov–Fenchel slack for seeded random bodies, every `k ≤ n − 2`.
pub fn af(s: &mut Session) -> Result<u8> {
    let cfg = &s.config;
    let aniso = cfg.anisotropy()?;
    let grid = cfg.grid()?;
    let n = grid.n;
    let w = wulff_volume(&aniso, &grid)?;
    let bodies = random_bodies(&aniso, &grid, cfg.af.bodies, cfg.seed)?;
    let mut out = csv_writer(&s.out.join("af.csv"), AF_SCHEMA)?;
    out.write_record(["body", "k", "slack", "relative_slack"])?;
    let mut worst = f64::INFINITY;
    let mut failures = 0usize;
    for (b, body) in bodies.iter().enumerate() {
        let rep = FunctionalReport::new(&graph_measure(&aniso, &grid, body)?, w)?;
        for (k, &slack) in rep.af_slack.iter().enumerate() {
            let rel = slack / rep.v[n - k];
            worst = worst.min(rel);
            if rel < -cfg.af.tolerance {
                failures += 1;
            }
            out.write_record([b.to_string(), k.to_string(), num(slack), num(rel)])?;
        }
    }
    out.flush()?;
    let sm = &mut s.summary;
    sm.set("bodies", bodies.len());
    sm.set("k_range", format!("0..={}", n - 2));
    sm.set("min_relative_slack", num(worst));
    sm.set("tolerance", cfg.af.tolerance);
    sm.set("failures", failures);
    if !s.quiet {
        println!("{} bodies, min relative slack {worst:.3e}, {failures} below -{:e}", bodies.len(), cfg.af.tolerance);
    }
    if failures == 0 {
        sm.set("status", "passed");
        sm.set("reason", "every slack above -tolerance");
        Ok(0)
    } else {
        sm.set("status", "failed");
        sm.set("reason", format!("{failures} slacks below -tolerance"));
        Ok(1)
    }
}

/// `λ₁` of the linearized operator and the rate `λ₁/(n r̄)`.
pub fn spectrum(s: &mut Session) -> Result<u8> {
    let cfg = &s.config;
    let chart = WulffChart::new(cfg.grid()?, cfg.anisotropy()?)?;
    let op = build_operator(&chart)?;
    let n = chart.dimension();
    let ev = op.lowest_eigenvalues(cfg.spectrum.count)?;
    let l1 = lambda1(&op)?;
    let r_bar = cfg.spectrum.r_bar;
    let lines = [
        ("nodes", op.len().to_string()),
        ("grid", grid_label(&chart.grid)),
        ("weighted_asymmetry", format!("{:e}", op.weighted_asymmetry())),
        ("kernel_residual", format!("{:e}", op.kernel_residual())),
        ("lowest_eigenvalues", ev.iter().map(|&v| num(v)).collect::<Vec<_>>().join(" ")),
        ("lambda1", num(l1)),
        ("r_bar", r_bar.to_string()),
        ("predicted_rate", num(predicted_rate(l1, n, r_bar))),
    ];
    let text: String = lines.iter().map(|(k, v)| format!("{k}: {v}\n")).collect();
    fs::write(s.out.join("spectrum.txt"), &text)?;
    if !s.quiet {
        print!("{text}");
    }
    for (k, v) in lines {
        s.summary.set(k, v);
    }
    s.summary.set("status", "ok");
    s.summary.set("reason", "spectrum computed");
    Ok(0)
}

/// Surface-integral mixed volumes against the Monte-Carlo Steiner fit.
pub fn oracle(s: &mut Session) -> Result<u8> {
    let cfg = &s.config;
    let aniso = cfg.anisotropy()?;
    let grid = cfg.grid()?;
    let fine = grid.refined(2)?;
    let body = cfg.body(&aniso, &grid)?;
    let n = grid.n;
    let coarse = graph_measure(&aniso, &grid, &body)?;
    let finer = graph_measure(&aniso, &fine, &body)?;
    let est = mc_mixed_volumes(&aniso, &body, &cfg.mc_config())?;
    let mut out = csv_writer(&s.out.join("oracle.csv"), "# wulff oracle.csv v1")?;
    out.write_record(["m", "v_surface", "surface_err", "v_mc", "mc_stderr", "relative_diff", "passed"])?;
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for m in 0..=n + 1 {
        let v = finer.mixed_volume(m)?;
        // the refinement difference bounds the quadrature error of the finer value
        let h_err = (v - coarse.mixed_volume(m)?).abs();
        let (mc, se) = (est.v[m], est.stderr[m]);
        let diff = (mc - v).abs();
        let bar = 3.0 * (se * se + h_err * h_err).sqrt() + cfg.oracle.rel_tol * v.abs();
        let ok = diff <= bar;
        if !ok {
            failures.push(m);
        }
        worst = worst.max(diff / v.abs());
        out.write_record([m.to_string(), num(v), num(h_err), num(mc), num(se), num(diff / v.abs()), ok.to_string()])?;
        if !s.quiet {
            println!("V_{m}: surface {v:.6} ± {h_err:.1e}  mc {mc:.6} ± {se:.1e}  [{}]", if ok { "ok" } else { "DISAGREE" });
        }
    }
    out.flush()?;
    let sm = &mut s.summary;
    sm.set("max_relative_diff", num(worst));
    sm.set("samples", cfg.oracle.samples);
    if failures.is_empty() {
        sm.set("status", "passed");
        sm.set("reason", "all mixed volumes agree within the combined bars");
        Ok(0)
    } else {
        sm.set("status", "failed");
        sm.set("reason", format!("disagreement beyond combined bars for m = {failures:?}"));
        Ok(1)
    }
}

fn graph_measure(aniso: &Anisotropy<f64>, grid: &SphereGrid<f64>, body: &ConvexBody<f64>) -> Result<SurfaceMeasure<f64>> {
    let geom = graph_geometry(aniso, grid, &body.radial_state(aniso, grid)?)?;
    ensure!(geom.convexity.is_none(), "body is not strictly convex on the grid");
    Ok(SurfaceMeasure::from_graph(grid, &geom)?)
}

fn grid_label(grid: &SphereGrid<f64>) -> String {
    match grid.mode {
        GridMode::Full2D { n_theta, n_phi } => format!("full {n_theta}x{n_phi}"),
        GridMode::Axisymmetric { n, n_theta } => format!("axisymmetric S^{n}, {n_theta} latitudes"),
    }
}
