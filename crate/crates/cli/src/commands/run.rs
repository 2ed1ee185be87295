use std::fs;

use anyhow::{Context, Result};

use wulff_core::curvature::{graph_geometry, support_geometry, support_points};
use wulff_core::flow::{Flow, FlowState, FlowStatus};
use wulff_core::spectral::fit_decay;

use super::Session;
use crate::output::{num, snapshot_path, write_obj, write_state, FlowWriter, StateRow};

const EXIT_TIMEOUT: u8 = 2;
const EXIT_CONVEXITY: u8 = 3;

/// Records between progress lines on stderr.
const PROGRESS_EVERY: usize = 25;

pub fn run(s: &mut Session) -> Result<u8> {
    let cfg = &s.config;
    let aniso = cfg.anisotropy()?;
    let grid = cfg.grid()?;
    let body = cfg.body(&aniso, &grid)?;
    let flow = Flow::new(aniso.clone(), grid.clone(), cfg.flow_config())?;
    let initial = match &flow.chart {
        Some(chart) => FlowState::Support(body.support_state(chart)?),
        None => FlowState::Radial(body.radial_state(&aniso, &grid)?),
    };
    s.summary.set("parametrization", format!("{:?}", flow.config.parametrization));
    s.summary.set("nodes", grid.len());

    let out = s.out.clone();
    let mut writer = FlowWriter::create(&out, grid.n)?;
    let snap_every = cfg.flow.snapshot_every;
    if snap_every > 0 {
        fs::create_dir_all(out.join("snapshots"))?;
    }
    let quiet = s.quiet;
    let mut io_error = None;
    let mut count = 0usize;
    let outcome = flow.run_observed(initial, |state, rec| {
        if io_error.is_some() {
            return;
        }
        let mut step = || -> Result<()> {
            writer.push(rec)?;
            if snap_every > 0 && count % snap_every == 0 {
                write_obj(&snapshot_path(&out, &format!("record_{count:05}")), &flow.grid, &boundary(&flow, state)?)?;
            }
            Ok(())
        };
        if let Err(e) = step() {
            io_error = Some(e);
        }
        if !quiet && count % PROGRESS_EVERY == 0 {
            eprintln!("t = {:.4}  vol = {:.6}  sup speed = {:.3e}", rec.t, rec.vol, rec.sup_speed);
        }
        count += 1;
    });
    writer.finish()?;
    if let Some(e) = io_error {
        return Err(e.context("writing flow output"));
    }
    let outcome = outcome?;

    let state = &outcome.final_state;
    let rows = state_rows(&flow, state)?;
    let value_name = if matches!(state, FlowState::Support(_)) { "s" } else { "rho" };
    write_state(&out.join("final_state.csv"), &flow.grid, value_name, state.time(), &rows)?;
    if snap_every > 0 {
        let pts: Vec<_> = rows.iter().map(|r| r.point).collect();
        write_obj(&snapshot_path(&out, "final"), &flow.grid, &pts)?;
    }

    let sm = &mut s.summary;
    let code = match &outcome.status {
        FlowStatus::Converged => {
            sm.set("status", "converged");
            sm.set("reason", format!("sup speed below {:e}", flow.config.speed_tol));
            0
        }
        FlowStatus::Timeout => {
            sm.set("status", "timeout");
            sm.set("reason", format!("t_max = {} or max_steps = {} reached before convergence", flow.config.t_max, flow.config.max_steps));
            EXIT_TIMEOUT
        }
        FlowStatus::ConvexityLost { node, t, value } => {
            let (i, j) = flow.grid.ij(*node);
            sm.set("status", "convexity_lost");
            sm.set(
                "reason",
                format!(
                    "first non-convex node {node} (theta = {:.6}, phi = {:.6}) at t = {t}, smallest principal value {value:e}",
                    flow.grid.theta[i], flow.grid.phi[j]
                ),
            );
            sm.set("first_bad_node", node);
            EXIT_CONVEXITY
        }
    };
    sm.set("steps", outcome.steps);
    sm.set("t_final", num(state.time()));
    sm.set("r_bar", num(outcome.r_bar));
    sm.set("shape_error", num(outcome.shape_error));
    if let Some(last) = outcome.records.last() {
        sm.set("vol", num(last.vol));
        sm.set("sup_speed", num(last.sup_speed));
        sm.set("umbilicity", num(last.umbilicity));
        sm.set("i_k", num(last.i_k));
    }
    sm.set("records", outcome.records.len());
    sm.set("monotonicity_violations", outcome.violations.len());
    if let Some(v) = outcome.violations.first() {
        sm.set("first_violation", format!("{} at step {}: {:e} -> {:e}", v.quantity, v.step, v.before, v.after));
    }
    let series: Vec<(f64, f64)> = outcome.records.iter().map(|r| (r.t, r.deviation)).collect();
    match fit_decay(&series) {
        Ok(fit) => {
            sm.set("fitted_rate", num(fit.rate));
            sm.set("fitted_rate_ci95", format!("[{}, {}]", num(fit.ci95.0), num(fit.ci95.1)));
            sm.set("fit_r_squared", num(fit.r_squared));
            sm.set("fit_window", format!("[{}, {}] ({} points)", num(fit.t_start), num(fit.t_end), fit.points));
            if let Some(w) = fit.warning {
                sm.set("fit_warning", w);
            }
        }
        Err(e) => sm.set("fitted_rate", format!("unavailable ({e})")),
    }
    Ok(code)
}

/// Boundary points of a state: `ρx` for graphs, `hx + ∇h` for support states.
fn boundary(flow: &Flow<f64>, state: &FlowState<f64>) -> Result<Vec<wulff_core::linalg::SVec<f64>>> {
    Ok(match state {
        FlowState::Support(st) => support_points(flow.chart.as_ref().context("support flow without a chart")?, &st.s)?,
        FlowState::Radial(st) => st.radius().iter().zip(&flow.grid.nodes).map(|(&r, x)| x.scale(r)).collect(),
    })
}

fn state_rows(flow: &Flow<f64>, state: &FlowState<f64>) -> Result<Vec<StateRow>> {
    let points = boundary(flow, state)?;
    let (values, mins): (Vec<f64>, Vec<f64>) = match state {
        FlowState::Support(st) => {
            let chart = flow.chart.as_ref().context("support flow without a chart")?;
            let mins = support_geometry(chart, &st.s, flow.tau_mode)
                .map(|g| g.radii.iter().map(|r| r[0]).collect())
                .unwrap_or_else(|_| vec![f64::NAN; st.s.len()]);
            (st.s.clone(), mins)
        }
        FlowState::Radial(st) => {
            let mins = graph_geometry(&flow.aniso, &flow.grid, st)
                .map(|g| g.nodes.iter().map(|nd| nd.kappa[0]).collect())
                .unwrap_or_else(|_| vec![f64::NAN; st.gamma.len()]);
            (st.radius(), mins)
        }
    };
    Ok(values
        .into_iter()
        .zip(points)
        .zip(mins)
        .map(|((value, point), min_principal)| StateRow { value, point, min_principal })
        .collect())
}
