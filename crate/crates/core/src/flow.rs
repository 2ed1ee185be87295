//! Time integration of `∂X/∂t = (1 − E_k^{1/k}σ_F)ν_F`.
//!
//! Two parametrizations are supported. A radial graph `X = e^γ x` evolves by
//! `γ_t = ωF(ν)/ρ − Ψ(κ)`; a support state on the Wulff chart evolves by
//! `s_t = 1 − s/Φ(τ[s])`. Both use Heun steps with a CFL-limited step size.

use rayon::prelude::*;

use crate::anisotropy::Anisotropy;
use crate::curvature::{
    graph_geometry, phi_dual, phi_dual_gradient, psi, psi_gradient, support_geometry, umbilicity_defect, GraphGeometry,
    RadialGraphState, SupportGeometry, SupportState, TauMode,
};
use crate::discretization::{SphereGrid, WulffChart};
use crate::error::{config, domain, Result, WulffError};
use crate::functionals::{wulff_volume, FunctionalReport, SurfaceMeasure};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parametrization {
    RadialGraph,
    Support,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub parametrization: Parametrization,
    pub k: usize,
    pub t_max: f64,
    /// Stop once `sup|1 − Ψσ_F|` falls below this.
    pub speed_tol: f64,
    pub max_steps: usize,
    /// CFL safety factor in `(0, 1)`.
    pub cfl: f64,
    /// Steps between recorded diagnostics.
    pub record_stride: usize,
    /// Relative slack for the monotonicity checks between records.
    pub monotonicity_slack: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            parametrization: Parametrization::Support,
            k: 2,
            t_max: 50.0,
            speed_tol: 1e-6,
            max_steps: 1_000_000,
            cfl: 0.5,
            record_stride: 10,
            monotonicity_slack: 1e-8,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k < 1 || self.k > n {
            return config(format!("flow exponent k = {} outside 1..={n}", self.k));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return config(format!("CFL factor {} outside (0, 1)", self.cfl));
        }
        if !(self.t_max > 0.0) || !(self.speed_tol > 0.0) || self.record_stride == 0 || self.max_steps == 0 {
            return config("t_max, speed_tol, record_stride and max_steps must be positive");
        }
        if !(self.monotonicity_slack >= 0.0) {
            return config("monotonicity slack must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowState<T> {
    Radial(RadialGraphState<T>),
    Support(SupportState<T>),
}

impl<T: Real> FlowState<T> {
    pub fn values(&self) -> &[T] {
        match self {
            FlowState::Radial(s) => &s.gamma,
            FlowState::Support(s) => &s.s,
        }
    }

    pub fn time(&self) -> T {
        match self {
            FlowState::Radial(s) => s.t,
            FlowState::Support(s) => s.t,
        }
    }

    fn with_values(&self, v: Vec<T>, t: T) -> Self {
        match self {
            FlowState::Radial(_) => FlowState::Radial(RadialGraphState { gamma: v, t }),
            FlowState::Support(_) => FlowState::Support(SupportState { s: v, t }),
        }
    }
}

/// Right-hand side of one parametrization with what the step control needs.
#[derive(Clone, Debug)]
pub struct Rhs<T> {
    pub values: Vec<T>,
    /// `1 − Ψσ_F` per node.
    pub speed: Vec<T>,
    /// Local diffusion coefficient bound per node.
    pub diffusion: Vec<T>,
}

impl<T: Real> Rhs<T> {
    pub fn sup_speed(&self) -> T {
        self.speed.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }
}

fn convexity_error<T: Real>(node: usize, t: T, value: T) -> WulffError {
    WulffError::ConvexityLost { node, t: t.to_f64_lossy(), value: value.to_f64_lossy() }
}

/// `γ_t = ωF(ν)/ρ − Ψ(κ)` from precomputed graph geometry.
pub fn rhs_radial_from<T: Real>(geom: &GraphGeometry<T>, k: usize, t: T) -> Result<Rhs<T>> {
    if let Some(c) = &geom.convexity {
        return Err(convexity_error(c.node, t, c.value));
    }
    let n = geom.nodes.first().map_or(0, |g| g.kappa.n);
    if k == 0 || k > n {
        return domain(format!("flow exponent k = {k} outside 1..={n}"));
    }
    let out: Vec<(T, T, T)> = geom
        .nodes
        .par_iter()
        .map(|g| {
            let kappa = g.kappa.as_slice();
            let p = psi(kappa, k);
            let dp = psi_gradient(kappa, k).into_iter().fold(T::zero(), T::max);
            (g.omega * g.f_nu / g.rho - p, T::one() - p * g.sigma_f, dp * g.a_max / (g.rho * g.omega))
        })
        .collect();
    Ok(unzip3(out))
}

pub fn rhs_radial<T: Real>(
    aniso: &Anisotropy<T>,
    grid: &SphereGrid<T>,
    state: &RadialGraphState<T>,
    k: usize,
) -> Result<Rhs<T>> {
    rhs_radial_from(&graph_geometry(aniso, grid, state)?, k, state.t)
}

/// `s_t = 1 − s/Φ(τ)` from precomputed support geometry.
pub fn rhs_support_from<T: Real>(geom: &SupportGeometry<T>, s: &[T], k: usize, t: T) -> Result<Rhs<T>> {
    if let Some(c) = &geom.convexity {
        return Err(convexity_error(c.node, t, c.value));
    }
    let out: Vec<(T, T, T)> = geom
        .radii
        .par_iter()
        .zip(s.par_iter())
        .map(|(r, &si)| {
            let phi = phi_dual(r.as_slice(), k)?;
            let dphi = phi_dual_gradient(r.as_slice(), k)?.into_iter().fold(T::zero(), T::max);
            let v = T::one() - si / phi;
            Ok((v, v, si / (phi * phi) * dphi))
        })
        .collect::<Result<_>>()?;
    Ok(unzip3(out))
}

pub fn rhs_support<T: Real>(chart: &WulffChart<T>, state: &SupportState<T>, k: usize, mode: TauMode) -> Result<Rhs<T>> {
    rhs_support_from(&support_geometry(chart, &state.s, mode)?, &state.s, k, state.t)
}

fn unzip3<T>(v: Vec<(T, T, T)>) -> Rhs<T> {
    let mut values = Vec::with_capacity(v.len());
    let mut speed = Vec::with_capacity(v.len());
    let mut diffusion = Vec::with_capacity(v.len());
    for (a, b, c) in v {
        values.push(a);
        speed.push(b);
        diffusion.push(c);
    }
    Rhs { values, speed, diffusion }
}

/// Diagnostics recorded along a run.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowRecord<T> {
    pub step: usize,
    pub t: T,
    pub dt: T,
    pub vol: T,
    /// `V_0..V_{n+1}`.
    pub v: Vec<T>,
    pub i_k: T,
    pub s_min: T,
    pub s_max: T,
    pub kappa_min: T,
    pub kappa_max: T,
    pub minkowski: Vec<T>,
    pub umbilicity: T,
    pub sup_speed: T,
    /// `μ_F`-mean of the anisotropic support function.
    pub r_bar: T,
    /// `‖s − r̄‖` in `L²(μ_F)`.
    pub deviation: T,
    /// `min/max ρ F⁰(x)`: radial graph against the unit Wulff shape.
    pub wulff_ratio: Option<(T, T)>,
}

/// A monotonicity statement that failed between two records.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation<T> {
    pub quantity: &'static str,
    pub step: usize,
    pub before: T,
    pub after: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowStatus<T> {
    Converged,
    Timeout,
    ConvexityLost { node: usize, t: T, value: T },
}

#[derive(Clone, Debug)]
pub struct FlowOutcome<T> {
    pub status: FlowStatus<T>,
    pub records: Vec<FlowRecord<T>>,
    pub final_state: FlowState<T>,
    pub violations: Vec<Violation<T>>,
    pub steps: usize,
    /// Best-fit Wulff scale at the end of the run.
    pub r_bar: T,
    /// `sup|s − r̄|/r̄` at the end of the run.
    pub shape_error: T,
}

impl<T: Real> FlowOutcome<T> {
    pub fn converged(&self) -> bool {
        self.status == FlowStatus::Converged
    }
}

/// Flow driver for a fixed anisotropy, grid and configuration.
pub struct Flow<T> {
    pub config: FlowConfig,
    pub aniso: Anisotropy<T>,
    pub grid: SphereGrid<T>,
    pub chart: Option<WulffChart<T>>,
    pub tau_mode: TauMode,
    pub wulff_volume: T,
    /// Magnitude of the diagonal of the discrete second-order operator.
    stencil_diag: Vec<T>,
    dual_norm: Vec<T>,
}

impl<T: Real> Flow<T> {
    pub fn new(aniso: Anisotropy<T>, grid: SphereGrid<T>, config: FlowConfig) -> Result<Self> {
        config.validate(grid.n)?;
        let wulff_vol = wulff_volume(&aniso, &grid)?;
        let tau_mode = TauMode::for_grid(grid.mode);
        let (chart, stencil_diag, dual_norm) = match config.parametrization {
            Parametrization::Support => {
                let chart = WulffChart::new(grid.clone(), aniso.clone())?;
                let diag = chart.stiffness.diagonal().iter().zip(&chart.mu_weights).map(|(&d, &w)| (d / w).abs()).collect();
                (Some(chart), diag, Vec::new())
            }
            Parametrization::RadialGraph => {
                if grid.is_axisymmetric() && !aniso.is_axisymmetric() {
                    return domain("axisymmetric grids need an axisymmetric anisotropy");
                }
                let mut e = vec![T::zero(); grid.len()];
                let mut diag = Vec::with_capacity(grid.len());
                for i in 0..grid.len() {
                    e[i] = T::one();
                    diag.push(grid.laplacian(&e, i).abs());
                    e[i] = T::zero();
                }
                let dn = grid.nodes.iter().map(|x| aniso.dual_norm(x)).collect::<Result<_>>()?;
                (None, diag, dn)
            }
        };
        Ok(Self { config, aniso, grid, chart, tau_mode, wulff_volume: wulff_vol, stencil_diag, dual_norm })
    }

    fn check_state(&self, state: &FlowState<T>) -> Result<()> {
        let ok = matches!(
            (state, self.config.parametrization),
            (FlowState::Radial(_), Parametrization::RadialGraph) | (FlowState::Support(_), Parametrization::Support)
        );
        if !ok {
            return domain("state parametrization does not match the flow configuration");
        }
        if state.values().len() != self.grid.len() {
            return domain(format!("state has {} values for a grid of {} nodes", state.values().len(), self.grid.len()));
        }
        Ok(())
    }

    pub fn rhs(&self, state: &FlowState<T>) -> Result<Rhs<T>> {
        self.check_state(state)?;
        match state {
            FlowState::Radial(s) => rhs_radial(&self.aniso, &self.grid, s, self.config.k),
            FlowState::Support(s) => rhs_support(self.chart.as_ref().unwrap(), s, self.config.k, self.tau_mode),
        }
    }

    /// CFL step `c / max_i D_i·|L_ii|`.
    pub fn stable_dt(&self, rhs: &Rhs<T>) -> T {
        let rate = rhs.diffusion.iter().zip(&self.stencil_diag).map(|(&d, &l)| d * l).fold(T::zero(), T::max);
        T::lit(self.config.cfl) / rate.max(T::min_positive_value())
    }

    /// Heun step of size `dt` from a precomputed rhs.
    pub fn heun(&self, state: &FlowState<T>, rhs: &Rhs<T>, dt: T) -> Result<FlowState<T>> {
        let u = state.values();
        let t = state.time();
        let pred: Vec<T> = u.iter().zip(&rhs.values).map(|(&a, &f)| a + dt * f).collect();
        let mid = state.with_values(pred, t + dt);
        let f2 = self.rhs(&mid)?;
        let half = T::lit(0.5) * dt;
        let next = u.iter().zip(rhs.values.iter().zip(&f2.values)).map(|(&a, (&f1, &f2))| a + half * (f1 + f2)).collect();
        Ok(state.with_values(next, t + dt))
    }

    /// One explicit Euler step, used for order-of-accuracy comparisons.
    pub fn euler(&self, state: &FlowState<T>, rhs: &Rhs<T>, dt: T) -> FlowState<T> {
        let next = state.values().iter().zip(&rhs.values).map(|(&a, &f)| a + dt * f).collect();
        state.with_values(next, state.time() + dt)
    }

    /// One adaptive step: returns the new state and the step taken.
    pub fn step(&self, state: &FlowState<T>) -> Result<(FlowState<T>, T)> {
        let rhs = self.rhs(state)?;
        self.step_with(state, &rhs)
    }

    fn step_with(&self, state: &FlowState<T>, rhs: &Rhs<T>) -> Result<(FlowState<T>, T)> {
        let dt = self.stable_dt(rhs);
        let scale = state_scale(state);
        if !(dt >= T::lit(1e-12) * scale) {
            return Err(WulffError::Stiffness { t: state.time().to_f64_lossy(), dt: dt.to_f64_lossy() });
        }
        Ok((self.heun(state, rhs, dt)?, dt))
    }

    /// Diagnostics of one state.
    pub fn record(&self, state: &FlowState<T>, rhs: &Rhs<T>, step: usize, dt: T) -> Result<FlowRecord<T>> {
        let n = self.grid.n;
        let k = self.config.k;
        let (measure, sigma, weights, kappa_min, kappa_max, umb, wulff_ratio) = match state {
            FlowState::Radial(s) => {
                let geom = graph_geometry(&self.aniso, &self.grid, s)?;
                let m = SurfaceMeasure::from_graph(&self.grid, &geom)?;
                let kmin = geom.nodes.iter().map(|g| g.kappa[0]).fold(T::infinity(), T::min);
                let kmax = geom.nodes.iter().map(|g| g.kappa[n - 1]).fold(T::neg_infinity(), T::max);
                let ratios: Vec<T> = geom.nodes.iter().zip(&self.dual_norm).map(|(g, &d)| g.rho * d).collect();
                let rmin = ratios.iter().copied().fold(T::infinity(), T::min);
                let rmax = ratios.iter().copied().fold(T::neg_infinity(), T::max);
                let sigma = m.sigma.clone();
                let w = m.weights.clone();
                (m, sigma, w, kmin, kmax, umbilicity_defect(&geom), Some((rmin, rmax)))
            }
            FlowState::Support(s) => {
                let chart = self.chart.as_ref().unwrap();
                let geom = support_geometry(chart, &s.s, self.tau_mode)?;
                let m = SurfaceMeasure::from_support(chart, &geom, &s.s)?;
                let kmin = geom.radii.iter().map(|r| T::one() / r[n - 1]).fold(T::infinity(), T::min);
                let kmax = geom.radii.iter().map(|r| T::one() / r[0]).fold(T::neg_infinity(), T::max);
                (m, s.s.clone(), chart.mu_weights.clone(), kmin, kmax, geom.umbilicity_defect(), None)
            }
        };
        let report = FunctionalReport::new(&measure, self.wulff_volume)?;
        let (r_bar, deviation) = mean_and_deviation(&sigma, &weights);
        Ok(FlowRecord {
            step,
            t: state.time(),
            dt,
            vol: report.vol,
            i_k: if k >= 2 { report.i_k(k) } else { T::nan() },
            v: report.v,
            s_min: sigma.iter().copied().fold(T::infinity(), T::min),
            s_max: sigma.iter().copied().fold(T::neg_infinity(), T::max),
            kappa_min,
            kappa_max,
            minkowski: report.minkowski,
            umbilicity: umb,
            sup_speed: rhs.sup_speed(),
            r_bar,
            deviation,
            wulff_ratio,
        })
    }

    /// Integrates until the speed tolerance, `t_max` or `max_steps`.
    pub fn run(&self, initial: FlowState<T>) -> Result<FlowOutcome<T>> {
        self.run_observed(initial, |_, _| {})
    }

    /// [`Flow::run`] that also hands every recorded state to `observe`.
    pub fn run_observed(
        &self,
        initial: FlowState<T>,
        mut observe: impl FnMut(&FlowState<T>, &FlowRecord<T>),
    ) -> Result<FlowOutcome<T>> {
        self.check_state(&initial)?;
        let cfg = &self.config;
        let tol = T::lit(cfg.speed_tol);
        let t_max = T::lit(cfg.t_max);
        let mut state = initial;
        let mut records = Vec::new();
        let mut violations = Vec::new();
        let mut dt = T::zero();
        let mut step = 0usize;
        let status = loop {
            let rhs = match self.rhs(&state) {
                Ok(r) => r,
                Err(WulffError::ConvexityLost { node, t, value }) => {
                    break FlowStatus::ConvexityLost { node, t: T::lit(t), value: T::lit(value) }
                }
                Err(e) => return Err(e),
            };
            let done = rhs.sup_speed() < tol;
            let out_of_time = state.time() >= t_max || step >= cfg.max_steps;
            if step % cfg.record_stride == 0 || done || out_of_time {
                let rec = self.record(&state, &rhs, step, dt)?;
                if let Some(prev) = records.last() {
                    check_monotone(prev, &rec, cfg, &mut violations);
                }
                observe(&state, &rec);
                records.push(rec);
            }
            if done {
                break FlowStatus::Converged;
            }
            if out_of_time {
                break FlowStatus::Timeout;
            }
            match self.step_with(&state, &rhs) {
                Ok((next, h)) => {
                    state = next;
                    dt = h;
                    step += 1;
                }
                Err(WulffError::ConvexityLost { node, t, value }) => {
                    break FlowStatus::ConvexityLost { node, t: T::lit(t), value: T::lit(value) }
                }
                Err(e) => return Err(e),
            }
        };
        let (r_bar, shape_error) = self.shape_fit(&state)?;
        Ok(FlowOutcome { status, records, final_state: state, violations, steps: step, r_bar, shape_error })
    }

    /// Best-fit scale `r̄` and `sup|s − r̄|/r̄`. On the chart `r̄` is the
    /// `μ_F`-mean of `s`; for radial graphs it is `(Vol/|W_F|)^{1/(n+1)}`
    /// and `s` is `ρF⁰(x)`, the radial function in Wulff units.
    pub fn shape_fit(&self, state: &FlowState<T>) -> Result<(T, T)> {
        match state {
            FlowState::Support(s) => {
                let chart = self.chart.as_ref().unwrap();
                let r = chart.mean(&s.s);
                Ok((r, s.s.iter().fold(T::zero(), |a, &v| a.max((v - r).abs())) / r))
            }
            FlowState::Radial(s) => {
                let n = self.grid.n as i32;
                let vol = self.grid.integrate(&s.radius().iter().map(|r| r.powi(n + 1)).collect::<Vec<_>>())
                    / T::from_count(self.grid.n + 1);
                let r = (vol / self.wulff_volume).powf(T::one() / T::from_count(self.grid.n + 1));
                let dev = s.radius().iter().zip(&self.dual_norm).fold(T::zero(), |a, (&rho, &d)| a.max((rho * d - r).abs()));
                Ok((r, dev / r))
            }
        }
    }
}

fn state_scale<T: Real>(state: &FlowState<T>) -> T {
    match state {
        FlowState::Radial(s) => s.gamma.iter().map(|g| g.exp()).fold(T::zero(), T::max),
        FlowState::Support(s) => s.s.iter().fold(T::zero(), |a, &v| a.max(v.abs())),
    }
}

fn mean_and_deviation<T: Real>(s: &[T], w: &[T]) -> (T, T) {
    let total: T = w.iter().copied().sum();
    let mean = s.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / total;
    let dev = s.iter().zip(w).map(|(&a, &b)| b * (a - mean) * (a - mean)).sum::<T>().sqrt();
    (mean, dev)
}

fn check_monotone<T: Real>(prev: &FlowRecord<T>, next: &FlowRecord<T>, cfg: &FlowConfig, out: &mut Vec<Violation<T>>) {
    let slack = T::lit(cfg.monotonicity_slack);
    let n = prev.v.len() - 2;
    let m = n + 2 - cfg.k;
    let mut push = |quantity: &'static str, before: T, after: T, increasing: bool| {
        let tol = slack * before.abs().max(after.abs());
        let bad = if increasing { after < before - tol } else { after > before + tol };
        if bad {
            out.push(Violation { quantity, step: next.step, before, after });
        }
    };
    push("vol", prev.vol, next.vol, true);
    push("v_n+2-k", prev.v[m], next.v[m], false);
    if cfg.k >= 2 {
        push("i_k", prev.i_k, next.i_k, false);
    }
    push("s_max", prev.s_max, next.s_max, false);
    push("s_min", prev.s_min, next.s_min, true);
    if let (Some(a), Some(b)) = (prev.wulff_ratio, next.wulff_ratio) {
        push("wulff_ratio_min", a.0, b.0, true);
        push("wulff_ratio_max", a.1, b.1, false);
    }
}

#[cfg(test)]
mod tests;
