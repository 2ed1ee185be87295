//! Pointwise anisotropic curvature in the two parametrizations.
//!
//! Radial graphs `X = e^γ x` over the grid give the anisotropic principal
//! curvatures `κ` as eigenvalues of `A_F(ν)·dν`, computed in the symmetric
//! gauge `A^{1/2} S A^{1/2}`. Support states `s` on the Wulff chart give the
//! principal radii `τ` as eigenvalues of the tensor `H̄s + sḡ − ½Q(ḡ⁻¹∇s)`
//! against `ḡ`.

use num_traits::{FromPrimitive, Num};
use rayon::prelude::*;

use crate::anisotropy::{contract3, restrict, Anisotropy};
use crate::discretization::{GridMode, SphereGrid, WulffChart};
use crate::error::{domain, numerical, Result};
use crate::linalg::{SMat, SVec, SymEigen};
use crate::scalar::Real;

/// Graph `ρ = e^γ` over the sphere grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGraphState<T> {
    pub gamma: Vec<T>,
    pub t: T,
}

impl<T: Real> RadialGraphState<T> {
    pub fn from_radius(rho: &[T]) -> Result<Self> {
        if let Some(i) = rho.iter().position(|r| !(*r > T::zero())) {
            return domain(format!("radial function not positive at node {i}"));
        }
        Ok(RadialGraphState { gamma: rho.iter().map(|r| r.ln()).collect(), t: T::zero() })
    }

    pub fn radius(&self) -> Vec<T> {
        self.gamma.iter().map(|g| g.exp()).collect()
    }
}

/// Anisotropic support function `s = σ_F` as a field on the Wulff chart.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportState<T> {
    pub s: Vec<T>,
    pub t: T,
}

impl<T: Real> SupportState<T> {
    pub fn new(s: Vec<T>) -> Self {
        SupportState { s, t: T::zero() }
    }

    pub fn constant(len: usize, r: T) -> Self {
        Self::new(vec![r; len])
    }
}

/// First node where convexity failed, with the offending eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvexityLost<T> {
    pub node: usize,
    pub value: T,
}

#[derive(Clone, Debug)]
pub struct GraphNode<T> {
    pub rho: T,
    pub nu: SVec<T>,
    pub omega: T,
    /// Isotropic support value `ρ/ω = ⟨X, ν⟩`.
    pub sigma: T,
    pub f_nu: T,
    /// `ν_F = DF(ν)`.
    pub nu_f: SVec<T>,
    pub sigma_f: T,
    /// Ascending anisotropic principal curvatures.
    pub kappa: SVec<T>,
    /// Ascending isotropic principal curvatures.
    pub kappa_iso: SVec<T>,
    /// Largest eigenvalue of `A_F(ν)` in an orthonormal basis of `ν^⊥`.
    pub a_max: T,
    /// `det A_F(ν)`.
    pub a_det: T,
    /// `F(ν) dA_M` per unit round area: `F(ν) ρⁿ ω`.
    pub mu_density: T,
}

#[derive(Clone, Debug)]
pub struct GraphGeometry<T> {
    pub nodes: Vec<GraphNode<T>>,
    /// Cell measures of `μ_F` on `M`.
    pub mu_weights: Vec<T>,
    pub convexity: Option<ConvexityLost<T>>,
    /// Largest asymmetry of the gauged Weingarten matrix (relative to its size).
    pub max_asymmetry: T,
}

/// Unnormalized elementary symmetric polynomials `e₀..e_m` of `v`.
pub fn elementary_all<N: Num + Copy>(v: &[N]) -> Vec<N> {
    let mut e = vec![N::zero(); v.len() + 1];
    e[0] = N::one();
    for (i, &x) in v.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] = e[j] + e[j - 1] * x;
        }
    }
    e
}

fn binomial<N: Num + Copy + FromPrimitive>(n: usize, k: usize) -> N {
    let mut c = 1u64;
    for i in 0..k {
        c = c * (n - i) as u64 / (i + 1) as u64;
    }
    N::from_u64(c).expect("binomial fits the scalar")
}

/// Normalized `E_k = C(n,k)⁻¹ Σ κ_{i₁}⋯κ_{i_k}` with `n = κ.len()`; `E₀ = 1`.
pub fn elementary_ek<N: Num + Copy + FromPrimitive>(kappa: &[N], k: usize) -> N {
    assert!(k <= kappa.len(), "E_k needs k <= n");
    elementary_all(kappa)[k] / binomial(kappa.len(), k)
}

/// All normalized `E_0..E_n`.
pub fn elementary_normalized<T: Real>(v: &[T]) -> Vec<T> {
    let n = v.len();
    elementary_all(v).into_iter().enumerate().map(|(k, e)| e / binomial::<T>(n, k)).collect()
}

/// `∂E_k/∂v_i` for every `i` (normalized `E_k`).
pub fn elementary_gradient<T: Real>(v: &[T], k: usize) -> Vec<T> {
    let n = v.len();
    if k == 0 {
        return vec![T::zero(); n];
    }
    let c = binomial::<T>(n, k);
    (0..n)
        .map(|i| {
            let rest: Vec<T> = v.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &x)| x).collect();
            elementary_all(&rest)[k - 1] / c
        })
        .collect()
}

/// `Ψ = E_k^{1/k}(κ)`.
pub fn psi<T: Real>(kappa: &[T], k: usize) -> T {
    elementary_ek(kappa, k).powf(T::one() / T::from_count(k))
}

/// `∂Ψ/∂κ_i`.
pub fn psi_gradient<T: Real>(kappa: &[T], k: usize) -> Vec<T> {
    let ek = elementary_ek(kappa, k);
    let kf = T::from_count(k);
    let scale = ek.powf(T::one() / kf - T::one()) / kf;
    elementary_gradient(kappa, k).into_iter().map(|g| g * scale).collect()
}

/// Dual curvature function `Φ(τ) = (E_n(τ)/E_{n−k}(τ))^{1/k}`.
pub fn phi_dual<T: Real>(tau: &[T], k: usize) -> Result<T> {
    let n = tau.len();
    if k == 0 || k > n {
        return domain(format!("phi_dual needs 1 <= k <= n, got k = {k}, n = {n}"));
    }
    if let Some(t) = tau.iter().find(|t| !(**t > T::zero())) {
        return domain(format!("phi_dual needs positive radii, got {t:e}"));
    }
    let e = elementary_normalized(tau);
    Ok((e[n] / e[n - k]).powf(T::one() / T::from_count(k)))
}

/// `∂Φ/∂τ_i`.
pub fn phi_dual_gradient<T: Real>(tau: &[T], k: usize) -> Result<Vec<T>> {
    let n = tau.len();
    let phi = phi_dual(tau, k)?;
    let e = elementary_normalized(tau);
    let gn = elementary_gradient(tau, n);
    let gk = elementary_gradient(tau, n - k);
    let kf = T::from_count(k);
    Ok((0..n).map(|i| phi / kf * (gn[i] / e[n] - gk[i] / e[n - k])).collect())
}

/// `n²(n−1)(E₁² − E₂) = Σ_{i<j}(κ_i − κ_j)²` at one node.
pub fn umbilicity<T: Real>(kappa: &[T]) -> T {
    let n = kappa.len();
    if n < 2 {
        return T::zero();
    }
    let e = elementary_normalized(kappa);
    let nf = T::from_count(n);
    (nf * nf * (nf - T::one()) * (e[1] * e[1] - e[2])).max(T::zero())
}

/// Supremum over nodes of the umbilicity defect.
pub fn umbilicity_defect<T: Real>(geom: &GraphGeometry<T>) -> T {
    geom.nodes.iter().map(|g| umbilicity(g.kappa.as_slice())).fold(T::zero(), T::max)
}

fn node_geometry<T: Real>(
    aniso: &Anisotropy<T>,
    grid: &SphereGrid<T>,
    gamma: &[T],
    idx: usize,
) -> Result<(GraphNode<T>, T)> {
    let n = grid.n;
    let x = grid.nodes[idx];
    let frame = &grid.frames[idx];
    let grad = grid.gradient(gamma, idx);
    let hess = grid.hessian(gamma, idx);
    let rho = gamma[idx].exp();
    let omega = (T::one() + grad.dot(&grad)).sqrt();
    let mut dir = x;
    for (a, e) in frame.iter().enumerate() {
        dir = dir.axpy(-grad[a], e);
    }
    let nu = dir.scale(T::one() / omega);
    // tangent vectors T_a = ρ(γ_a x + e_a), g = ρ²(δ + γγᵀ), h = (ρ/ω)(δ + γγᵀ − ∇²γ)
    let tangents: Vec<SVec<T>> = frame.iter().enumerate().map(|(a, e)| x.scale(grad[a]).add(e).scale(rho)).collect();
    let g = SMat::from_fn(n, |a, b| {
        rho * rho * (if a == b { T::one() } else { T::zero() } + grad[a] * grad[b])
    });
    let h = SMat::from_fn(n, |a, b| {
        rho / omega * (if a == b { T::one() } else { T::zero() } + grad[a] * grad[b] - hess[(a, b)])
    })
    .symmetrized();
    // orthonormal basis E = T L⁻ᵀ of ν^⊥ with g = L Lᵀ; shape operator S_E = L⁻¹ h L⁻ᵀ
    let linv = g.cholesky()?.lower_inverse();
    let basis: Vec<SVec<T>> = (0..n)
        .map(|c| {
            let mut v = SVec::zeros(n + 1);
            for (a, t) in tangents.iter().enumerate() {
                v = v.axpy(linv[(c, a)], t);
            }
            v
        })
        .collect();
    let s_e = h.congruence(&linv);
    let jet = aniso.jet(&nu, 2)?;
    let a_e = restrict(&jet.hess, &basis);
    let a_eig = SymEigen::new(&a_e);
    if !(a_eig.values[0] > T::zero()) {
        return numerical(format!("A_F(ν) not positive definite at node {idx}"));
    }
    let a_half = a_eig.apply(|v| v.sqrt());
    let w = a_half.mul(&s_e).mul(&a_half);
    let scale = w.max_abs().max(T::min_positive_value());
    let asym = w.asymmetry() / scale;
    let kappa = SymEigen::new(&w.symmetrized()).values;
    let kappa_iso = SymEigen::new(&s_e).values;
    let f_nu = jet.value;
    let sigma = rho / omega;
    Ok((
        GraphNode {
            rho,
            nu,
            omega,
            sigma,
            f_nu,
            nu_f: jet.grad,
            sigma_f: sigma / f_nu,
            kappa,
            kappa_iso,
            a_max: a_eig.values[n - 1],
            a_det: a_e.det(),
            mu_density: f_nu * rho.powi(n as i32) * omega,
        },
        asym,
    ))
}

/// Geometry of the radial graph at every node.
pub fn graph_geometry<T: Real>(
    aniso: &Anisotropy<T>,
    grid: &SphereGrid<T>,
    state: &RadialGraphState<T>,
) -> Result<GraphGeometry<T>> {
    if state.gamma.len() != grid.len() {
        return domain(format!("state has {} values for a grid of {} nodes", state.gamma.len(), grid.len()));
    }
    if aniso.dimension() != grid.n {
        return domain("anisotropy and grid dimensions differ");
    }
    let out: Vec<(GraphNode<T>, T)> =
        (0..grid.len()).into_par_iter().map(|i| node_geometry(aniso, grid, &state.gamma, i)).collect::<Result<_>>()?;
    let mut nodes = Vec::with_capacity(out.len());
    let mut max_asymmetry = T::zero();
    let mut convexity = None;
    for (i, (g, a)) in out.into_iter().enumerate() {
        max_asymmetry = max_asymmetry.max(a);
        if convexity.is_none() && !(g.kappa[0] > T::zero()) {
            convexity = Some(ConvexityLost { node: i, value: g.kappa[0] });
        }
        nodes.push(g);
    }
    if max_asymmetry > T::lit(1e-8).max(T::epsilon().sqrt()) {
        return numerical(format!("gauged Weingarten matrix asymmetric by {max_asymmetry:e}"));
    }
    let mu_weights = nodes.iter().zip(&grid.weights).map(|(g, &w)| g.mu_density * w).collect();
    Ok(GraphGeometry { nodes, mu_weights, convexity, max_asymmetry })
}

/// How the trace of `τ` is discretized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TauMode {
    /// Pointwise `H̄s + sḡ − ½Q(ḡ⁻¹∇s)` from the Christoffel stencils.
    Raw,
    /// Raw `τ` with its `ḡ`-trace replaced by `ns + L s` from the flux-form operator.
    Balanced,
}

impl TauMode {
    /// Balanced on axisymmetric grids, raw on Full2D grids (whose polar ring
    /// makes the flux-form operator pointwise inaccurate).
    pub fn for_grid(mode: GridMode) -> Self {
        match mode {
            GridMode::Axisymmetric { .. } => TauMode::Balanced,
            GridMode::Full2D { .. } => TauMode::Raw,
        }
    }
}

/// `τ_ij = ∇̄ᵢ∇̄ⱼs + ḡᵢⱼs − ½Qᵢⱼₖ∇̄ᵏs` at one node, in the round frame.
pub fn tau_at<T: Real>(chart: &WulffChart<T>, s: &[T], idx: usize) -> SMat<T> {
    let n = chart.dimension();
    let nd = &chart.nodes[idx];
    let grad = chart.grid.gradient(s, idx);
    let up = nd.gbar_inv.mul_vec(&grad);
    let h = chart.covariant_hessian(s, idx);
    let mut t = SMat::from_fn(n, |a, b| {
        h[(a, b)] + s[idx] * nd.gbar[(a, b)]
            - T::lit(0.5) * contract3(&nd.q, n, &SVec::basis(n, a), &SVec::basis(n, b), &up)
    });
    t = t.symmetrized();
    t
}

/// Raw `τ` field.
pub fn tau_matrix<T: Real>(chart: &WulffChart<T>, s: &[T]) -> Result<Vec<SMat<T>>> {
    check_len(chart, s)?;
    Ok((0..chart.len()).into_par_iter().map(|i| tau_at(chart, s, i)).collect())
}

/// `τ` with the trace fixed by the flux-form operator.
pub fn tau_balanced<T: Real>(chart: &WulffChart<T>, s: &[T]) -> Result<Vec<SMat<T>>> {
    check_len(chart, s)?;
    let n = T::from_count(chart.dimension());
    let ls = chart.apply_l(s);
    Ok((0..chart.len())
        .into_par_iter()
        .map(|i| {
            let nd = &chart.nodes[i];
            let raw = tau_at(chart, s, i);
            let tr = nd.gbar_inv.frobenius_dot(&raw.sub(&nd.gbar.scale(s[i])));
            raw.axpy((ls[i] - tr) / n, &nd.gbar)
        })
        .collect())
}

pub fn tau_field<T: Real>(chart: &WulffChart<T>, s: &[T], mode: TauMode) -> Result<Vec<SMat<T>>> {
    match mode {
        TauMode::Raw => tau_matrix(chart, s),
        TauMode::Balanced => tau_balanced(chart, s),
    }
}

fn check_len<T: Real>(chart: &WulffChart<T>, s: &[T]) -> Result<()> {
    if s.len() != chart.len() {
        return domain(format!("field has {} values for a chart of {} nodes", s.len(), chart.len()));
    }
    Ok(())
}

/// Ascending eigenvalues of the pencil `(τ, ḡ)` at a node.
pub fn tau_eigenvalues<T: Real>(chart: &WulffChart<T>, idx: usize, tau: &SMat<T>) -> SVec<T> {
    let l = &chart.nodes[idx].gbar_chol_inv;
    SymEigen::new(&tau.congruence(l)).values
}

/// Principal radii at every node with the first convexity failure.
#[derive(Clone, Debug)]
pub struct SupportGeometry<T> {
    pub tau: Vec<SMat<T>>,
    pub radii: Vec<SVec<T>>,
    pub convexity: Option<ConvexityLost<T>>,
}

impl<T: Real> SupportGeometry<T> {
    /// `E_m(τ)` at every node.
    pub fn elementary(&self, m: usize) -> Vec<T> {
        self.radii.iter().map(|r| elementary_ek(r.as_slice(), m)).collect()
    }

    pub fn umbilicity_defect(&self) -> T {
        self.radii
            .iter()
            .map(|r| {
                let k: Vec<T> = r.as_slice().iter().map(|t| T::one() / *t).collect();
                umbilicity(&k)
            })
            .fold(T::zero(), T::max)
    }
}

pub fn support_geometry<T: Real>(chart: &WulffChart<T>, s: &[T], mode: TauMode) -> Result<SupportGeometry<T>> {
    let tau = tau_field(chart, s, mode)?;
    let radii: Vec<SVec<T>> = (0..chart.len()).into_par_iter().map(|i| tau_eigenvalues(chart, i, &tau[i])).collect();
    let convexity = radii
        .iter()
        .enumerate()
        .find(|(_, r)| !(r[0] > T::zero()))
        .map(|(i, r)| ConvexityLost { node: i, value: r[0] });
    Ok(SupportGeometry { tau, radii, convexity })
}

/// Boundary points of the body with support state `s`: the point with outer
/// normal `x` is `h x + ∇h` with `h = sF` and `∇` the round gradient.
pub fn support_points<T: Real>(chart: &WulffChart<T>, s: &[T]) -> Result<Vec<SVec<T>>> {
    let grid = &chart.grid;
    if s.len() != grid.len() {
        return domain(format!("support state has {} values for {} nodes", s.len(), grid.len()));
    }
    let h: Vec<T> = s.iter().zip(&chart.nodes).map(|(&v, nd)| v * nd.f).collect();
    Ok((0..grid.len())
        .into_par_iter()
        .map(|i| {
            let g = grid.gradient(&h, i);
            grid.frames[i].iter().enumerate().fold(grid.nodes[i].scale(h[i]), |p, (a, e)| p.axpy(g[a], e))
        })
        .collect())
}

/// Codazzi residual `max_{jkl} |∇̄ⱼτₖₗ + ½Qₖₗᵖτⱼₚ − ∇̄ₖτⱼₗ − ½Qⱼₗᵖτₖₚ|` per node,
/// on a Full2D chart, in `ḡ`-orthonormal units. Polar rings (whose tensor
/// stencils would cross the pole) are reported as zero.
pub fn codazzi_residual<T: Real>(chart: &WulffChart<T>, s: &[T]) -> Result<Vec<T>> {
    let grid = &chart.grid;
    if !matches!(grid.mode, GridMode::Full2D { .. }) {
        return domain("Codazzi residual is evaluated on Full2D charts");
    }
    let tau = tau_matrix(chart, s)?;
    // coordinate components τ_c = S τ S with S = diag(1, sin θ)
    let coord: Vec<SMat<T>> = (0..grid.len())
        .map(|i| {
            let st = grid.theta[grid.ij(i).0].sin();
            let sc = [T::one(), st];
            SMat::from_fn(2, |a, b| tau[i][(a, b)] * sc[a] * sc[b])
        })
        .collect();
    let out = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            if i == 0 || i + 1 == grid.n_theta {
                return T::zero();
            }
            let nd = &chart.nodes[idx];
            let st = grid.theta[i].sin();
            let sc = [T::one(), st];
            let up = grid.index(i + 1, j);
            let dn = grid.index(i - 1, j);
            let e = grid.phi_neighbor(i, j, true);
            let w = grid.phi_neighbor(i, j, false);
            let gam = |c: usize, a: usize, b: usize| nd.connection[(c * 2 + a) * 2 + b];
            // ∇_m τ_kl in coordinates
            let cov = |m: usize, k: usize, l: usize| {
                let d = if m == 0 {
                    grid.c1_theta * (coord[up][(k, l)] - coord[dn][(k, l)])
                } else {
                    grid.c1_phi * (coord[e][(k, l)] - coord[w][(k, l)])
                };
                let mut v = d;
                for p in 0..2 {
                    v -= gam(p, m, k) * coord[idx][(p, l)] + gam(p, m, l) * coord[idx][(k, p)];
                }
                v
            };
            // Q and ḡ⁻¹ in coordinates
            let q = |a: usize, b: usize, c: usize| nd.q[(a * 2 + b) * 2 + c] * sc[a] * sc[b] * sc[c];
            let ginv = SMat::from_fn(2, |a, b| nd.gbar_inv[(a, b)] / (sc[a] * sc[b]));
            let g = SMat::from_fn(2, |a, b| nd.gbar[(a, b)] * sc[a] * sc[b]);
            let qt = |k: usize, l: usize, jj: usize| {
                let mut v = T::zero();
                for p in 0..2 {
                    for r in 0..2 {
                        v += q(k, l, p) * ginv[(p, r)] * coord[idx][(jj, r)];
                    }
                }
                v
            };
            let mut worst = T::zero();
            for l in 0..2 {
                let r = cov(0, 1, l) + T::lit(0.5) * qt(1, l, 0) - cov(1, 0, l) - T::lit(0.5) * qt(0, l, 1);
                // size in ḡ-orthonormal units: divide by √(g_θθ g_φφ g_ll)
                let norm = (g[(0, 0)] * g[(1, 1)] * g[(l, l)]).sqrt();
                worst = worst.max(r.abs() / norm);
            }
            worst
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests;
