use rayon::prelude::*;

use super::grid::{CoordDerivs, GridMode, SphereGrid};
use crate::anisotropy::{restrict, transform3, Anisotropy};
use crate::error::{config, numerical, Result, WulffError};
use crate::linalg::{Csr, SMat, SVec, SymEigen};
use crate::scalar::Real;
use crate::sphere::gauss_legendre;

/// Pulled-back Wulff geometry at one node, in the round node frame.
#[derive(Clone, Debug)]
pub struct ChartNode<T> {
    pub f: T,
    /// `A_F = ∇²F + F g`.
    pub a: SMat<T>,
    /// `ḡ = A_F / F`.
    pub gbar: SMat<T>,
    pub gbar_inv: SMat<T>,
    /// Inverse of the lower Cholesky factor of `ḡ`.
    pub gbar_chol_inv: SMat<T>,
    /// Cubic form in the frame, row-major `n³`.
    pub q: Vec<T>,
    /// `F det A_F`: density of `μ_F` against the round area.
    pub density: T,
    /// Full2D: coordinate Christoffels `Γ^c_ab` at `[(c·2 + a)·2 + b]`.
    /// Axisymmetric: `[a'/(2a), b'/(2a sin²θ)]` for `a = ḡ_θθ`, `b = ḡ_oo sin²θ`.
    pub connection: Vec<T>,
}

/// Grid together with the Wulff geometry of an anisotropy.
///
/// `mu_weights` are cell integrals of the `μ_F` density. `stiffness` is the
/// symmetric flux-form matrix `M` with `L u = M u / W`, where
/// `L u = (1/m) ∂_a(m ḡ^{ab} ∂_b u)` and `m` is the `μ_F` coordinate density.
#[derive(Clone, Debug)]
pub struct WulffChart<T> {
    pub grid: SphereGrid<T>,
    pub aniso: Anisotropy<T>,
    pub nodes: Vec<ChartNode<T>>,
    pub mu_weights: Vec<T>,
    pub stiffness: Csr<T>,
    /// Axisymmetric only: `ḡ^{oo}/sin²θ` per ring, the orbit part of `L` for sector modes.
    pub orbit_coeff: Vec<T>,
}

const CHRISTOFFEL_STEP: f64 = 1e-3;

/// 4th order central difference of `f` at `0` with step `h`.
fn d1<T: Real>(f: impl Fn(T) -> T, h: T) -> T {
    (f(-h - h) - T::lit(8.0) * f(-h) + T::lit(8.0) * f(h) - f(h + h)) / (T::lit(12.0) * h)
}

impl<T: Real> WulffChart<T> {
    pub fn new(grid: SphereGrid<T>, aniso: Anisotropy<T>) -> Result<Self> {
        let n = grid.n;
        if aniso.dimension() != n {
            return config(format!("grid is on S^{n} but the anisotropy is on S^{}", aniso.dimension()));
        }
        if grid.is_axisymmetric() && !aniso.is_axisymmetric() {
            return config("axisymmetric grid requires an anisotropy invariant under rotations fixing e1");
        }
        let nodes: Vec<ChartNode<T>> =
            (0..grid.len()).into_par_iter().map(|idx| node_data(&grid, &aniso, idx)).collect::<Result<_>>()?;
        let mu_weights: Vec<T> = (0..grid.len()).into_par_iter().map(|idx| cell_measure(&grid, &aniso, idx)).collect::<Result<_>>()?;
        let (stiffness, orbit_coeff) = match grid.mode {
            GridMode::Full2D { .. } => (full_stiffness(&grid, &aniso, &nodes)?, Vec::new()),
            GridMode::Axisymmetric { .. } => axisymmetric_stiffness(&grid, &nodes, &mu_weights)?,
        };
        Ok(WulffChart { grid, aniso, nodes, mu_weights, stiffness, orbit_coeff })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.grid.n
    }

    /// `|Σ_F|_F = ∫ dμ_F`.
    pub fn total_measure(&self) -> T {
        self.mu_weights.iter().copied().sum()
    }

    /// `∫ u dμ_F`
    pub fn integrate(&self, u: &[T]) -> T {
        self.mu_weights.iter().zip(u).map(|(&w, &v)| w * v).sum()
    }

    /// Mean of `u` against `μ_F`.
    pub fn mean(&self, u: &[T]) -> T {
        self.integrate(u) / self.total_measure()
    }

    /// `‖u‖_{L²(μ_F)}`
    pub fn l2_norm(&self, u: &[T]) -> T {
        self.mu_weights.iter().zip(u).map(|(&w, &v)| w * v * v).sum::<T>().sqrt()
    }

    /// Covariant Hessian of `u` for the Levi-Civita connection of `ḡ`, in the node frame.
    pub fn covariant_hessian(&self, u: &[T], idx: usize) -> SMat<T> {
        let d = self.grid.coord_derivs(u, idx);
        self.covariant_hessian_from(&d, idx)
    }

    pub fn covariant_hessian_from(&self, d: &CoordDerivs<T>, idx: usize) -> SMat<T> {
        let n = self.grid.n;
        let node = &self.nodes[idx];
        let (i, _) = self.grid.ij(idx);
        let st = self.grid.theta[i].sin();
        let mut h = SMat::zeros(n);
        match self.grid.mode {
            GridMode::Full2D { .. } => {
                let first = [d.t, d.p];
                let second = [[d.tt, d.tp], [d.tp, d.pp]];
                let scale = [T::one(), T::one() / st];
                for a in 0..2 {
                    for b in 0..2 {
                        let mut v = second[a][b];
                        for c in 0..2 {
                            v -= node.connection[(c * 2 + a) * 2 + b] * first[c];
                        }
                        h[(a, b)] = v * scale[a] * scale[b];
                    }
                }
                h.symmetrized()
            }
            GridMode::Axisymmetric { .. } => {
                h[(0, 0)] = d.tt - node.connection[0] * d.t;
                for k in 1..n {
                    h[(k, k)] = node.connection[1] * d.t;
                }
                h
            }
        }
    }

    /// `L u` in flux form.
    pub fn apply_l(&self, u: &[T]) -> Vec<T> {
        let mu = self.stiffness.apply(u);
        mu.into_iter().zip(&self.mu_weights).map(|(v, &w)| v / w).collect()
    }

    /// `(L u)` at one node.
    pub fn l_at(&self, u: &[T], idx: usize) -> T {
        self.stiffness.row(idx).map(|(j, v)| v * u[j]).sum::<T>() / self.mu_weights[idx]
    }

    /// The translation mode `⟨v, x⟩ / F(x)` sampled at the nodes.
    pub fn translation_mode(&self, v: &SVec<T>) -> Vec<T> {
        self.grid.nodes.iter().zip(&self.nodes).map(|(x, nd)| x.dot(v) / nd.f).collect()
    }
}

fn node_data<T: Real>(grid: &SphereGrid<T>, aniso: &Anisotropy<T>, idx: usize) -> Result<ChartNode<T>> {
    let n = grid.n;
    let x = grid.nodes[idx];
    let basis = &grid.frames[idx];
    let jet = aniso.jet(&x, 2)?;
    let f = jet.value;
    let a = restrict(&jet.hess, basis);
    let ev = SymEigen::new(&a);
    if !(ev.values[0] > T::zero()) {
        return Err(WulffError::Admissibility(format!("A_F is not positive definite at node {idx}")));
    }
    let gbar = a.scale(T::one() / f);
    let gbar_inv = gbar.inverse()?.symmetrized();
    let gbar_chol_inv = gbar.cholesky()?.lower_inverse();
    let density = f * a.det();

    // cubic form: Q(He_a, He_b, He_c) with H = D²F(x)
    let frame = aniso.frame_at(&x)?;
    let d = n + 1;
    let mut m = SMat::zeros(d);
    for (c, e) in basis.iter().enumerate() {
        let col = jet.hess.mul_vec(e);
        for r in 0..d {
            m[(r, c)] = col[r];
        }
    }
    let full = transform3(&frame.q, d, &m);
    let mut q = vec![T::zero(); n * n * n];
    for a_ in 0..n {
        for b in 0..n {
            for c in 0..n {
                q[(a_ * n + b) * n + c] = full[(a_ * d + b) * d + c];
            }
        }
    }

    let (i, j) = grid.ij(idx);
    let (th, ph) = (grid.theta[i], grid.phi[j]);
    let h = T::lit(CHRISTOFFEL_STEP).min(th / T::lit(4.0));
    let connection = match grid.mode {
        GridMode::Full2D { .. } => {
            let metric = |t: T, p: T| -> Result<SMat<T>> {
                let y = grid.direction(t, p);
                let jt = aniso.jet(&y, 2)?;
                Ok(restrict_raw(&jt.hess, &grid.coordinate_vectors(t, p)).scale(T::one() / jt.value))
            };
            let g0 = metric(th, ph)?;
            let ginv = g0.inverse()?;
            let mut dg = [SMat::zeros(2), SMat::zeros(2)];
            for (c, slot) in dg.iter_mut().enumerate() {
                let mut samples = Vec::with_capacity(4);
                for k in [-2.0, -1.0, 1.0, 2.0] {
                    let s = T::lit(k) * h;
                    samples.push(if c == 0 { metric(th + s, ph)? } else { metric(th, ph + s)? });
                }
                *slot = SMat::from_fn(2, |a_, b| {
                    (samples[0][(a_, b)] - T::lit(8.0) * samples[1][(a_, b)] + T::lit(8.0) * samples[2][(a_, b)]
                        - samples[3][(a_, b)])
                        / (T::lit(12.0) * h)
                });
            }
            let mut gam = vec![T::zero(); 8];
            for c in 0..2 {
                for a_ in 0..2 {
                    for b in 0..2 {
                        let mut s = T::zero();
                        for e in 0..2 {
                            s += ginv[(c, e)] * (dg[a_][(b, e)] + dg[b][(a_, e)] - dg[e][(a_, b)]);
                        }
                        gam[(c * 2 + a_) * 2 + b] = s / T::lit(2.0);
                    }
                }
            }
            gam
        }
        GridMode::Axisymmetric { .. } => {
            let comp = |t: T, k: usize| -> T {
                let y = grid.direction(t, T::zero());
                match aniso.jet(&y, 2) {
                    Ok(jt) => {
                        let v = &grid.coordinate_vectors(t, T::zero())[k];
                        let s = if k == 0 { T::one() } else { t.sin() * t.sin() };
                        v.dot(&jt.hess.mul_vec(v)) * s / jt.value
                    }
                    Err(_) => T::nan(),
                }
            };
            let ga = comp(th, 0);
            let da = d1(|s| comp(th + s, 0), h);
            let db = d1(|s| comp(th + s, 1.min(n - 1)), h);
            let c = [da / (T::lit(2.0) * ga), db / (T::lit(2.0) * ga * th.sin() * th.sin())];
            if !(c[0].is_finite() && c[1].is_finite()) {
                return numerical(format!("connection coefficients not finite at ring {i}"));
            }
            c.to_vec()
        }
    };
    Ok(ChartNode { f, a, gbar, gbar_inv, gbar_chol_inv, q, density, connection })
}

/// `Vᵀ M V` for arbitrary (not necessarily orthonormal) vectors.
fn restrict_raw<T: Real>(m: &SMat<T>, v: &[SVec<T>]) -> SMat<T> {
    let k = v.len();
    SMat::from_fn(k, |a, b| v[a].dot(&m.mul_vec(&v[b]))).symmetrized()
}

/// `μ_F` density `F det A_F` at an arbitrary `(θ, φ)`.
fn density_at<T: Real>(grid: &SphereGrid<T>, aniso: &Anisotropy<T>, t: T, p: T) -> Result<T> {
    let y = grid.direction(t, p);
    let jet = aniso.jet(&y, 2)?;
    let (st, _) = t.sin_cos();
    let mut vecs = grid.coordinate_vectors(t, p);
    if let GridMode::Full2D { .. } = grid.mode {
        // unit φ direction; at the pole sin θ → 0 the direction is irrelevant
        vecs[1] = if st.abs() > T::epsilon() { vecs[1].scale(T::one() / st) } else { vecs[1] };
    }
    Ok(jet.value * restrict_raw(&jet.hess, &vecs).det())
}

fn cell_measure<T: Real>(grid: &SphereGrid<T>, aniso: &Anisotropy<T>, idx: usize) -> Result<T> {
    let (i, j) = grid.ij(idx);
    let (th, ph) = (grid.theta[i], grid.phi[j]);
    let two = T::lit(2.0);
    let ht = grid.dtheta / two;
    match grid.mode {
        GridMode::Full2D { .. } => {
            let (gx, gw) = gauss_legendre::<T>(3);
            let hp = grid.dphi / two;
            let mut s = T::zero();
            for (a, wa) in gx.iter().zip(&gw) {
                let t = th + ht * *a;
                for (b, wb) in gx.iter().zip(&gw) {
                    let p = ph + hp * *b;
                    s += *wa * *wb * density_at(grid, aniso, t, p)? * t.sin();
                }
            }
            Ok(s * ht * hp)
        }
        GridMode::Axisymmetric { n, .. } => {
            let (gx, gw) = gauss_legendre::<T>(4);
            let mut s = T::zero();
            for (a, wa) in gx.iter().zip(&gw) {
                let t = th + ht * *a;
                s += *wa * density_at(grid, aniso, t, T::zero())? * t.sin().powi(n as i32 - 1);
            }
            Ok(s * ht * crate::sphere::sphere_area::<T>(n - 1))
        }
    }
}

/// `K = m ḡ^{ab}` in coordinates at `(θ, φ)`: `(K^θθ, K^φφ, K^θφ)`.
fn flux_coeffs<T: Real>(grid: &SphereGrid<T>, aniso: &Anisotropy<T>, t: T, p: T) -> Result<(T, T, T)> {
    let y = grid.direction(t, p);
    let jet = aniso.jet(&y, 2)?;
    let f = jet.value;
    let st = t.sin();
    let (sp, cp) = p.sin_cos();
    let ct = t.cos();
    let et = SVec::from_slice(&[-st, ct * cp, ct * sp]);
    let ep = SVec::from_slice(&[T::zero(), -sp, cp]);
    let a = restrict(&jet.hess, &[et, ep]);
    // m ḡ⁻¹ in frame = F det A · F A⁻¹ = F² adj(A)
    let f2 = f * f;
    let kt = f2 * a[(1, 1)] * st;
    let kp = if st.abs() > T::epsilon() { f2 * a[(0, 0)] / st } else { T::zero() };
    let kx = -f2 * a[(0, 1)];
    Ok((kt, kp, kx))
}

fn full_stiffness<T: Real>(grid: &SphereGrid<T>, aniso: &Anisotropy<T>, nodes: &[ChartNode<T>]) -> Result<Csr<T>> {
    let nt = grid.n_theta;
    let np = grid.n_phi;
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let dt = grid.dtheta;
    let dp = grid.dphi;
    // θ faces (i + ½, j) for i < nt − 1, φ faces (i, j + ½)
    let faces: Vec<(T, T, T)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| -> Result<(T, T, T)> {
            let (i, j) = grid.ij(idx);
            let th = grid.theta[i];
            let ph = grid.phi[j];
            let ct = if i + 1 < nt { flux_coeffs(grid, aniso, th + half * dt, ph)?.0 } else { T::zero() };
            let cp = flux_coeffs(grid, aniso, th, ph + half * dp)?.1;
            let kx = nodes[idx].density * nodes[idx].gbar_inv[(0, 1)];
            Ok((ct, cp, kx))
        })
        .collect::<Result<_>>()?;
    let ctheta = dp / dt.sin();
    let cphi = two * (dt / two).sin() * dp / (two * (T::one() - dp.cos()));
    let cross = dt * dp;
    let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::with_capacity(13); grid.len()];
    let add = |rows: &mut Vec<Vec<(usize, T)>>, a: usize, b: usize, v: T| rows[a].push((b, v));
    for i in 0..nt {
        for j in 0..np {
            let idx = grid.index(i, j);
            let (kt, kp, kx) = faces[idx];
            if i + 1 < nt {
                let up = grid.index(i + 1, j);
                let c = kt * ctheta;
                add(&mut rows, idx, idx, -c);
                add(&mut rows, idx, up, c);
                add(&mut rows, up, up, -c);
                add(&mut rows, up, idx, c);
            }
            let e = grid.phi_neighbor(i, j, true);
            let c = kp * cphi;
            add(&mut rows, idx, idx, -c);
            add(&mut rows, idx, e, c);
            add(&mut rows, e, e, -c);
            add(&mut rows, e, idx, c);
            if kx != T::zero() {
                let dth = [(grid.theta_neighbor(i, j, true), grid.c1_theta), (grid.theta_neighbor(i, j, false), -grid.c1_theta)];
                let dph = [(grid.phi_neighbor(i, j, true), grid.c1_phi), (grid.phi_neighbor(i, j, false), -grid.c1_phi)];
                let w = -cross * kx;
                for &(a, va) in &dth {
                    for &(b, vb) in &dph {
                        add(&mut rows, a, b, w * va * vb);
                        add(&mut rows, b, a, w * va * vb);
                    }
                }
            }
        }
    }
    Ok(Csr::from_rows(rows))
}

fn axisymmetric_stiffness<T: Real>(
    grid: &SphereGrid<T>,
    nodes: &[ChartNode<T>],
    w: &[T],
) -> Result<(Csr<T>, Vec<T>)> {
    let nt = grid.n_theta;
    let nf = T::from_count(grid.n);
    // faces exact on the translation mode t = x₁/F: a_{i+½} = n Σ_{j≤i} W_j t_j / (t_i − t_{i+1})
    let t: Vec<T> = (0..nt).map(|i| grid.nodes[i][0] / nodes[i].f).collect();
    let mut partial = T::zero();
    let mut faces = Vec::with_capacity(nt);
    for i in 0..nt.saturating_sub(1) {
        partial += w[i] * t[i];
        let a = nf * partial / (t[i] - t[i + 1]);
        if !(a > T::zero() && a.is_finite()) {
            return numerical(format!("non-positive flux coefficient at face {i}"));
        }
        faces.push(a);
    }
    let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::with_capacity(3); nt];
    for (i, &a) in faces.iter().enumerate() {
        rows[i].push((i, -a));
        rows[i].push((i + 1, a));
        rows[i + 1].push((i + 1, -a));
        rows[i + 1].push((i, a));
    }
    for (i, r) in rows.iter_mut().enumerate() {
        if r.is_empty() {
            r.push((i, T::zero()));
        }
    }
    let orbit: Vec<T> = (0..nt)
        .map(|i| {
            let st = grid.theta[i].sin();
            nodes[i].gbar_inv[(grid.n - 1, grid.n - 1)] / (st * st)
        })
        .collect();
    Ok((Csr::from_rows(rows), orbit))
}

/// Plain (untuned) axisymmetric face coefficients from the analytic flux
/// `|S^{n−1}| F² sin^{n−1}θ det(A)/A_θθ` at the faces, for comparison with the tuned ones.
pub fn analytic_axisymmetric_faces<T: Real>(chart: &WulffChart<T>) -> Result<Vec<T>> {
    let g = &chart.grid;
    let n = g.n;
    let orbit = crate::sphere::sphere_area::<T>(n - 1);
    let mut out = Vec::new();
    for i in 0..g.n_theta - 1 {
        let t = g.theta[i] + g.dtheta / T::lit(2.0);
        let y = g.direction(t, T::zero());
        let jet = chart.aniso.jet(&y, 2)?;
        let a = restrict(&jet.hess, &g.coordinate_vectors(t, T::zero()));
        let k = jet.value * jet.value * a.det() / a[(0, 0)] * t.sin().powi(n as i32 - 1);
        out.push(orbit * k / g.dtheta);
    }
    Ok(out)
}
