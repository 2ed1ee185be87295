use crate::error::{config, Result};
use crate::linalg::{SMat, SVec};
use crate::scalar::Real;
use crate::sphere::{gauss_legendre, sphere_area};

/// Grid layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridMode {
    /// Latitude–longitude grid on `S²`.
    Full2D { n_theta: usize, n_phi: usize },
    /// Polar-angle grid on `S^n` for fields invariant under rotations fixing `e₁`.
    Axisymmetric { n: usize, n_theta: usize },
}

/// Accuracy of the finite-difference stencils used by [`SphereGrid::coord_derivs`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StencilOrder {
    /// Three-point stencils, exact on harmonics of degree ≤ 1.
    #[default]
    Second,
    /// Five-point stencils, exact on harmonics of degree ≤ 2 along each coordinate line.
    Fourth,
}

pub const MIN_N_THETA: usize = 16;
pub const MIN_N_PHI: usize = 32;

/// Coordinate derivatives of a field at one node (`p` = azimuth).
#[derive(Clone, Copy, Debug, Default)]
pub struct CoordDerivs<T> {
    pub t: T,
    pub p: T,
    pub tt: T,
    pub pp: T,
    pub tp: T,
}

/// Structured grid on `S^n`.
///
/// Latitudes sit at cell centers `θᵢ = (i + ½)Δθ`, so no node lies on a pole.
/// Stencils that reach across a pole use the reflected node: the value at
/// `(−θ, φ)` is the value at `(θ, φ + π)` (Full2D), or at `θ` itself
/// (Axisymmetric). Second differences use `(f₊ − 2f + f₋) / (2(1 − cos Δ))`
/// and first differences `(f₊ − f₋) / (2 sin Δ)`: both second order, and exact
/// on `cos` and `sin` of the coordinate, hence on degree ≤ 1 harmonics.
/// [`StencilOrder::Fourth`] swaps in five-point stencils that are also exact
/// on `cos 2θ`, `sin 2θ`.
#[derive(Clone, Debug)]
pub struct SphereGrid<T> {
    pub mode: GridMode,
    /// Dimension n of `S^n`.
    pub n: usize,
    pub n_theta: usize,
    /// Number of longitudes (1 in axisymmetric mode).
    pub n_phi: usize,
    pub dtheta: T,
    pub dphi: T,
    pub theta: Vec<T>,
    pub phi: Vec<T>,
    /// Node directions; in axisymmetric mode the representative `(cos θ, sin θ, 0, …)`.
    pub nodes: Vec<SVec<T>>,
    /// Round orthonormal tangent frame per node: `e_θ` first, then `e_φ` or the orbit directions.
    pub frames: Vec<Vec<SVec<T>>>,
    /// Exact cell areas on `S^n`.
    pub weights: Vec<T>,
    pub c1_theta: T,
    pub c2_theta: T,
    pub c1_phi: T,
    pub c2_phi: T,
    pub order: StencilOrder,
    /// First-derivative weights for offsets ±1, ±2.
    d1_theta: [T; 2],
    d1_phi: [T; 2],
    /// Second-derivative weights for offsets 0, ±1, ±2.
    d2_theta: [T; 3],
    d2_phi: [T; 3],
}

fn weights_second<T: Real>(h: T) -> ([T; 2], [T; 3]) {
    let c1 = T::one() / (T::lit(2.0) * h.sin());
    let c2 = T::one() / (T::lit(2.0) * (T::one() - h.cos()));
    ([c1, T::zero()], [-T::lit(2.0) * c2, c2, T::zero()])
}

/// Five-point weights exact on `sin(mθ)`, `cos(mθ)` for `m ≤ 2`.
fn weights_fourth<T: Real>(h: T) -> ([T; 2], [T; 3]) {
    let two = T::lit(2.0);
    let solve = |a11: T, a12: T, a21: T, a22: T, b1: T, b2: T| {
        let det = a11 * a22 - a12 * a21;
        ((b1 * a22 - b2 * a12) / det, (a11 * b2 - a21 * b1) / det)
    };
    let s = |m: T| (m * h).sin();
    let c = |m: T| (m * h).cos();
    let (a, b) = solve(two * s(T::one()), two * s(two), two * s(two), two * s(T::lit(4.0)), T::one(), two);
    let (c1, c2) = solve(
        two * (c(T::one()) - T::one()),
        two * (c(two) - T::one()),
        two * (c(two) - T::one()),
        two * (c(T::lit(4.0)) - T::one()),
        -T::one(),
        -T::lit(4.0),
    );
    ([a, b], [-two * (c1 + c2), c1, c2])
}

impl<T: Real> SphereGrid<T> {
    pub fn new(mode: GridMode) -> Result<Self> {
        match mode {
            GridMode::Full2D { n_theta, n_phi } => {
                if n_theta < MIN_N_THETA || n_phi < MIN_N_PHI || n_phi % 2 != 0 {
                    return config(format!(
                        "Full2D grid needs n_theta >= {MIN_N_THETA} and even n_phi >= {MIN_N_PHI}, got {n_theta}x{n_phi}"
                    ));
                }
            }
            GridMode::Axisymmetric { n, n_theta } => {
                if n_theta < MIN_N_THETA || n < 2 || n + 1 > crate::linalg::MAXD {
                    return config(format!(
                        "axisymmetric grid needs n_theta >= {MIN_N_THETA} and 2 <= n <= 6, got n = {n}, n_theta = {n_theta}"
                    ));
                }
            }
        }
        let (n, n_theta, n_phi) = match mode {
            GridMode::Full2D { n_theta, n_phi } => (2, n_theta, n_phi),
            GridMode::Axisymmetric { n, n_theta } => (n, n_theta, 1),
        };
        let dtheta = T::PI() / T::from_count(n_theta);
        let dphi = T::lit(2.0) * T::PI() / T::from_count(n_phi);
        let theta: Vec<T> = (0..n_theta).map(|i| (T::from_count(i) + T::lit(0.5)) * dtheta).collect();
        let phi: Vec<T> = (0..n_phi).map(|j| T::from_count(j) * dphi).collect();
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut frames = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let (gx, gw) = gauss_legendre::<T>(8);
        let orbit = sphere_area::<T>(n - 1);
        for i in 0..n_theta {
            let th = theta[i];
            let (st, ct) = th.sin_cos();
            let (lo, hi) = (th - dtheta / T::lit(2.0), th + dtheta / T::lit(2.0));
            for j in 0..n_phi {
                match mode {
                    GridMode::Full2D { .. } => {
                        let (sp, cp) = phi[j].sin_cos();
                        nodes.push(SVec::from_slice(&[ct, st * cp, st * sp]));
                        frames.push(vec![
                            SVec::from_slice(&[-st, ct * cp, ct * sp]),
                            SVec::from_slice(&[T::zero(), -sp, cp]),
                        ]);
                        weights.push((lo.cos() - hi.cos()) * dphi);
                    }
                    GridMode::Axisymmetric { .. } => {
                        let mut x = SVec::zeros(n + 1);
                        x[0] = ct;
                        x[1] = st;
                        nodes.push(x);
                        let mut et = SVec::zeros(n + 1);
                        et[0] = -st;
                        et[1] = ct;
                        let mut fr = vec![et];
                        for k in 2..=n {
                            fr.push(SVec::basis(n + 1, k));
                        }
                        frames.push(fr);
                        let half = (hi - lo) / T::lit(2.0);
                        let mid = (hi + lo) / T::lit(2.0);
                        let cell: T = gx
                            .iter()
                            .zip(&gw)
                            .map(|(&x, &w)| w * half * (mid + half * x).sin().powi(n as i32 - 1))
                            .sum();
                        weights.push(orbit * cell);
                    }
                }
            }
        }
        let c1 = |d: T| T::one() / (T::lit(2.0) * d.sin());
        let c2 = |d: T| T::one() / (T::lit(2.0) * (T::one() - d.cos()));
        Ok(SphereGrid {
            mode,
            n,
            n_theta,
            n_phi,
            dtheta,
            dphi,
            theta,
            phi,
            nodes,
            frames,
            weights,
            c1_theta: c1(dtheta),
            c2_theta: c2(dtheta),
            c1_phi: c1(dphi),
            c2_phi: c2(dphi),
            order: StencilOrder::Second,
            d1_theta: weights_second(dtheta).0,
            d2_theta: weights_second(dtheta).1,
            d1_phi: weights_second(dphi).0,
            d2_phi: weights_second(dphi).1,
        })
    }

    /// The same grid with the given stencil order.
    pub fn with_order(mut self, order: StencilOrder) -> Self {
        let pick = |h: T| match order {
            StencilOrder::Second => weights_second(h),
            StencilOrder::Fourth => weights_fourth(h),
        };
        (self.d1_theta, self.d2_theta) = pick(self.dtheta);
        (self.d1_phi, self.d2_phi) = pick(self.dphi);
        self.order = order;
        self
    }

    pub fn full(n_theta: usize, n_phi: usize) -> Result<Self> {
        Self::new(GridMode::Full2D { n_theta, n_phi })
    }

    pub fn axisymmetric(n: usize, n_theta: usize) -> Result<Self> {
        Self::new(GridMode::Axisymmetric { n, n_theta })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_axisymmetric(&self) -> bool {
        matches!(self.mode, GridMode::Axisymmetric { .. })
    }

    /// Same layout and stencil order with every resolution multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Ok(Self::new(match self.mode {
            GridMode::Full2D { n_theta, n_phi } => GridMode::Full2D { n_theta: n_theta * factor, n_phi: n_phi * factor },
            GridMode::Axisymmetric { n, n_theta } => GridMode::Axisymmetric { n, n_theta: n_theta * factor },
        })?
        .with_order(self.order))
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_phi + j
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_phi, idx % self.n_phi)
    }

    /// Neighbor in θ (`up = true` means increasing θ), with the pole reflection.
    #[inline]
    pub fn theta_neighbor(&self, i: usize, j: usize, up: bool) -> usize {
        let half = self.n_phi / 2;
        if up {
            if i + 1 < self.n_theta {
                self.index(i + 1, j)
            } else {
                self.index(i, (j + half) % self.n_phi)
            }
        } else if i > 0 {
            self.index(i - 1, j)
        } else {
            self.index(i, (j + half) % self.n_phi)
        }
    }

    /// Node `s` rows away in θ, reflected across the poles.
    #[inline]
    pub fn theta_offset(&self, i: usize, j: usize, s: isize) -> usize {
        let nt = self.n_theta as isize;
        let ii = i as isize + s;
        let jj = (j + self.n_phi / 2) % self.n_phi;
        if ii < 0 {
            self.index((-1 - ii) as usize, jj)
        } else if ii >= nt {
            self.index((2 * nt - 1 - ii) as usize, jj)
        } else {
            self.index(ii as usize, j)
        }
    }

    #[inline]
    fn phi_offset(&self, i: usize, j: usize, s: isize) -> usize {
        let np = self.n_phi as isize;
        self.index(i, (j as isize + s).rem_euclid(np) as usize)
    }

    #[inline]
    pub fn phi_neighbor(&self, i: usize, j: usize, up: bool) -> usize {
        let np = self.n_phi;
        self.index(i, if up { (j + 1) % np } else { (j + np - 1) % np })
    }

    /// Minimal grid spacing measured on the unit sphere.
    pub fn min_spacing(&self) -> T {
        match self.mode {
            GridMode::Full2D { .. } => self.dtheta.min(self.theta[0].sin() * self.dphi),
            GridMode::Axisymmetric { .. } => self.dtheta,
        }
    }

    /// Coordinate derivatives of the node-ordered field `f` at `idx`.
    pub fn coord_derivs(&self, f: &[T], idx: usize) -> CoordDerivs<T> {
        let (i, j) = self.ij(idx);
        let reach: isize = if self.order == StencilOrder::Fourth { 2 } else { 1 };
        let first = |w: &[T; 2], at: &dyn Fn(isize) -> T| {
            (1..=reach).fold(T::zero(), |acc, s| acc + w[s as usize - 1] * (at(s) - at(-s)))
        };
        let second = |w: &[T; 3], at: &dyn Fn(isize) -> T| {
            (1..=reach).fold(w[0] * at(0), |acc, s| acc + w[s as usize] * (at(s) + at(-s)))
        };
        let along_theta = |s: isize| f[self.theta_offset(i, j, s)];
        let mut d = CoordDerivs {
            t: first(&self.d1_theta, &along_theta),
            tt: second(&self.d2_theta, &along_theta),
            ..Default::default()
        };
        if let GridMode::Full2D { .. } = self.mode {
            let fp_at = |k: usize| {
                let (a, b) = self.ij(k);
                first(&self.d1_phi, &|s| f[self.phi_offset(a, b, s)])
            };
            let along_phi = |s: isize| f[self.phi_offset(i, j, s)];
            d.p = first(&self.d1_phi, &along_phi);
            d.pp = second(&self.d2_phi, &along_phi);
            d.tp = first(&self.d1_theta, &|s| fp_at(self.theta_offset(i, j, s)));
        }
        d
    }

    /// Round-sphere gradient of `f` in the node frame.
    pub fn gradient(&self, f: &[T], idx: usize) -> SVec<T> {
        let d = self.coord_derivs(f, idx);
        let mut g = SVec::zeros(self.n);
        g[0] = d.t;
        if let GridMode::Full2D { .. } = self.mode {
            let (i, _) = self.ij(idx);
            g[1] = d.p / self.theta[i].sin();
        }
        g
    }

    /// Round-sphere covariant Hessian of `f` in the node frame.
    pub fn hessian(&self, f: &[T], idx: usize) -> SMat<T> {
        let d = self.coord_derivs(f, idx);
        self.hessian_from(&d, idx)
    }

    pub fn hessian_from(&self, d: &CoordDerivs<T>, idx: usize) -> SMat<T> {
        let (i, _) = self.ij(idx);
        let (st, ct) = self.theta[i].sin_cos();
        let mut h = SMat::zeros(self.n);
        h[(0, 0)] = d.tt;
        match self.mode {
            GridMode::Full2D { .. } => {
                let off = (d.tp - ct / st * d.p) / st;
                h[(0, 1)] = off;
                h[(1, 0)] = off;
                h[(1, 1)] = d.pp / (st * st) + ct / st * d.t;
            }
            GridMode::Axisymmetric { .. } => {
                for k in 1..self.n {
                    h[(k, k)] = ct / st * d.t;
                }
            }
        }
        h
    }

    /// Laplace–Beltrami of `f` at a node (trace of the Hessian).
    pub fn laplacian(&self, f: &[T], idx: usize) -> T {
        self.hessian(f, idx).trace()
    }

    /// `Σ wᵢ fᵢ`
    pub fn integrate(&self, f: &[T]) -> T {
        self.weights.iter().zip(f).map(|(&w, &v)| w * v).sum()
    }

    /// Samples a function of the direction at every node.
    pub fn sample(&self, f: impl Fn(&SVec<T>) -> T) -> Vec<T> {
        self.nodes.iter().map(f).collect()
    }

    /// Direction of the point with coordinates `(θ, φ)`, valid for any real
    /// θ (negative values reach across the north pole). In axisymmetric mode
    /// φ is ignored and the representative meridian is used.
    pub fn direction(&self, theta: T, phi: T) -> SVec<T> {
        let (st, ct) = theta.sin_cos();
        match self.mode {
            GridMode::Full2D { .. } => {
                let (sp, cp) = phi.sin_cos();
                SVec::from_slice(&[ct, st * cp, st * sp])
            }
            GridMode::Axisymmetric { n, .. } => {
                let mut x = SVec::zeros(n + 1);
                x[0] = ct;
                x[1] = st;
                x
            }
        }
    }

    /// Coordinate tangent vectors `(∂_θ x, ∂_φ x)` at `(θ, φ)` (Full2D), or
    /// `∂_θ x` followed by the unit orbit directions (Axisymmetric).
    pub fn coordinate_vectors(&self, theta: T, phi: T) -> Vec<SVec<T>> {
        let (st, ct) = theta.sin_cos();
        match self.mode {
            GridMode::Full2D { .. } => {
                let (sp, cp) = phi.sin_cos();
                vec![SVec::from_slice(&[-st, ct * cp, ct * sp]), SVec::from_slice(&[T::zero(), -st * sp, st * cp])]
            }
            GridMode::Axisymmetric { n, .. } => {
                let mut et = SVec::zeros(n + 1);
                et[0] = -st;
                et[1] = ct;
                let mut v = vec![et];
                for k in 2..=n {
                    v.push(SVec::basis(n + 1, k));
                }
                v
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn weights_sum_to_sphere_area() {
        let g = SphereGrid::<f64>::full(64, 128).unwrap();
        assert_relative_eq!(g.weights.iter().sum::<f64>(), 4.0 * PI, max_relative = 1e-12);
        let a = SphereGrid::<f64>::axisymmetric(3, 256).unwrap();
        assert_relative_eq!(a.weights.iter().sum::<f64>(), 2.0 * PI * PI, max_relative = 1e-12);
        let a5 = SphereGrid::<f64>::axisymmetric(5, 64).unwrap();
        assert_relative_eq!(a5.weights.iter().sum::<f64>(), PI.powi(3), max_relative = 1e-12);
    }

    #[test]
    fn rejects_small_or_odd_grids() {
        assert!(SphereGrid::<f64>::full(8, 64).is_err());
        assert!(SphereGrid::<f64>::full(32, 33).is_err());
        assert!(SphereGrid::<f64>::axisymmetric(3, 10).is_err());
    }

    #[test]
    fn degree_one_fields_are_exact() {
        let g = SphereGrid::<f64>::full(16, 32).unwrap();
        for v in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.2, -0.3, 0.9]] {
            let v = SVec::from_slice(&v);
            let f = g.sample(|x| x.dot(&v));
            for idx in 0..g.len() {
                let h = g.hessian(&f, idx);
                let want = SMat::identity(2).scale(-f[idx]);
                assert!(h.sub(&want).max_abs() < 1e-11, "node {idx}");
                let grad = g.gradient(&f, idx);
                for a in 0..2 {
                    assert!((grad[a] - g.frames[idx][a].dot(&v)).abs() < 1e-12);
                }
            }
        }
    }

    fn grad_error(g: &SphereGrid<f64>) -> f64 {
        // a field outside the exact class: f = x₂ x₃ + exp(x₁)
        let f = g.sample(|x| x[1] * x[2] + x[0].exp());
        let mut err: f64 = 0.0;
        for idx in 0..g.len() {
            let x = g.nodes[idx];
            let df = SVec::from_slice(&[x[0].exp(), x[2], x[1]]);
            let grad = g.gradient(&f, idx);
            for a in 0..2 {
                err = err.max((grad[a] - g.frames[idx][a].dot(&df)).abs());
            }
        }
        err
    }

    #[test]
    fn gradient_is_second_order() {
        let e1 = grad_error(&SphereGrid::full(32, 64).unwrap());
        let e2 = grad_error(&SphereGrid::full(64, 128).unwrap());
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn laplacian_is_second_order_on_s3_axisymmetric() {
        // Δ_{S³} of exp(x₁) = exp(t)(1 - t²) - 3 t exp(t) with t = x₁
        let err = |nt: usize| {
            let g = SphereGrid::<f64>::axisymmetric(3, nt).unwrap();
            let f = g.sample(|x| x[0].exp());
            (0..g.len())
                .map(|i| {
                    let t = g.nodes[i][0];
                    let exact = t.exp() * (1.0 - t * t) - 3.0 * t * t.exp();
                    (g.laplacian(&f, i) - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let order = (err(64) / err(128)).log2();
        assert!(order > 1.9, "order {order}");
    }

    fn hessian_error(g: &SphereGrid<f64>) -> f64 {
        // Hessian of exp(x₁) on S²: D²f restricted minus ⟨∇f, x⟩ δ
        let f = g.sample(|x| x[0].exp());
        let mut err: f64 = 0.0;
        for idx in 0..g.len() {
            let x = g.nodes[idx];
            let e = x[0].exp();
            let h = g.hessian(&f, idx);
            for a in 0..2 {
                for b in 0..2 {
                    let fa = g.frames[idx][a];
                    let fb = g.frames[idx][b];
                    let want = e * fa[0] * fb[0] - if a == b { e * x[0] } else { 0.0 };
                    err = err.max((h[(a, b)] - want).abs());
                }
            }
        }
        err
    }

    #[test]
    fn fourth_order_stencils() {
        let g = SphereGrid::<f64>::full(16, 32).unwrap().with_order(StencilOrder::Fourth);
        // degree-two fields are exact
        let f = g.sample(|x| x[1] * x[2] + 0.5 * x[0] * x[0] - 0.3 * x[0] * x[1]);
        for idx in 0..g.len() {
            let x = g.nodes[idx];
            let grad3 = SVec::from_slice(&[x[0] - 0.3 * x[1], x[2] - 0.3 * x[0], x[1]]);
            let d2 = SMat::from_fn(3, |a, b| match (a.min(b), a.max(b)) {
                (0, 0) => 1.0,
                (0, 1) => -0.3,
                (1, 2) => 1.0,
                _ => 0.0,
            });
            let h = g.hessian(&f, idx);
            for a in 0..2 {
                for b in 0..2 {
                    let (fa, fb) = (g.frames[idx][a], g.frames[idx][b]);
                    let want = d2.bilinear(&fa, &fb) - if a == b { grad3.dot(&x) } else { 0.0 };
                    assert!((h[(a, b)] - want).abs() < 1e-10, "node {idx}");
                }
            }
        }
        let e1 = hessian_error(&SphereGrid::full(32, 64).unwrap().with_order(StencilOrder::Fourth));
        let e2 = hessian_error(&SphereGrid::full(64, 128).unwrap().with_order(StencilOrder::Fourth));
        assert!((e1 / e2).log2() > 3.7, "{e1} {e2}");
        let s1 = hessian_error(&SphereGrid::full(32, 64).unwrap());
        assert!(e1 < s1 / 10.0);
        let r = SphereGrid::<f64>::axisymmetric(3, 32).unwrap().with_order(StencilOrder::Fourth).refined(2).unwrap();
        assert_eq!((r.n_theta, r.order), (64, StencilOrder::Fourth));
    }
}
