//! The anisotropy `F`: a positive function on `S^n` whose 1-homogeneous
//! extension has uniformly convex square. Everything about the Wulff shape
//! `W_F` (dual norm, embedding `φ = DF`, the metric `G` and the cubic form `Q`)
//! is derived here from the derivatives of the extension.

pub mod harmonics;
pub mod poly;

use crate::error::{domain, numerical, Result, WulffError};
use crate::linalg::{SMat, SVec, SymEigen};
use crate::scalar::Real;
use crate::sphere::{spread_points, tangent_basis};
pub use harmonics::HarmonicTerm;
use poly::Poly;

/// Shape family of the anisotropy.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `F ≡ 1`; the Wulff shape is the unit ball.
    Round,
    /// `F(x) = √(Σ aᵢ² xᵢ²)`; the Wulff shape is the ellipsoid with these semi-axes.
    Ellipsoid { semi_axes: Vec<f64> },
    /// `F = 1 + ε Σ c Y_lm` on the sphere.
    Harmonic { epsilon: f64, terms: Vec<HarmonicTerm> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    ClosedForm,
    /// Central differences of the extension with base step `step`.
    FiniteDifference { step: f64 },
}

/// Relative admission threshold on the spectrum of `A_F`.
pub const ADMISSION_TOL: f64 = 1e-6;
/// Number of sample directions in the admission test.
pub const ADMISSION_SAMPLES: usize = 10_000;
/// Multistart count for the dual norm maximization.
pub const DUAL_STARTS: usize = 32;

/// Derivatives of the homogeneous extension at a point of `R^{n+1}`.
#[derive(Clone, Debug)]
pub struct Jet<T> {
    pub value: T,
    pub grad: SVec<T>,
    pub hess: SMat<T>,
    /// Row-major `d × d × d` third derivative, present when requested.
    pub third: Option<Vec<T>>,
}

#[derive(Clone, Debug)]
struct DegreeBlock<T> {
    degree: usize,
    p: Poly<T>,
    grad: Vec<Poly<T>>,
    hess: Vec<Poly<T>>,
    third: Vec<Poly<T>>,
}

/// Anisotropy with its derivative machinery. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Anisotropy<T> {
    family: Family,
    n: usize,
    mode: DerivativeMode,
    axes_sq: SVec<T>,
    epsilon: T,
    blocks: Vec<DegreeBlock<T>>,
    lambda_min: T,
    lambda_max: T,
}

/// Point of the Wulff shape with its local tensors.
#[derive(Clone, Debug)]
pub struct WulffPointFrame<T> {
    /// Base direction `x ∈ S^n` (the outer normal of `Σ_F` at `z`).
    pub x: SVec<T>,
    /// `z = φ(x) ∈ Σ_F`.
    pub z: SVec<T>,
    /// `G(z) = ½ D²(F⁰)²(z)`.
    pub g: SMat<T>,
    /// `Q(z) = ½ D³(F⁰)²(z)`, row-major `d³`.
    pub q: Vec<T>,
    /// `G`-orthonormal basis of `T_z Σ_F = x^⊥`.
    pub tangent: Vec<SVec<T>>,
}

impl<T: Real> WulffPointFrame<T> {
    pub fn q_form(&self, u: &SVec<T>, v: &SVec<T>, w: &SVec<T>) -> T {
        contract3(&self.q, u.n, u, v, w)
    }
}

/// `Σ Tᵢⱼₖ uᵢ vⱼ wₖ` for a row-major cube.
pub fn contract3<T: Real>(t: &[T], d: usize, u: &SVec<T>, v: &SVec<T>, w: &SVec<T>) -> T {
    let mut s = T::zero();
    for i in 0..d {
        for j in 0..d {
            let uv = u[i] * v[j];
            if uv == T::zero() {
                continue;
            }
            for k in 0..d {
                s += t[(i * d + j) * d + k] * uv * w[k];
            }
        }
    }
    s
}

/// Derivatives of `r^p` up to third order at `y`.
fn radial_power_jet<T: Real>(y: &SVec<T>, p: T) -> (T, SVec<T>, SMat<T>, Vec<T>) {
    let d = y.n;
    let r2 = y.dot(y);
    let r = r2.sqrt();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let v = r.powf(p);
    let c1 = p * r.powf(p - two);
    let c2 = p * (p - two) * r.powf(p - four);
    let c3 = p * (p - two) * (p - four) * r.powf(p - T::lit(6.0));
    let grad = y.scale(c1);
    let hess = SMat::from_fn(d, |i, j| if i == j { c1 } else { T::zero() } + c2 * y[i] * y[j]);
    let mut third = vec![T::zero(); d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut t = c3 * y[i] * y[j] * y[k];
                if i == j {
                    t += c2 * y[k];
                }
                if i == k {
                    t += c2 * y[j];
                }
                if j == k {
                    t += c2 * y[i];
                }
                third[(i * d + j) * d + k] = t;
            }
        }
    }
    (v, grad, hess, third)
}

impl<T: Real> Anisotropy<T> {
    /// Builds and admits an anisotropy on `S^n`.
    pub fn new(family: Family, n: usize, mode: DerivativeMode) -> Result<Self> {
        if n < 2 || n + 1 > crate::linalg::MAXD {
            return Err(WulffError::Config(format!("dimension n = {n} outside supported range 2..=6")));
        }
        let d = n + 1;
        let mut axes_sq = SVec::from_fn(d, |_| T::one());
        let mut epsilon = T::zero();
        let mut blocks = Vec::new();
        match &family {
            Family::Round => {}
            Family::Ellipsoid { semi_axes } => {
                if semi_axes.len() != d {
                    return Err(WulffError::Config(format!(
                        "ellipsoid needs {d} semi-axes, got {}",
                        semi_axes.len()
                    )));
                }
                if semi_axes.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
                    return Err(WulffError::Config("ellipsoid semi-axes must be positive".into()));
                }
                axes_sq = SVec::from_fn(d, |i| T::lit(semi_axes[i] * semi_axes[i]));
            }
            Family::Harmonic { epsilon: eps, terms } => {
                epsilon = T::lit(*eps);
                let mut by_degree: Vec<(usize, Poly<T>)> = Vec::new();
                for t in terms {
                    let p = harmonics::harmonic_poly::<T>(n, t)?.scale(T::lit(t.coeff));
                    match by_degree.iter_mut().find(|(l, _)| *l == t.l) {
                        Some((_, acc)) => *acc = acc.add(&p),
                        None => by_degree.push((t.l, p)),
                    }
                }
                for (degree, p) in by_degree {
                    let grad: Vec<Poly<T>> = (0..d).map(|i| p.deriv(i)).collect();
                    let hess: Vec<Poly<T>> =
                        (0..d * d).map(|ij| grad[ij / d].deriv(ij % d)).collect();
                    let third: Vec<Poly<T>> =
                        (0..d * d * d).map(|ijk| hess[ijk / d].deriv(ijk % d)).collect();
                    blocks.push(DegreeBlock { degree, p, grad, hess, third });
                }
            }
        }
        let mut aniso = Anisotropy {
            family,
            n,
            mode,
            axes_sq,
            epsilon,
            blocks,
            lambda_min: T::one(),
            lambda_max: T::one(),
        };
        aniso.admit()?;
        Ok(aniso)
    }

    pub fn round(n: usize) -> Self {
        Self::new(Family::Round, n, DerivativeMode::ClosedForm).expect("round anisotropy is admissible")
    }

    pub fn ellipsoid(semi_axes: &[f64]) -> Result<Self> {
        Self::new(
            Family::Ellipsoid { semi_axes: semi_axes.to_vec() },
            semi_axes.len() - 1,
            DerivativeMode::ClosedForm,
        )
    }

    pub fn harmonic(n: usize, epsilon: f64, terms: &[HarmonicTerm]) -> Result<Self> {
        Self::new(Family::Harmonic { epsilon, terms: terms.to_vec() }, n, DerivativeMode::ClosedForm)
    }

    /// Same family and dimension with a different derivative mode.
    pub fn with_mode(&self, mode: DerivativeMode) -> Result<Self> {
        Self::new(self.family.clone(), self.n, mode)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn is_round(&self) -> bool {
        matches!(self.family, Family::Round)
    }

    /// Whether `F` is invariant under rotations fixing `e₁`.
    pub fn is_axisymmetric(&self) -> bool {
        match &self.family {
            Family::Round => true,
            Family::Ellipsoid { semi_axes } => {
                semi_axes[1..].iter().all(|a| (a - semi_axes[1]).abs() <= 1e-14 * semi_axes[1])
            }
            Family::Harmonic { terms, .. } => terms.iter().all(|t| t.is_zonal()),
        }
    }

    /// Extremes of the `A_F` spectrum seen by the admission test.
    pub fn convexity_range(&self) -> (T, T) {
        (self.lambda_min, self.lambda_max)
    }

    fn admit(&mut self) -> Result<()> {
        let pts = spread_points::<T>(self.n, ADMISSION_SAMPLES, 0x5eed);
        let (mut lo, mut hi) = (T::infinity(), T::zero());
        let mut fmin = T::infinity();
        for x in &pts {
            let jet = self.jet(x, 2)?;
            fmin = fmin.min(jet.value);
            let basis = tangent_basis(x);
            let a = restrict(&jet.hess, &basis);
            let e = SymEigen::new(&a);
            lo = lo.min(e.values[0]);
            hi = hi.max(e.values[self.n - 1]);
        }
        if !(fmin > T::zero()) {
            return Err(WulffError::Admissibility(format!("F not positive (min sampled value {fmin:e})")));
        }
        if !(lo > T::lit(ADMISSION_TOL) * hi) {
            return Err(WulffError::Admissibility(format!(
                "A_F not uniformly positive: sampled eigenvalues in [{lo:e}, {hi:e}]"
            )));
        }
        self.lambda_min = lo;
        self.lambda_max = hi;
        Ok(())
    }

    /// Value of the extension at any nonzero `y`.
    pub fn value_ext(&self, y: &SVec<T>) -> T {
        match &self.family {
            Family::Round => y.norm(),
            Family::Ellipsoid { .. } => (0..y.n).map(|i| self.axes_sq[i] * y[i] * y[i]).sum::<T>().sqrt(),
            Family::Harmonic { .. } => {
                let r = y.norm();
                let mut f = r;
                for b in &self.blocks {
                    f += self.epsilon * b.p.eval(y.as_slice()) * r.powi(1 - b.degree as i32);
                }
                f
            }
        }
    }

    /// Derivatives of the extension up to `order` (1, 2 or 3) at `y ≠ 0`.
    pub fn jet(&self, y: &SVec<T>, order: usize) -> Result<Jet<T>> {
        if !(y.norm() > T::zero()) {
            return domain("derivatives of F requested at the origin");
        }
        match self.mode {
            DerivativeMode::ClosedForm => Ok(self.closed_jet(y, order)),
            DerivativeMode::FiniteDifference { step } => self.fd_jet(y, order, T::lit(step)),
        }
    }

    fn closed_jet(&self, y: &SVec<T>, order: usize) -> Jet<T> {
        let d = y.n;
        match &self.family {
            Family::Round | Family::Ellipsoid { .. } => {
                // F² = Σ aᵢ² yᵢ²; Fᵢ = aᵢ²yᵢ/F; Fᵢⱼ = (aᵢ²δᵢⱼ − FᵢFⱼ)/F;
                // Fᵢⱼₖ = −(FᵢⱼFₖ + FᵢₖFⱼ + FⱼₖFᵢ)/F
                let f = self.value_ext(y);
                let grad = SVec::from_fn(d, |i| self.axes_sq[i] * y[i] / f);
                let hess = SMat::from_fn(d, |i, j| {
                    (if i == j { self.axes_sq[i] } else { T::zero() } - grad[i] * grad[j]) / f
                });
                let third = (order >= 3).then(|| {
                    let mut t = vec![T::zero(); d * d * d];
                    for i in 0..d {
                        for j in 0..d {
                            for k in 0..d {
                                t[(i * d + j) * d + k] = -(hess[(i, j)] * grad[k]
                                    + hess[(i, k)] * grad[j]
                                    + hess[(j, k)] * grad[i])
                                    / f;
                            }
                        }
                    }
                    t
                });
                Jet { value: f, grad, hess, third }
            }
            Family::Harmonic { .. } => {
                let (r, rg, rh, rt) = radial_power_jet(y, T::one());
                let mut value = r;
                let mut grad = rg;
                let mut hess = rh;
                let mut third = if order >= 3 { Some(rt) } else { None };
                let ys = y.as_slice();
                for b in &self.blocks {
                    let e = self.epsilon;
                    let (rv, rgr, rhe, rth) = radial_power_jet(y, T::one() - T::from_count(b.degree));
                    let pv = b.p.eval(ys);
                    let pg = SVec::from_fn(d, |i| b.grad[i].eval(ys));
                    let ph = SMat::from_fn(d, |i, j| b.hess[i * d + j].eval(ys));
                    value += e * pv * rv;
                    for i in 0..d {
                        grad[i] += e * (pg[i] * rv + pv * rgr[i]);
                        for j in 0..d {
                            hess[(i, j)] += e
                                * (ph[(i, j)] * rv + pg[i] * rgr[j] + pg[j] * rgr[i] + pv * rhe[(i, j)]);
                        }
                    }
                    if let Some(t) = third.as_mut() {
                        for i in 0..d {
                            for j in 0..d {
                                for k in 0..d {
                                    let idx = (i * d + j) * d + k;
                                    let pt = b.third[idx].eval(ys);
                                    t[idx] += e
                                        * (pt * rv
                                            + ph[(i, j)] * rgr[k]
                                            + ph[(i, k)] * rgr[j]
                                            + ph[(j, k)] * rgr[i]
                                            + pg[i] * rhe[(j, k)]
                                            + pg[j] * rhe[(i, k)]
                                            + pg[k] * rhe[(i, j)]
                                            + pv * rth[idx]);
                                }
                            }
                        }
                    }
                }
                Jet { value, grad, hess, third }
            }
        }
    }

    /// Fourth-order central differences: gradient from values with step `h`,
    /// Hessian from gradients with `10h`, third derivatives from Hessians with `100h`.
    fn fd_jet(&self, y: &SVec<T>, order: usize, h: T) -> Result<Jet<T>> {
        let d = y.n;
        let scale = y.norm();
        let value = self.value_ext(y);
        let grad_fn = |p: &SVec<T>, i: usize| -> T {
            let e = SVec::basis(d, i).scale(h * scale);
            let f = |q: &SVec<T>| self.value_ext(q);
            let (p1, m1) = (f(&p.add(&e)), f(&p.sub(&e)));
            let (p2, m2) = (f(&p.axpy(T::lit(2.0), &e)), f(&p.axpy(T::lit(-2.0), &e)));
            (T::lit(8.0) * (p1 - m1) - (p2 - m2)) / (T::lit(12.0) * h * scale)
        };
        let grad = SVec::from_fn(d, |i| grad_fn(y, i));
        let h2 = h * T::lit(10.0);
        let hess_fn = |p: &SVec<T>, i: usize, j: usize| -> T {
            let e = SVec::basis(d, j).scale(h2 * scale);
            let g = |q: &SVec<T>| grad_fn(q, i);
            let (p1, m1) = (g(&p.add(&e)), g(&p.sub(&e)));
            let (p2, m2) = (g(&p.axpy(T::lit(2.0), &e)), g(&p.axpy(T::lit(-2.0), &e)));
            (T::lit(8.0) * (p1 - m1) - (p2 - m2)) / (T::lit(12.0) * h2 * scale)
        };
        let hess = SMat::from_fn(d, |i, j| hess_fn(y, i, j)).symmetrized();
        let third = if order >= 3 {
            let h3 = h * T::lit(100.0);
            let mut t = vec![T::zero(); d * d * d];
            for k in 0..d {
                let e = SVec::basis(d, k).scale(h3 * scale);
                let hp1 = SMat::from_fn(d, |i, j| hess_fn(&y.add(&e), i, j));
                let hm1 = SMat::from_fn(d, |i, j| hess_fn(&y.sub(&e), i, j));
                let hp2 = SMat::from_fn(d, |i, j| hess_fn(&y.axpy(T::lit(2.0), &e), i, j));
                let hm2 = SMat::from_fn(d, |i, j| hess_fn(&y.axpy(T::lit(-2.0), &e), i, j));
                for i in 0..d {
                    for j in 0..d {
                        t[(i * d + j) * d + k] = (T::lit(8.0) * (hp1[(i, j)] - hm1[(i, j)])
                            - (hp2[(i, j)] - hm2[(i, j)]))
                            / (T::lit(12.0) * h3 * scale);
                    }
                }
            }
            // symmetrize over all index permutations
            let mut s = vec![T::zero(); d * d * d];
            let sixth = T::one() / T::lit(6.0);
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let at = |a: usize, b: usize, c: usize| t[(a * d + b) * d + c];
                        s[(i * d + j) * d + k] = sixth
                            * (at(i, j, k) + at(i, k, j) + at(j, i, k) + at(j, k, i) + at(k, i, j) + at(k, j, i));
                    }
                }
            }
            Some(s)
        } else {
            None
        };
        Ok(Jet { value, grad, hess, third })
    }

    fn check_unit(&self, x: &SVec<T>) -> Result<()> {
        if x.n != self.n + 1 {
            return domain(format!("expected a vector in R^{}, got length {}", self.n + 1, x.n));
        }
        let err = (x.norm() - T::one()).abs();
        if !(err <= T::lit(1e-12).max(T::epsilon() * T::lit(8.0))) {
            return domain(format!("input is not a unit vector (| |x| - 1 | = {err:e})"));
        }
        Ok(())
    }

    /// `F(x)` for unit `x`.
    pub fn eval_support(&self, x: &SVec<T>) -> Result<T> {
        self.check_unit(x)?;
        Ok(self.value_ext(x))
    }

    /// `F⁰(z) = sup ⟨x, z⟩ / F(x)`.
    pub fn dual_norm(&self, z: &SVec<T>) -> Result<T> {
        let nz = z.norm();
        if !(nz > T::zero()) {
            return domain("dual norm of the zero vector");
        }
        match &self.family {
            Family::Round => Ok(nz),
            Family::Ellipsoid { .. } => Ok((0..z.n).map(|i| z[i] * z[i] / self.axes_sq[i]).sum::<T>().sqrt()),
            Family::Harmonic { .. } => {
                let (_, v) = self.dual_maximizer(&z.scale(T::one() / nz))?;
                Ok(v * nz)
            }
        }
    }

    /// Maximizer and value of `⟨x, u⟩ / F(x)` over the sphere, for unit `u`.
    pub fn dual_maximizer(&self, u: &SVec<T>) -> Result<(SVec<T>, T)> {
        let starts = spread_points::<T>(self.n, DUAL_STARTS, 0xd0a1);
        let obj = |x: &SVec<T>| x.dot(u) / self.value_ext(x);
        // screen the multistart set, then polish the most promising candidates
        let mut ranked: Vec<(T, SVec<T>)> = starts.iter().map(|x| (obj(x), *x)).collect();
        ranked.push((obj(u), *u));
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut best: Option<(SVec<T>, T)> = None;
        for (_, x0) in ranked.iter().take(4) {
            if let Ok((x, v)) = self.dual_newton(u, x0) {
                if best.as_ref().map_or(true, |b| v > b.1) {
                    best = Some((x, v));
                }
            }
        }
        best.ok_or_else(|| WulffError::Numerical("dual norm maximization failed from every start".into()))
    }

    /// Riemannian Newton ascent for `f(x) = ⟨x,u⟩/F(x)` with analytic
    /// derivatives and a gradient-step fallback.
    fn dual_newton(&self, u: &SVec<T>, x0: &SVec<T>) -> Result<(SVec<T>, T)> {
        let d = self.n + 1;
        let mut x = x0.normalized();
        let tol = T::lit(1e-10).max(T::epsilon() * T::lit(64.0));
        for _ in 0..100 {
            let jet = self.jet(&x, 2)?;
            let f = jet.value;
            let xu = x.dot(u);
            let val = xu / f;
            // Euclidean gradient of the 0-homogeneous objective is tangent.
            let g = u.scale(T::one() / f).axpy(-xu / (f * f), &jet.grad);
            let basis = tangent_basis(&x);
            let gt = SVec::from_fn(self.n, |a| basis[a].dot(&g));
            if gt.norm() <= tol * val.abs().max(T::one()) {
                return Ok((x, val));
            }
            let dg = &jet.grad;
            let hmat = SMat::from_fn(d, |i, j| {
                -(u[i] * dg[j] + dg[i] * u[j]) / (f * f) + T::lit(2.0) * xu * dg[i] * dg[j] / (f * f * f)
                    - xu * jet.hess[(i, j)] / (f * f)
            });
            // Riemannian Hessian: P D²f P − ⟨x, ∇f⟩ P, and ⟨x, ∇f⟩ = 0 here.
            let ht = restrict(&hmat, &basis);
            let neg = ht.scale(-T::one());
            let dir = match neg.cholesky() {
                Ok(l) => {
                    let li = l.lower_inverse();
                    li.transpose().mul(&li).mul_vec(&gt)
                }
                Err(_) => gt,
            };
            let mut t = T::one();
            let mut moved = false;
            for _ in 0..50 {
                let mut y = x;
                for a in 0..self.n {
                    y = y.axpy(t * dir[a], &basis[a]);
                }
                let y = y.normalized();
                let vy = y.dot(u) / self.value_ext(&y);
                if vy >= val {
                    x = y;
                    moved = true;
                    break;
                }
                t = t * T::lit(0.5);
            }
            if !moved {
                if gt.norm() <= T::lit(1e3) * tol * val.abs().max(T::one()) {
                    return Ok((x, val));
                }
                return numerical("dual norm ascent stalled");
            }
        }
        numerical("dual norm ascent did not converge")
    }

    /// `A_F(x) = ∇²F + F g` in the orthonormal tangent frame `basis` at unit `x`.
    pub fn a_matrix_in(&self, x: &SVec<T>, basis: &[SVec<T>]) -> Result<SMat<T>> {
        self.check_unit(x)?;
        let jet = self.jet(x, 2)?;
        Ok(restrict(&jet.hess, basis))
    }

    /// `A_F(x)` in the default tangent frame at `x`, with the admission test applied pointwise.
    pub fn a_matrix(&self, x: &SVec<T>) -> Result<SMat<T>> {
        let a = self.a_matrix_in(x, &tangent_basis(x))?;
        let e = SymEigen::new(&a);
        if !(e.values[0] > T::lit(ADMISSION_TOL) * e.values[self.n - 1]) {
            return Err(WulffError::Admissibility(format!(
                "A_F has eigenvalue {:e} at this point",
                e.values[0]
            )));
        }
        Ok(a)
    }

    /// `φ(x) = F(x)x + ∇^S F(x) = DF(x)`.
    pub fn wulff_embedding(&self, x: &SVec<T>) -> Result<SVec<T>> {
        self.check_unit(x)?;
        Ok(self.jet(x, 1)?.grad)
    }

    /// `G`, `Q` and a `G`-orthonormal tangent basis at `z = φ(x)`, through
    /// Legendre duality: `G(z) = (z zᵀ + F(x) D²F(x))⁻¹` and
    /// `Q(z)(U,V,W) = −D³(½F²)(x/F(x))[GU, GV, GW]`.
    pub fn frame_at(&self, x: &SVec<T>) -> Result<WulffPointFrame<T>> {
        self.check_unit(x)?;
        let d = self.n + 1;
        let jet = self.jet(x, 3)?;
        let f = jet.value;
        let z = jet.grad;
        let m = SMat::outer(&z, &z).add(&jet.hess.scale(f));
        let g = m.inverse()?.symmetrized();
        // D³(½F²) at y = x/F: zᵢH'ⱼₖ + zⱼH'ᵢₖ + zₖH'ᵢⱼ + T'ᵢⱼₖ with H' = F·D²F(x), T' = F²·D³F(x)
        let t3 = jet.third.as_ref().expect("third derivatives requested");
        let hp = jet.hess.scale(f);
        let mut c = vec![T::zero(); d * d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    c[(i * d + j) * d + k] =
                        z[i] * hp[(j, k)] + z[j] * hp[(i, k)] + z[k] * hp[(i, j)] + f * f * t3[(i * d + j) * d + k];
                }
            }
        }
        let q = transform3(&c, d, &g).into_iter().map(|v| -v).collect();
        let mut tangent: Vec<SVec<T>> = Vec::with_capacity(self.n);
        for e in tangent_basis(x) {
            let mut v = e;
            for w in &tangent {
                let c = g.bilinear(&v, w);
                v = v.axpy(-c, w);
            }
            let nv = g.bilinear(&v, &v).sqrt();
            tangent.push(v.scale(T::one() / nv));
        }
        Ok(WulffPointFrame { x: *x, z, g, q, tangent })
    }
}

/// `Eᵀ M E` for an orthonormal family `E` given as vectors.
pub fn restrict<T: Real>(m: &SMat<T>, basis: &[SVec<T>]) -> SMat<T> {
    let k = basis.len();
    let mb: Vec<SVec<T>> = basis.iter().map(|b| m.mul_vec(b)).collect();
    SMat::from_fn(k, |a, b| basis[a].dot(&mb[b])).symmetrized()
}

/// `Σ Cᵢⱼₖ Mᵢₐ Mⱼᵦ Mₖ꜀` for a row-major cube.
pub fn transform3<T: Real>(c: &[T], d: usize, m: &SMat<T>) -> Vec<T> {
    let mut t1 = vec![T::zero(); d * d * d];
    for a in 0..d {
        for j in 0..d {
            for k in 0..d {
                t1[(a * d + j) * d + k] = (0..d).map(|i| c[(i * d + j) * d + k] * m[(i, a)]).sum();
            }
        }
    }
    let mut t2 = vec![T::zero(); d * d * d];
    for a in 0..d {
        for b in 0..d {
            for k in 0..d {
                t2[(a * d + b) * d + k] = (0..d).map(|j| t1[(a * d + j) * d + k] * m[(j, b)]).sum();
            }
        }
    }
    let mut t3 = vec![T::zero(); d * d * d];
    for a in 0..d {
        for b in 0..d {
            for cc in 0..d {
                t3[(a * d + b) * d + cc] = (0..d).map(|k| t2[(a * d + b) * d + k] * m[(k, cc)]).sum();
            }
        }
    }
    t3
}
