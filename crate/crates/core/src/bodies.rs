//! Convex bodies used as initial data and test inputs, each with a radial
//! function about the origin and a support function.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::anisotropy::{harmonics::harmonic_poly, poly::Poly, Anisotropy, HarmonicTerm};
use crate::curvature::{graph_geometry, RadialGraphState, SupportState};
use crate::discretization::{SphereGrid, WulffChart};
use crate::error::{domain, numerical, Result};
use crate::linalg::{SMat, SVec};
use crate::scalar::Real;
use crate::sphere::{maximize_on_sphere, random_unit};

#[derive(Clone, Debug)]
pub enum ConvexBody<T> {
    Sphere { center: SVec<T>, radius: T },
    /// `{c + R diag(a) y : |y| ≤ 1}`
    Ellipsoid { center: SVec<T>, semi_axes: SVec<T>, rotation: SMat<T> },
    /// Radial function `r(1 + Σ c Y_lm)` about the origin.
    Harmonic { radius: T, terms: Vec<HarmonicTerm>, polys: Vec<(Poly<T>, usize)> },
    /// `c + scale·W_F`.
    Wulff { scale: T, center: SVec<T> },
}

impl<T: Real> ConvexBody<T> {
    pub fn sphere(n: usize, radius: T) -> Self {
        ConvexBody::Sphere { center: SVec::zeros(n + 1), radius }
    }

    pub fn ball_at(center: SVec<T>, radius: T) -> Self {
        ConvexBody::Sphere { center, radius }
    }

    pub fn ellipsoid(semi_axes: &[T]) -> Self {
        let d = semi_axes.len();
        ConvexBody::Ellipsoid { center: SVec::zeros(d), semi_axes: SVec::from_slice(semi_axes), rotation: SMat::identity(d) }
    }

    pub fn wulff(n: usize, scale: T) -> Self {
        ConvexBody::Wulff { scale, center: SVec::zeros(n + 1) }
    }

    pub fn harmonic(n: usize, radius: T, terms: &[HarmonicTerm]) -> Result<Self> {
        let polys = terms
            .iter()
            .map(|t| Ok((harmonic_poly::<T>(n, t)?.scale(T::lit(t.coeff)), t.l)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConvexBody::Harmonic { radius, terms: terms.to_vec(), polys })
    }

    /// Whether the body is invariant under rotations fixing `e₁`.
    pub fn is_axisymmetric(&self) -> bool {
        let off_axis = |c: &SVec<T>| (1..c.n).all(|i| c[i] == T::zero());
        match self {
            ConvexBody::Sphere { center, .. } | ConvexBody::Wulff { center, .. } => off_axis(center),
            ConvexBody::Ellipsoid { center, semi_axes, rotation } => {
                off_axis(center)
                    && rotation.sub(&SMat::identity(center.n)).max_abs() == T::zero()
                    && (2..semi_axes.n).all(|i| semi_axes[i] == semi_axes[1])
            }
            ConvexBody::Harmonic { terms, .. } => terms.iter().all(|t| t.is_zonal()),
        }
    }

    /// `ρ(x)` with `ρ(x)x ∈ ∂Ω`; the origin must be interior.
    pub fn radial(&self, aniso: &Anisotropy<T>, x: &SVec<T>) -> Result<T> {
        let two = T::lit(2.0);
        match self {
            ConvexBody::Sphere { center, radius } => {
                let b = x.dot(center);
                let c = center.dot(center) - *radius * *radius;
                if !(c < T::zero()) {
                    return domain("origin not inside the ball");
                }
                Ok(b + (b * b - c).sqrt())
            }
            ConvexBody::Ellipsoid { center, semi_axes, rotation } => {
                // |diag(1/a) Rᵀ(ρx − c)|² = 1
                let rt = rotation.transpose();
                let u = rt.mul_vec(x);
                let v = rt.mul_vec(center);
                let (mut qa, mut qb, mut qc) = (T::zero(), T::zero(), -T::one());
                for i in 0..x.n {
                    let a2 = semi_axes[i] * semi_axes[i];
                    qa += u[i] * u[i] / a2;
                    qb += -two * u[i] * v[i] / a2;
                    qc += v[i] * v[i] / a2;
                }
                if !(qc < T::zero()) {
                    return domain("origin not inside the ellipsoid");
                }
                Ok((-qb + (qb * qb - T::lit(4.0) * qa * qc).sqrt()) / (two * qa))
            }
            ConvexBody::Harmonic { radius, polys, .. } => {
                let mut s = T::one();
                for (p, _) in polys {
                    s += p.eval(x.as_slice());
                }
                if !(s > T::zero()) {
                    return domain("harmonic body radial function not positive");
                }
                Ok(*radius * s)
            }
            ConvexBody::Wulff { scale, center } => {
                if center.max_abs() == T::zero() {
                    return Ok(*scale / aniso.dual_norm(x)?);
                }
                // F⁰(ρx − c) = scale is monotone in ρ along the ray when the origin is inside
                let g = |r: T| -> Result<T> {
                    let p = x.scale(r).sub(center);
                    Ok(if p.max_abs() == T::zero() { -*scale } else { aniso.dual_norm(&p)? - *scale })
                };
                if !(g(T::zero())? < T::zero()) {
                    return domain("origin not inside the Wulff body");
                }
                let mut hi = *scale;
                while g(hi)? < T::zero() {
                    hi = hi * two;
                }
                let mut lo = T::zero();
                for _ in 0..200 {
                    let mid = (lo + hi) / two;
                    if g(mid)? < T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= T::epsilon() * hi {
                        break;
                    }
                }
                Ok((lo + hi) / two)
            }
        }
    }

    /// `h(u) = max_{p∈Ω} ⟨p, u⟩` for unit `u`.
    pub fn support(&self, aniso: &Anisotropy<T>, u: &SVec<T>) -> Result<T> {
        match self {
            ConvexBody::Sphere { center, radius } => Ok(u.dot(center) + *radius),
            ConvexBody::Ellipsoid { center, semi_axes, rotation } => {
                let w = rotation.transpose().mul_vec(u);
                let q: T = (0..u.n).map(|i| semi_axes[i] * semi_axes[i] * w[i] * w[i]).sum();
                Ok(u.dot(center) + q.sqrt())
            }
            ConvexBody::Wulff { scale, center } => Ok(u.dot(center) + *scale * aniso.eval_support(u)?),
            ConvexBody::Harmonic { .. } => {
                let f = |x: &SVec<T>| self.radial(aniso, x).map(|r| r * x.dot(u)).unwrap_or(T::neg_infinity());
                let (_, v) = maximize_on_sphere(f, u, T::lit(1e-7).max(T::tol()))?;
                Ok(v)
            }
        }
    }

    /// Initial radial state on the grid.
    pub fn radial_state(&self, aniso: &Anisotropy<T>, grid: &SphereGrid<T>) -> Result<RadialGraphState<T>> {
        let rho = grid.nodes.iter().map(|x| self.radial(aniso, x)).collect::<Result<Vec<_>>>()?;
        RadialGraphState::from_radius(&rho)
    }

    /// Initial anisotropic support state `s = h/F` on the chart.
    pub fn support_state(&self, chart: &WulffChart<T>) -> Result<SupportState<T>> {
        let s = chart
            .grid
            .nodes
            .iter()
            .zip(&chart.nodes)
            .map(|(x, nd)| Ok(self.support(&chart.aniso, x)? / nd.f))
            .collect::<Result<Vec<_>>>()?;
        Ok(SupportState::new(s))
    }

    /// Smallest isotropic principal curvature of the radial graph on `grid`.
    pub fn min_curvature(&self, aniso: &Anisotropy<T>, grid: &SphereGrid<T>) -> Result<T> {
        let geom = graph_geometry(aniso, grid, &self.radial_state(aniso, grid)?)?;
        Ok(geom.nodes.iter().map(|g| g.kappa_iso[0]).fold(T::infinity(), T::min))
    }

    /// Largest `|p|` over the body (sampled on `grid`).
    pub fn scale(&self, aniso: &Anisotropy<T>, grid: &SphereGrid<T>) -> Result<T> {
        grid.nodes.iter().map(|x| self.radial(aniso, x)).try_fold(T::zero(), |m, r| r.map(|r| m.max(r)))
    }
}

/// Seeded random convex bodies on `S^n`: rotated, shifted ellipsoids and
/// small harmonic perturbations of balls, each verified convex on `grid`.
pub fn random_bodies<T: Real>(
    aniso: &Anisotropy<T>,
    grid: &SphereGrid<T>,
    count: usize,
    seed: u64,
) -> Result<Vec<ConvexBody<T>>> {
    let n = grid.n;
    let axisym = grid.is_axisymmetric();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 50 * count + 50 {
            return numerical("could not draw enough convex bodies");
        }
        let body = if out.len() % 2 == 0 {
            let mut axes = SVec::zeros(n + 1);
            for i in 0..=n {
                axes[i] = T::lit(rng.gen_range(0.6..1.6));
            }
            let (rotation, center) = if axisym {
                for i in 2..=n {
                    axes[i] = axes[1];
                }
                let mut c = SVec::zeros(n + 1);
                c[0] = T::lit(rng.gen_range(-0.15..0.15));
                (SMat::identity(n + 1), c)
            } else {
                let cols = random_rotation(&mut rng, n + 1);
                let c = random_unit::<T, _>(&mut rng, n).scale(T::lit(rng.gen_range(0.0..0.15)));
                (SMat::from_columns(&cols), c)
            };
            ConvexBody::Ellipsoid { center, semi_axes: axes, rotation }
        } else {
            let mut terms = Vec::new();
            for l in 1..=3usize {
                if axisym || n != 2 {
                    terms.push(HarmonicTerm::new(l, 0, rng.gen_range(-0.12..0.12) / (l * l) as f64));
                } else {
                    for m in -(l as i32)..=(l as i32) {
                        terms.push(HarmonicTerm::new(l, m, rng.gen_range(-0.1..0.1) / (l * l) as f64));
                    }
                }
            }
            ConvexBody::harmonic(n, T::lit(rng.gen_range(0.7..1.4)), &terms)?
        };
        if body.min_curvature(aniso, grid).map(|k| k > T::lit(0.05)).unwrap_or(false) {
            out.push(body);
        }
    }
    Ok(out)
}

fn random_rotation<T: Real, R: Rng>(rng: &mut R, d: usize) -> Vec<SVec<T>> {
    let mut cols: Vec<SVec<T>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v = random_unit::<T, _>(rng, d - 1);
        for c in &cols {
            v = v.axpy(-v.dot(c), c);
        }
        let nv = v.norm();
        if nv > T::lit(1e-3) {
            cols.push(v.scale(T::one() / nv));
        }
    }
    cols
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::fibonacci_sphere;

    #[test]
    fn radial_and_support_agree_for_closed_forms() {
        let a = Anisotropy::<f64>::ellipsoid(&[1.3, 0.9, 1.1]).unwrap();
        let rot = SMat::from_columns(&random_rotation::<f64, _>(&mut ChaCha8Rng::seed_from_u64(3), 3));
        let bodies = [
            ConvexBody::ball_at(SVec::from_slice(&[0.2, -0.1, 0.3]), 1.2),
            ConvexBody::Ellipsoid {
                center: SVec::from_slice(&[0.1, 0.05, -0.1]),
                semi_axes: SVec::from_slice(&[1.5, 0.7, 1.0]),
                rotation: rot,
            },
            ConvexBody::Wulff { scale: 0.8, center: SVec::from_slice(&[0.05, 0.1, 0.0]) },
        ];
        let dirs = fibonacci_sphere::<f64>(400);
        for b in &bodies {
            // support from the boundary points: h(u) = max ⟨ρ(x)x, u⟩ over a dense direction set
            let pts: Vec<SVec<f64>> = fibonacci_sphere::<f64>(20_000)
                .iter()
                .map(|x| x.scale(b.radial(&a, x).unwrap()))
                .collect();
            for u in dirs.iter().step_by(20) {
                let brute = pts.iter().map(|p| p.dot(u)).fold(f64::MIN, f64::max);
                let h = b.support(&a, u).unwrap();
                assert!(h >= brute - 1e-12 && h - brute < 2e-3, "{h} vs {brute}");
            }
        }
    }

    #[test]
    fn harmonic_support_by_maximization() {
        let a = Anisotropy::<f64>::round(2);
        let b = ConvexBody::harmonic(2, 1.0, &[HarmonicTerm::new(2, 0, 0.2), HarmonicTerm::new(3, 1, 0.05)]).unwrap();
        let pts: Vec<SVec<f64>> =
            fibonacci_sphere::<f64>(40_000).iter().map(|x| x.scale(b.radial(&a, x).unwrap())).collect();
        for u in fibonacci_sphere::<f64>(30) {
            let brute = pts.iter().map(|p| p.dot(&u)).fold(f64::MIN, f64::max);
            let h = b.support(&a, &u).unwrap();
            assert!(h >= brute - 1e-10 && h - brute < 1e-3, "{h} vs {brute}");
        }
    }

    #[test]
    fn random_bodies_are_convex_and_seeded() {
        let a = Anisotropy::<f64>::round(2);
        let g = SphereGrid::full(16, 32).unwrap();
        let b1 = random_bodies(&a, &g, 4, 7).unwrap();
        let b2 = random_bodies(&a, &g, 4, 7).unwrap();
        for (p, q) in b1.iter().zip(&b2) {
            let x = g.nodes[5];
            assert_eq!(p.radial(&a, &x).unwrap(), q.radial(&a, &x).unwrap());
            assert!(p.min_curvature(&a, &g).unwrap() > 0.0);
        }
        let ax = SphereGrid::<f64>::axisymmetric(3, 32).unwrap();
        for b in random_bodies(&Anisotropy::round(3), &ax, 4, 1).unwrap() {
            assert!(b.is_axisymmetric());
        }
    }

    #[test]
    fn origin_outside_is_rejected() {
        let a = Anisotropy::<f64>::round(2);
        let b = ConvexBody::ball_at(SVec::from_slice(&[2.0, 0.0, 0.0]), 1.0);
        assert!(b.radial(&a, &SVec::from_slice(&[1.0, 0.0, 0.0])).is_err());
    }
}
