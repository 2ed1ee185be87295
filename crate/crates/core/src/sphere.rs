//! Utilities on the unit sphere: point sets, quadrature rules, tangent frames
//! and a local maximizer.

use crate::error::{numerical, Result};
use crate::linalg::{SMat, SVec};
use crate::scalar::Real;
use rand::Rng;
use rand_distr::StandardNormal;

/// Area of the unit sphere `S^k ⊂ R^{k+1}`.
pub fn sphere_area<T: Real>(k: usize) -> T {
    // |S^0| = 2, |S^1| = 2π, |S^k| = 2π/(k-1) |S^{k-2}|
    let two_pi = T::lit(2.0) * T::PI();
    let mut a = if k % 2 == 0 { T::lit(2.0) } else { two_pi };
    let mut j = if k % 2 == 0 { 0 } else { 1 };
    while j < k {
        j += 2;
        a = a * two_pi / T::from_count(j - 1);
    }
    a
}

/// Spherical Fibonacci point set on `S²`.
pub fn fibonacci_sphere<T: Real>(count: usize) -> Vec<SVec<T>> {
    let golden = T::PI() * (T::lit(3.0) - T::lit(5.0).sqrt());
    (0..count)
        .map(|i| {
            let z = T::one() - T::lit(2.0) * (T::from_count(i) + T::lit(0.5)) / T::from_count(count);
            let r = (T::one() - z * z).max(T::zero()).sqrt();
            let a = golden * T::from_count(i);
            SVec::from_slice(&[z, r * a.cos(), r * a.sin()])
        })
        .collect()
}

/// Deterministic well-spread points on `S^n`: Fibonacci for n = 2, seeded
/// Gaussian samples otherwise.
pub fn spread_points<T: Real>(n: usize, count: usize, seed: u64) -> Vec<SVec<T>> {
    if n == 2 {
        return fibonacci_sphere(count);
    }
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    (0..count).map(|_| random_unit(&mut rng, n)).collect()
}

pub fn random_unit<T: Real, R: Rng>(rng: &mut R, n: usize) -> SVec<T> {
    loop {
        let mut v = SVec::zeros(n + 1);
        for i in 0..=n {
            v[i] = T::lit(rng.sample::<f64, _>(StandardNormal));
        }
        let norm = v.norm();
        if norm > T::lit(1e-6) {
            return v.scale(T::one() / norm);
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    let mut xs = vec![T::zero(); m];
    let mut ws = vec![T::zero(); m];
    for i in 0..(m + 1) / 2 {
        let mut x = (T::PI() * (T::from_count(i) + T::lit(0.75)) / (T::from_count(m) + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (mut p0, mut p1) = (T::one(), x);
            for k in 2..=m {
                let kk = T::from_count(k);
                let p2 = ((T::lit(2.0) * kk - T::one()) * x * p1 - (kk - T::one()) * p0) / kk;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { T::one() } else { p0 };
            dp = T::from_count(m) * (x * pm - pm1) / (x * x - T::one());
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        xs[i] = x;
        xs[m - 1 - i] = -x;
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        ws[i] = w;
        ws[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        xs[m / 2] = T::zero();
    }
    (xs, ws)
}

/// Orthonormal basis of `x^⊥` (x unit), by Gram–Schmidt on the coordinate axes.
pub fn tangent_basis<T: Real>(x: &SVec<T>) -> Vec<SVec<T>> {
    let d = x.n;
    let mut out: Vec<SVec<T>> = Vec::with_capacity(d - 1);
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by(|&i, &j| x[i].abs().partial_cmp(&x[j].abs()).unwrap());
    for &ax in &axes {
        if out.len() == d - 1 {
            break;
        }
        let mut v = SVec::basis(d, ax);
        v = v.axpy(-v.dot(x), x);
        for u in &out {
            v = v.axpy(-v.dot(u), u);
        }
        let nv = v.norm();
        if nv > T::lit(1e-3) {
            out.push(v.scale(T::one() / nv));
        }
    }
    out
}

/// Local maximization of a smooth function on `S^n` starting at `x0`, by
/// Newton steps in tangent coordinates with finite-difference derivatives and
/// a backtracking safeguard. Returns the maximizer and maximum.
pub fn maximize_on_sphere<T: Real>(
    f: impl Fn(&SVec<T>) -> T,
    x0: &SVec<T>,
    grad_tol: T,
) -> Result<(SVec<T>, T)> {
    let d = x0.n;
    let n = d - 1;
    let h = T::lit(1e-4).max(T::epsilon().powf(T::lit(0.25)));
    let mut x = x0.normalized();
    let mut fx = f(&x);
    let chart = |x: &SVec<T>, basis: &[SVec<T>], u: &[T]| {
        let mut y = *x;
        for (k, b) in basis.iter().enumerate() {
            y = y.axpy(u[k], b);
        }
        y.normalized()
    };
    for _ in 0..200 {
        let basis = tangent_basis(&x);
        let mut g = vec![T::zero(); n];
        let mut hess = SMat::zeros(n);
        let eval = |u: &[T]| f(&chart(&x, &basis, u));
        let mut u = vec![T::zero(); n];
        for a in 0..n {
            u[a] = h;
            let fp = eval(&u);
            u[a] = -h;
            let fm = eval(&u);
            u[a] = T::zero();
            g[a] = (fp - fm) / (T::lit(2.0) * h);
            hess[(a, a)] = (fp - T::lit(2.0) * fx + fm) / (h * h);
        }
        for a in 0..n {
            for b in 0..a {
                let mut v = vec![T::zero(); n];
                let mut acc = T::zero();
                for (sa, sb, sgn) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    v[a] = T::lit(sa) * h;
                    v[b] = T::lit(sb) * h;
                    acc += T::lit(sgn) * eval(&v);
                }
                let hab = acc / (T::lit(4.0) * h * h);
                hess[(a, b)] = hab;
                hess[(b, a)] = hab;
            }
        }
        let gnorm = g.iter().map(|&v| v * v).sum::<T>().sqrt();
        if gnorm <= grad_tol * fx.abs().max(T::one()) {
            return Ok((x, fx));
        }
        // Newton direction on the negated Hessian when it is definite, else gradient.
        let neg = hess.scale(-T::one());
        let step: Vec<T> = match neg.cholesky() {
            Ok(l) => {
                let li = l.lower_inverse();
                let inv = li.transpose().mul(&li);
                let gv = SVec::from_slice(&g);
                inv.mul_vec(&gv).as_slice().to_vec()
            }
            Err(_) => g.clone(),
        };
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<T> = step.iter().map(|&s| s * t).collect();
            let y = chart(&x, &basis, &trial);
            let fy = f(&y);
            if fy >= fx {
                x = y;
                fx = fy;
                accepted = true;
                break;
            }
            t = t * T::lit(0.5);
        }
        if !accepted {
            // No ascent possible at this resolution: accept as converged when the
            // gradient is at the finite-difference noise level.
            if gnorm <= T::lit(1e-6) * fx.abs().max(T::one()) {
                return Ok((x, fx));
            }
            return numerical("sphere maximization stalled");
        }
    }
    numerical("sphere maximization did not converge")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area::<f64>(1), 2.0 * std::f64::consts::PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_area::<f64>(2), 4.0 * std::f64::consts::PI, epsilon = 1e-14);
        let pi = std::f64::consts::PI;
        assert_relative_eq!(sphere_area::<f64>(3), 2.0 * pi * pi, epsilon = 1e-13);
        assert_relative_eq!(sphere_area::<f64>(4), 8.0 * pi * pi / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre::<f64>(5);
        // exact through degree 9
        let i8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_relative_eq!(i8, 2.0 / 9.0, epsilon = 1e-14);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn fibonacci_points_are_unit() {
        for p in fibonacci_sphere::<f64>(100) {
            assert_relative_eq!(p.norm(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn maximizer_finds_linear_peak() {
        let v = SVec::from_slice(&[0.3, -0.5, 0.81]).normalized();
        let x0 = SVec::from_slice(&[1.0, 0.0, 0.0]);
        let (x, fx) = maximize_on_sphere(|y: &SVec<f64>| y.dot(&v), &x0, 1e-10).unwrap();
        assert_relative_eq!(fx, 1.0, epsilon = 1e-12);
        assert!(x.sub(&v).norm() < 1e-6);
    }
}
