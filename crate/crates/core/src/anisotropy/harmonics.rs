//! Real spherical harmonics as homogeneous polynomials in the ambient
//! coordinates. The polar axis is `e₁`: `x₁ = cos θ`, and the azimuth is
//! measured in the `(x₂, x₃)` plane.
//!
//! On `S²` all real harmonics `Y_lm` are available (orthonormal, no
//! Condon–Shortley phase). On `S^n`, n ≥ 3, only zonal (m = 0) harmonics,
//! built from Gegenbauer polynomials and normalized to unit L² norm.

use super::poly::Poly;
use crate::error::{config, Result};
use crate::scalar::Real;
use crate::sphere::{gauss_legendre, sphere_area};

/// One term `coeff · Y_lm` of a harmonic expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicTerm {
    pub l: usize,
    pub m: i32,
    pub coeff: f64,
}

impl HarmonicTerm {
    pub fn new(l: usize, m: i32, coeff: f64) -> Self {
        HarmonicTerm { l, m, coeff }
    }

    pub fn is_zonal(&self) -> bool {
        self.m == 0
    }
}

/// Coefficients (ascending powers) of the Gegenbauer polynomial `C_l^α`.
fn gegenbauer_coeffs(l: usize, alpha: f64) -> Vec<f64> {
    let mut prev = vec![1.0];
    if l == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 2.0 * alpha];
    for k in 2..=l {
        let kf = k as f64;
        let mut next = vec![0.0; k + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * (kf + alpha - 1.0) * c / kf;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= (kf + 2.0 * alpha - 2.0) * c / kf;
        }
        prev = cur;
        cur = next;
    }
    cur
}

fn eval_1d(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * t + v)
}

fn factorial_ratio(l: usize, m: usize) -> f64 {
    // (l-m)!/(l+m)!
    ((l - m + 1)..=(l + m)).fold(1.0, |acc, k| acc / k as f64)
}

/// `Σ_k q_k x₁^k r^{d-k}` for a 1D polynomial of definite parity `d`.
fn homogenize<T: Real>(vars: usize, q: &[f64], d: usize) -> Poly<T> {
    let r2 = (0..vars).fold(Poly::zero(vars), |acc, i| acc.add(&Poly::var(vars, i).pow(2)));
    let x1 = Poly::var(vars, 0);
    let mut out = Poly::zero(vars);
    for (k, &c) in q.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        debug_assert!((d - k) % 2 == 0);
        out = out.add(&x1.pow(k).mul(&r2.pow((d - k) / 2)).scale(T::lit(c)));
    }
    out
}

/// L² norm on `S^n` of the zonal function `C_l^α(x₁)`, α = (n−1)/2.
fn zonal_norm(n: usize, coeffs: &[f64]) -> f64 {
    let (xs, ws) = gauss_legendre::<f64>(96);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let integral: f64 = xs
        .iter()
        .zip(&ws)
        .map(|(&x, &w)| {
            let th = half_pi * (x + 1.0);
            let c = eval_1d(coeffs, th.cos());
            w * half_pi * c * c * th.sin().powi(n as i32 - 1)
        })
        .sum();
    (sphere_area::<f64>(n - 1) * integral).sqrt()
}

/// Homogeneous polynomial `r^l Y_lm(x/r)` in `n + 1` variables.
pub fn harmonic_poly<T: Real>(n: usize, term: &HarmonicTerm) -> Result<Poly<T>> {
    let vars = n + 1;
    let l = term.l;
    let m = term.m.unsigned_abs() as usize;
    if m > l {
        return config(format!("harmonic order |m| = {m} exceeds degree l = {l}"));
    }
    if n != 2 && term.m != 0 {
        return config("non-zonal harmonics are only supported on S²");
    }
    if term.m == 0 {
        let alpha = (n as f64 - 1.0) / 2.0;
        let c = gegenbauer_coeffs(l, alpha);
        let norm = zonal_norm(n, &c);
        let q: Vec<f64> = c.iter().map(|v| v / norm).collect();
        return Ok(homogenize(vars, &q, l));
    }
    // d^m P_l, then N_lm √2 Re/Im (x₂ + i x₃)^m · r^{l-m} (d^m P_l)(x₁/r)
    let mut p = gegenbauer_coeffs(l, 0.5);
    for _ in 0..m {
        p = p.iter().enumerate().skip(1).map(|(k, v)| v * k as f64).collect();
    }
    let norm = (2.0 * (2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI) * factorial_ratio(l, m)).sqrt();
    let radial = homogenize::<T>(vars, &p, l - m);
    let x2 = Poly::<T>::var(vars, 1);
    let x3 = Poly::<T>::var(vars, 2);
    let mut azimuthal = Poly::zero(vars);
    let want_real = term.m > 0;
    for j in 0..=m {
        let binom = (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64);
        let sign = match j % 4 {
            0 | 1 => 1.0,
            _ => -1.0,
        };
        let is_real = j % 2 == 0;
        if is_real == want_real {
            azimuthal = azimuthal.add(&x2.pow(m - j).mul(&x3.pow(j)).scale(T::lit(binom * sign)));
        }
    }
    Ok(radial.mul(&azimuthal).scale(T::lit(norm)))
}

/// Independent evaluation of `Y_lm` on `S²` through the associated Legendre
/// three-term recurrence in θ and explicit trigonometric azimuth.
pub fn real_sh_recurrence(l: usize, m: i32, x: &[f64; 3]) -> f64 {
    let ma = m.unsigned_abs() as usize;
    let t = x[0].clamp(-1.0, 1.0);
    let st = (1.0 - t * t).max(0.0).sqrt();
    // P_m^m = (2m-1)!! sin^m θ  (no Condon–Shortley phase)
    let mut pmm = 1.0;
    for k in 1..=ma {
        pmm *= (2 * k - 1) as f64 * st;
    }
    let plm = if l == ma {
        pmm
    } else {
        let mut a = pmm;
        let mut b = t * (2 * ma + 1) as f64 * pmm;
        for ll in (ma + 2)..=l {
            let c = ((2 * ll - 1) as f64 * t * b - (ll + ma - 1) as f64 * a) / (ll - ma) as f64;
            a = b;
            b = c;
        }
        b
    };
    let base = ((2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI) * factorial_ratio(l, ma)).sqrt();
    let phi = x[2].atan2(x[1]);
    match m.cmp(&0) {
        std::cmp::Ordering::Equal => base * plm,
        std::cmp::Ordering::Greater => std::f64::consts::SQRT_2 * base * plm * (ma as f64 * phi).cos(),
        std::cmp::Ordering::Less => std::f64::consts::SQRT_2 * base * plm * (ma as f64 * phi).sin(),
    }
}
