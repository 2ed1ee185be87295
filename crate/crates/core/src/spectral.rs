//! Linearized operator `L = Δ̄ − ½ ḡ^{ij} Q_{ijk} ∇̄ₖ` on the Wulff shape, its
//! first nonzero eigenvalue and exponential decay fits of flow runs.
//!
//! `L` is taken in the flux form assembled by [`WulffChart`]: `L u = M u / W`
//! with `M` symmetric and `W` the `μ_F` cell weights, so the generalized
//! problem `−M φ = λ W φ` is symmetric-definite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::discretization::{GridMode, WulffChart};
use crate::error::{domain, numerical, Result};
use crate::linalg::{conjugate_gradient, dense_symmetric_eigenvalues, dot, pencil_eigen, tridiagonal_eigenvalues, Csr, SMat, MAXD};
use crate::scalar::Real;

/// `L` on the nodes of a chart together with the `μ_F` inner product.
#[derive(Clone, Debug)]
pub struct LinearizedOperator<T> {
    pub chart: WulffChart<T>,
    /// Symmetric flux-form matrix `M`.
    pub stiffness: Csr<T>,
    /// `μ_F` quadrature weights, `⟨φ, ψ⟩ = Σ W φ ψ`.
    pub weights: Vec<T>,
}

/// Assembles `L` from a chart.
pub fn build_operator<T: Real>(chart: &WulffChart<T>) -> Result<LinearizedOperator<T>> {
    if let Some(i) = chart.mu_weights.iter().position(|w| !(*w > T::zero() && w.is_finite())) {
        return numerical(format!("degenerate μ_F weight at node {i}"));
    }
    if chart.stiffness.vals.iter().any(|v| !v.is_finite()) {
        return numerical("non-finite stiffness entry");
    }
    Ok(LinearizedOperator { chart: chart.clone(), stiffness: chart.stiffness.clone(), weights: chart.mu_weights.clone() })
}

impl<T: Real> LinearizedOperator<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn apply(&self, u: &[T]) -> Vec<T> {
        let mu = self.stiffness.apply(u);
        mu.into_iter().zip(&self.weights).map(|(v, &w)| v / w).collect()
    }

    /// `⟨φ, ψ⟩` in `L²(μ_F)`.
    pub fn inner(&self, a: &[T], b: &[T]) -> T {
        a.iter().zip(b).zip(&self.weights).map(|((&x, &y), &w)| w * x * y).sum()
    }

    /// `max |M_ij − M_ji| / max |M_ij|`: asymmetry of the weighted matrix `W L`.
    pub fn weighted_asymmetry(&self) -> T {
        let m = &self.stiffness;
        let mut worst = T::zero();
        let mut scale = T::min_positive_value();
        for i in 0..m.nrows {
            for (j, v) in m.row(i) {
                worst = worst.max((v - m.get(j, i)).abs());
                scale = scale.max(v.abs());
            }
        }
        worst / scale
    }

    /// `max |L 1|`.
    pub fn kernel_residual(&self) -> T {
        let one = vec![T::one(); self.len()];
        self.apply(&one).into_iter().fold(T::zero(), |a, v| a.max(v.abs()))
    }

    /// Symmetric form `W^{-1/2} M W^{-1/2}` as a dense matrix, for small grids.
    pub fn symmetric_dense(&self) -> Vec<Vec<T>> {
        let mut d = self.stiffness.to_dense();
        let s: Vec<T> = self.weights.iter().map(|w| w.sqrt()).collect();
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v / (s[i] * s[j]);
            }
        }
        d
    }

    /// Eigenvalues `−λ` of `L` restricted to the sector of orbit harmonics of
    /// degree `j` (axisymmetric charts only), ascending in `λ`.
    pub fn sector_eigenvalues(&self, j: usize) -> Result<Vec<T>> {
        let n = match self.chart.grid.mode {
            GridMode::Axisymmetric { n, .. } => n,
            GridMode::Full2D { .. } => return domain("sector decomposition needs an axisymmetric chart"),
        };
        let c = T::from_count(j * (j + n - 2));
        let w = &self.weights;
        let m = &self.stiffness;
        let len = self.len();
        let d: Vec<T> = (0..len).map(|i| (m.get(i, i) - c * w[i] * self.chart.orbit_coeff[i]) / w[i]).collect();
        let e: Vec<T> = (0..len.saturating_sub(1)).map(|i| m.get(i, i + 1) / (w[i] * w[i + 1]).sqrt()).collect();
        let mut ev: Vec<T> = tridiagonal_eigenvalues(&d, &e)?.into_iter().map(|v| -v).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(ev)
    }

    /// Smallest `count` eigenvalues `λ` of `−L` with multiplicity, the kernel included.
    pub fn lowest_eigenvalues(&self, count: usize) -> Result<Vec<T>> {
        match self.chart.grid.mode {
            GridMode::Axisymmetric { n, .. } => {
                let mut all = Vec::new();
                for j in 0..=count {
                    let mult = orbit_multiplicity(n - 1, j);
                    for v in self.sector_eigenvalues(j)?.into_iter().take(count) {
                        all.extend(std::iter::repeat(v).take(mult));
                    }
                }
                all.sort_by(|a, b| a.partial_cmp(b).unwrap());
                all.truncate(count);
                Ok(all)
            }
            GridMode::Full2D { .. } => {
                if count == 0 {
                    return Ok(Vec::new());
                }
                if self.len() <= DENSE_LIMIT {
                    let mut ev = self.dense_eigenvalues()?;
                    ev.truncate(count);
                    return Ok(ev);
                }
                self.iterative_lowest(count)
            }
        }
    }

    /// Full spectrum of `−L` from the dense symmetric form, ascending.
    pub fn dense_eigenvalues(&self) -> Result<Vec<T>> {
        let mut ev: Vec<T> = dense_symmetric_eigenvalues(self.symmetric_dense())?.into_iter().map(|v| -v).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(ev)
    }

    /// Lowest `count` eigenvalues of `−L` by shift-invert iteration; the
    /// first entry is the deflated constant mode, reported as zero.
    pub fn iterative_lowest(&self, count: usize) -> Result<Vec<T>> {
        if count > MAXD - 2 {
            return domain(format!("at most {} eigenvalues from the iterative solver", MAXD - 2));
        }
        let mut out = vec![T::zero()];
        out.extend(self.block_inverse_iteration(MAXD, count.saturating_sub(1))?);
        out.truncate(count);
        Ok(out)
    }

    /// Shift-invert subspace iteration for `−M φ = λ W φ` on the `W`-complement
    /// of the constants, with Rayleigh–Ritz on each block.
    fn block_inverse_iteration(&self, block: usize, want: usize) -> Result<Vec<T>> {
        let len = self.len();
        let w = &self.weights;
        let total: T = w.iter().copied().sum();
        let shift = T::lit(0.5);
        let diag = self.stiffness.diagonal();
        let precond: Vec<T> = diag.iter().zip(w).map(|(&d, &wi)| T::one() / (shift * wi - d)).collect();
        let deflate = |u: &mut [T]| {
            let mean = u.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / total;
            u.iter_mut().for_each(|v| *v -= mean);
        };
        let apply = |u: &[T], out: &mut [T]| {
            self.stiffness.mul_vec(u, out);
            for i in 0..len {
                out[i] = shift * w[i] * u[i] - out[i];
            }
        };
        // low-degree ambient polynomials plus seeded noise as the starting block
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nodes = &self.chart.grid.nodes;
        let mut x: Vec<Vec<T>> = (0..block)
            .map(|c| {
                let mut u: Vec<T> = nodes
                    .iter()
                    .map(|p| {
                        let base = match c {
                            0..=2 => p[c],
                            3 => p[0] * p[1],
                            4 => p[1] * p[2],
                            5 => p[2] * p[0],
                            _ => p[0] * p[0] - p[1] * p[1],
                        };
                        let noise: f64 = StandardNormal.sample(&mut rng);
                        base + T::lit(1e-3 * noise)
                    })
                    .collect();
                deflate(&mut u);
                u
            })
            .collect();
        let mut prev: Option<Vec<T>> = None;
        let tol = T::lit(1e-10).max(T::tol());
        for _ in 0..300 {
            let mut y = Vec::with_capacity(block);
            for col in &x {
                let rhs: Vec<T> = col.iter().zip(w).map(|(&a, &b)| a * b).collect();
                let mut sol = col.clone();
                conjugate_gradient(&apply, &precond, |_: &mut [T]| {}, &rhs, &mut sol, T::lit(1e-12).max(T::tol()), 20 * len)?;
                deflate(&mut sol);
                y.push(sol);
            }
            let mut my = vec![T::zero(); len];
            let mut k = SMat::zeros(block);
            let mut g = SMat::zeros(block);
            for a in 0..block {
                self.stiffness.mul_vec(&y[a], &mut my);
                for b in 0..block {
                    k[(b, a)] = -dot(&y[b], &my);
                    g[(b, a)] = self.inner(&y[b], &y[a]);
                }
            }
            let (eig, _) = pencil_eigen(&k.symmetrized(), &g.symmetrized())?;
            let li = g.symmetrized().cholesky()?.lower_inverse();
            // coefficients of the Ritz vectors in the basis y: L⁻ᵀ V
            let coef = li.transpose().mul(&eig.vectors);
            x = (0..block)
                .map(|c| {
                    let mut u = vec![T::zero(); len];
                    for (b, yb) in y.iter().enumerate() {
                        let s = coef[(b, c)];
                        u.iter_mut().zip(yb).for_each(|(ui, &v)| *ui += s * v);
                    }
                    u
                })
                .collect();
            let vals: Vec<T> = (0..block).map(|i| eig.values[i]).collect();
            if let Some(p) = &prev {
                let settled = (0..want).all(|i| (vals[i] - p[i]).abs() <= tol * vals[i].abs().max(T::one()));
                if settled {
                    return Ok(vals[..want].to_vec());
                }
            }
            prev = Some(vals);
        }
        numerical("shift-invert iteration did not converge")
    }
}

/// Largest Full2D grid handled by the dense eigensolver.
pub const DENSE_LIMIT: usize = 1200;

/// Dimension of the degree-`j` spherical harmonics on `S^m`.
fn orbit_multiplicity(m: usize, j: usize) -> usize {
    if m == 1 {
        return if j == 0 { 1 } else { 2 };
    }
    binomial(j + m, m) - if j >= 2 { binomial(j + m - 2, m) } else { 0 }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// First nonzero eigenvalue `λ₁` of `−L`.
pub fn lambda1<T: Real>(op: &LinearizedOperator<T>) -> Result<T> {
    let ev = op.lowest_eigenvalues(2)?;
    let scale = ev[1].abs().max(T::one());
    if ev[0].abs() > T::lit(1e-8) * scale {
        return numerical(format!("constant mode not in the kernel: λ₀ = {}", ev[0]));
    }
    if !(ev[1] > T::lit(1e-8) * scale) {
        return numerical(format!("second eigenvalue is not positive: {}", ev[1]));
    }
    Ok(ev[1])
}

/// Predicted decay rate `λ₁ / (n r̄)`.
pub fn predicted_rate<T: Real>(lambda1: T, n: usize, r_bar: T) -> T {
    lambda1 / (T::from_count(n) * r_bar)
}

/// Least-squares fit of `log dev = c − rate·t` over the asymptotic tail.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit<T> {
    pub rate: T,
    pub intercept: T,
    pub r_squared: T,
    /// 95% Student-t interval for the rate.
    pub ci95: (T, T),
    pub points: usize,
    pub t_start: T,
    pub t_end: T,
    /// Set when `R² < 0.99`.
    pub warning: Option<String>,
}

/// Minimum number of tail records accepted by [`fit_decay`].
pub const MIN_TAIL_POINTS: usize = 20;

/// Fits the exponential rate of a deviation series `(t, ‖s − r̄‖)`.
///
/// The tail starts at the first record below 10% of the initial deviation and
/// stops before values reach the rounding floor.
pub fn fit_decay<T: Real>(records: &[(T, T)]) -> Result<DecayFit<T>> {
    let Some(&(_, d0)) = records.first() else {
        return domain("no records to fit");
    };
    if !(d0 > T::zero() && d0.is_finite()) {
        return domain("initial deviation must be positive");
    }
    let floor = d0 * T::lit(1e3) * T::epsilon();
    let Some(start) = records.iter().position(|&(_, d)| d < T::lit(0.1) * d0) else {
        return numerical("deviation never fell below 10% of its initial value");
    };
    let tail: Vec<(f64, f64)> = records[start..]
        .iter()
        .take_while(|&&(_, d)| d > floor)
        .map(|&(t, d)| (t.to_f64_lossy(), d.to_f64_lossy().ln()))
        .collect();
    let m = tail.len();
    if m < MIN_TAIL_POINTS {
        return numerical(format!("only {m} records in the asymptotic tail, need {MIN_TAIL_POINTS}"));
    }
    let mf = m as f64;
    let tm = tail.iter().map(|p| p.0).sum::<f64>() / mf;
    let ym = tail.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = tail.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = tail.iter().map(|p| (p.1 - ym).powi(2)).sum();
    if !(sxx > 0.0) {
        return numerical("tail records share one time");
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let sse: f64 = tail.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let se = (sse / (mf - 2.0) / sxx).sqrt();
    let q = StudentsT::new(0.0, 1.0, mf - 2.0)
        .map_err(|e| crate::error::WulffError::Numerical(e.to_string()))?
        .inverse_cdf(0.975);
    let rate = -slope;
    let warning = (r2 < 0.99).then(|| format!("poor exponential fit: R² = {r2:.4}"));
    Ok(DecayFit {
        rate: T::lit(rate),
        intercept: T::lit(intercept),
        r_squared: T::lit(r2),
        ci95: (T::lit(rate - q * se), T::lit(rate + q * se)),
        points: m,
        t_start: T::lit(tail[0].0),
        t_end: T::lit(tail[m - 1].0),
        warning,
    })
}

#[cfg(test)]
mod tests;
