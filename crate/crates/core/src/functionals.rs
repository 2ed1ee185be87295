//! Mixed volumes relative to the Wulff shape and the inequalities built on them.
//!
//! Both parametrizations reduce to a [`SurfaceMeasure`]: per-node weights of
//! `dμ_F` on the hypersurface together with `E_k(κ)` and `σ_F`. With that
//! convention `V_{n−k} = ∫E_k dμ_F` and `V_{n+1} = ∫σ_F dμ_F = (n+1)Vol`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::anisotropy::Anisotropy;
use crate::bodies::ConvexBody;
use crate::curvature::{elementary_normalized, GraphGeometry, SupportGeometry};
use crate::discretization::{SphereGrid, WulffChart};
use crate::error::{domain, numerical, Result};
use crate::linalg::{SMat, SVec, SymEigen};
use crate::scalar::Real;
use crate::sphere::{fibonacci_sphere, spread_points};

/// Quadrature data for integrals over the hypersurface.
#[derive(Clone, Debug)]
pub struct SurfaceMeasure<T> {
    pub n: usize,
    /// `dμ_F` weight per node.
    pub weights: Vec<T>,
    /// `E_0..E_n` of the anisotropic principal curvatures per node.
    pub ek: Vec<Vec<T>>,
    /// Anisotropic support function per node.
    pub sigma: Vec<T>,
    /// Volume by an independent radial quadrature, when available.
    pub radial_volume: Option<T>,
}

impl<T: Real> SurfaceMeasure<T> {
    /// From a radial graph; fails if the graph is not strictly convex.
    pub fn from_graph(grid: &SphereGrid<T>, geom: &GraphGeometry<T>) -> Result<Self> {
        if let Some(c) = &geom.convexity {
            return domain(format!("curvature integrals need a convex state (node {}, κ = {:e})", c.node, c.value));
        }
        let n = grid.n;
        let np1 = T::from_count(n + 1);
        let ek = geom.nodes.iter().map(|g| elementary_normalized(g.kappa.as_slice())).collect();
        let sigma = geom.nodes.iter().map(|g| g.sigma_f).collect();
        let radial_volume = geom.nodes.iter().zip(&grid.weights).map(|(g, &w)| w * g.rho.powi(n as i32 + 1)).sum::<T>() / np1;
        Ok(Self { n, weights: geom.mu_weights.clone(), ek, sigma, radial_volume: Some(radial_volume) })
    }

    /// From a support state on the Wulff chart: `dμ_F = E_n(τ) dμ_{Σ_F}` and
    /// `E_k(κ) = E_{n−k}(τ)/E_n(τ)`.
    pub fn from_support(chart: &WulffChart<T>, geom: &SupportGeometry<T>, s: &[T]) -> Result<Self> {
        if let Some(c) = &geom.convexity {
            return domain(format!("curvature integrals need a convex state (node {}, τ = {:e})", c.node, c.value));
        }
        let n = chart.dimension();
        let mut weights = Vec::with_capacity(s.len());
        let mut ek = Vec::with_capacity(s.len());
        for (r, &w) in geom.radii.iter().zip(&chart.mu_weights) {
            let e = elementary_normalized(r.as_slice());
            weights.push(w * e[n]);
            ek.push((0..=n).map(|k| e[n - k] / e[n]).collect());
        }
        Ok(Self { n, weights, ek, sigma: s.to_vec(), radial_volume: None })
    }

    /// `∫ f dμ_F`.
    pub fn integrate(&self, f: impl Fn(usize) -> T) -> T {
        self.weights.iter().enumerate().map(|(i, &w)| w * f(i)).sum()
    }

    /// Enclosed volume `(n+1)⁻¹∫σ_F dμ_F`.
    pub fn volume(&self) -> T {
        self.integrate(|i| self.sigma[i]) / T::from_count(self.n + 1)
    }

    /// `V_m` for `m = 0..=n+1`.
    pub fn mixed_volume(&self, m: usize) -> Result<T> {
        let n = self.n;
        if m > n + 1 {
            return domain(format!("mixed volume index {m} exceeds n + 1 = {}", n + 1));
        }
        Ok(if m == n + 1 { self.integrate(|i| self.sigma[i]) } else { self.integrate(|i| self.ek[i][n - m]) })
    }

    /// `∫E_{k+1}σ_F dμ_F − ∫E_k dμ_F` for `k = 0..n−1`.
    pub fn minkowski_residual(&self, k: usize) -> Result<T> {
        if k + 1 > self.n {
            return domain(format!("Minkowski identity index {k} needs k <= n - 1"));
        }
        Ok(self.integrate(|i| self.ek[i][k + 1] * self.sigma[i]) - self.integrate(|i| self.ek[i][k]))
    }
}

/// `|W_F| = (n+1)⁻¹∫_{S^n} F⁰(x)^{−(n+1)} dx` on the grid quadrature.
pub fn wulff_volume<T: Real>(aniso: &Anisotropy<T>, grid: &SphereGrid<T>) -> Result<T> {
    if aniso.dimension() != grid.n {
        return domain("anisotropy and grid dimensions differ");
    }
    let p = grid.n as i32 + 1;
    let parts = grid.nodes.par_iter().map(|x| aniso.dual_norm(x).map(|d| d.powi(-p))).collect::<Result<Vec<T>>>()?;
    Ok(grid.integrate(&parts) / T::from_count(grid.n + 1))
}

/// Every functional of one state.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalReport<T> {
    pub n: usize,
    pub vol: T,
    /// `V_0..V_{n+1}`.
    pub v: Vec<T>,
    /// Anisotropic area `|M|_F = V_n`.
    pub area_f: T,
    /// `I_k` for `k = 2..=n`, stored at index `k − 2`.
    pub isoperimetric: Vec<T>,
    /// Minkowski residuals for `k = 0..n−1`.
    pub minkowski: Vec<T>,
    /// `∫σ_F dμ_F − (n+1)Vol` against the radial volume, when available.
    pub volume_residual: Option<T>,
    /// AF slack for `k = 0..=n−2`.
    pub af_slack: Vec<T>,
    pub wulff_volume: T,
}

impl<T: Real> FunctionalReport<T> {
    pub fn new(measure: &SurfaceMeasure<T>, wulff_volume: T) -> Result<Self> {
        let n = measure.n;
        let v = (0..=n + 1).map(|m| measure.mixed_volume(m)).collect::<Result<Vec<_>>>()?;
        let vol = v[n + 1] / T::from_count(n + 1);
        let minkowski = (0..n).map(|k| measure.minkowski_residual(k)).collect::<Result<Vec<_>>>()?;
        let volume_residual = measure.radial_volume.map(|rv| v[n + 1] - T::from_count(n + 1) * rv);
        let mut report = Self {
            n,
            vol,
            area_f: v[n],
            v,
            isoperimetric: Vec::new(),
            minkowski,
            volume_residual,
            af_slack: Vec::new(),
            wulff_volume,
        };
        report.isoperimetric = (2..=n).map(|k| isoperimetric_ratio(&report, k)).collect::<Result<Vec<_>>>()?;
        report.af_slack = (0..n.saturating_sub(1)).map(|k| af_check(&report, k)).collect::<Result<Vec<_>>>()?;
        Ok(report)
    }

    /// `I_k` for `2 ≤ k ≤ n`.
    pub fn i_k(&self, k: usize) -> T {
        self.isoperimetric[k - 2]
    }
}

/// `I_k = V_{n+2−k}/V_{n+1}^{(n+2−k)/(n+1)}`.
pub fn isoperimetric_ratio<T: Real>(report: &FunctionalReport<T>, k: usize) -> Result<T> {
    let n = report.n;
    if k < 2 || k > n {
        return domain(format!("isoperimetric ratio needs 2 <= k <= n, got {k}"));
    }
    let m = n + 2 - k;
    Ok(report.v[m] / report.v[n + 1].powf(T::from_count(m) / T::from_count(n + 1)))
}

/// `∫E_k dμ_F − (n+1)Vol^{(n−k)/(n+1)}|W_F|^{(k+1)/(n+1)}`, nonnegative for convex bodies.
pub fn af_check<T: Real>(report: &FunctionalReport<T>, k: usize) -> Result<T> {
    let n = report.n;
    if k + 2 > n {
        return domain(format!("AF check needs k <= n - 2, got k = {k}, n = {n}"));
    }
    let np1 = T::from_count(n + 1);
    let rhs = np1
        * report.vol.powf(T::from_count(n - k) / np1)
        * report.wulff_volume.powf(T::from_count(k + 1) / np1);
    Ok(report.v[n - k] - rhs)
}

/// Settings for the Monte-Carlo mixed-volume oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct McConfig {
    /// Total sample points over all replicates.
    pub samples: usize,
    /// Directions used in the support-function membership test.
    pub directions: usize,
    /// Largest `ε`, in units of the body's outer radius.
    pub eps_max: f64,
    /// Number of `ε` values including 0.
    pub eps_count: usize,
    /// Independent jittered replicates used for the standard errors.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { samples: 2_000_000, directions: 2000, eps_max: 2.0, eps_count: 11, replicates: 8, seed: 7 }
    }
}

/// Mixed volumes from the Steiner polynomial with their standard errors.
#[derive(Clone, Debug)]
pub struct McEstimate<T> {
    pub v: Vec<T>,
    pub stderr: Vec<T>,
    /// `(ε, Vol(Ω ⊕ εW_F))` averaged over replicates.
    pub curve: Vec<(T, T)>,
}

/// Hit-or-miss estimate of `Vol(Ω ⊕ εW_F)` on an `ε` ladder, fitted by the
/// degree-`(n+1)` Steiner polynomial. A point `z` lies in `Ω ⊕ εW_F` iff
/// `⟨x,z⟩ ≤ h_Ω(x) + εF(x)` for every direction `x`.
pub fn mc_mixed_volumes<T: Real>(aniso: &Anisotropy<T>, body: &ConvexBody<T>, cfg: &McConfig) -> Result<McEstimate<T>> {
    let n = aniso.dimension();
    let d = n + 1;
    if cfg.eps_count < d + 2 || cfg.replicates < 2 || cfg.directions < 10 || !(cfg.eps_max > 0.0) {
        return domain("Monte-Carlo oracle needs eps_count >= n + 3, replicates >= 2, directions >= 10, eps_max > 0");
    }
    let dirs: Vec<SVec<T>> = if n == 2 { fibonacci_sphere(cfg.directions) } else { spread_points(n, cfg.directions, cfg.seed) };
    let h: Vec<T> = dirs.iter().map(|x| body.support(aniso, x)).collect::<Result<_>>()?;
    let f: Vec<T> = dirs.iter().map(|x| aniso.eval_support(x)).collect::<Result<_>>()?;
    let outer = h.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let eps_max = T::lit(cfg.eps_max) * outer;
    let eps: Vec<T> = (0..cfg.eps_count).map(|i| eps_max * T::from_count(i) / T::from_count(cfg.eps_count - 1)).collect();

    // bounding box of Ω ⊕ ε_max W_F from the coordinate directions
    let mut lo = SVec::zeros(d);
    let mut hi = SVec::zeros(d);
    for i in 0..d {
        let e = SVec::basis(d, i);
        let me = e.scale(-T::one());
        hi[i] = body.support(aniso, &e)? + eps_max * aniso.eval_support(&e)?;
        lo[i] = -(body.support(aniso, &me)? + eps_max * aniso.eval_support(&me)?);
    }
    let per_axis = ((cfg.samples / cfg.replicates) as f64).powf(1.0 / d as f64).floor().max(2.0) as usize;
    let cells = per_axis.pow(d as u32);
    let cell = SVec::from_fn(d, |i| (hi[i] - lo[i]) / T::from_count(per_axis));
    let cell_vol = (0..d).fold(T::one(), |a, i| a * cell[i]);
    let cheap_radial = !matches!(body, ConvexBody::Wulff { .. });

    let counts: Vec<Vec<u64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(rep as u64 + 1);
            let mut count = vec![0u64; eps.len()];
            let mut z = SVec::zeros(d);
            for c in 0..cells {
                let mut idx = c;
                for i in 0..d {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    let u: f64 = rng.gen();
                    z[i] = lo[i] + cell[i] * (T::from_count(k) + T::lit(u));
                }
                let e_star = if cheap_radial && inside(aniso, body, &z)? {
                    T::zero()
                } else {
                    let mut best = T::neg_infinity();
                    for (j, x) in dirs.iter().enumerate() {
                        let v = (x.dot(&z) - h[j]) / f[j];
                        if v > best {
                            best = v;
                            if best > eps_max {
                                break;
                            }
                        }
                    }
                    best
                };
                for (slot, &e) in count.iter_mut().zip(&eps) {
                    if e_star <= e {
                        *slot += 1;
                    }
                }
            }
            Ok(count)
        })
        .collect::<Result<_>>()?;

    let curves: Vec<Vec<T>> = counts.iter().map(|c| c.iter().map(|&k| T::lit(k as f64) * cell_vol).collect()).collect();
    let reps = T::from_count(cfg.replicates);
    let mean: Vec<T> = (0..eps.len()).map(|e| curves.iter().map(|c| c[e]).sum::<T>() / reps).collect();
    let v = steiner_fit(&eps, &mean, n)?;
    let fits = curves.iter().map(|c| steiner_fit(&eps, c, n)).collect::<Result<Vec<_>>>()?;
    let stderr = (0..=d)
        .map(|m| {
            let mu = fits.iter().map(|f| f[m]).sum::<T>() / reps;
            let var = fits.iter().map(|f| (f[m] - mu) * (f[m] - mu)).sum::<T>() / (reps - T::one());
            (var / reps).sqrt()
        })
        .collect();
    Ok(McEstimate { v, stderr, curve: eps.into_iter().zip(mean).collect() })
}

fn inside<T: Real>(aniso: &Anisotropy<T>, body: &ConvexBody<T>, z: &SVec<T>) -> Result<bool> {
    let r = z.norm();
    if r == T::zero() {
        return Ok(true);
    }
    Ok(r <= body.radial(aniso, &z.scale(T::one() / r))?)
}

/// Least-squares fit of `Σ_j c_j ε^j` (`j ≤ n+1`) mapped to `V_m = (n+1)c_{n+1−m}/C(n+1, n+1−m)`.
fn steiner_fit<T: Real>(eps: &[T], vol: &[T], n: usize) -> Result<Vec<T>> {
    let d = n + 2;
    let scale = eps.iter().fold(T::zero(), |a, &b| a.max(b));
    let mut ata = SMat::zeros(d);
    let mut atb = SVec::zeros(d);
    for (&e, &y) in eps.iter().zip(vol) {
        let u = e / scale;
        let row: Vec<T> = (0..d).map(|j| u.powi(j as i32)).collect();
        for a in 0..d {
            atb[a] += row[a] * y;
            for b in 0..d {
                ata[(a, b)] += row[a] * row[b];
            }
        }
    }
    let ev = SymEigen::new(&ata);
    if !(ev.values[0] > T::zero()) || ev.values[d - 1] / ev.values[0] > T::lit(1e12) {
        return numerical("Steiner fit is ill conditioned; increase the ε spread");
    }
    let c = ata.inverse()?.mul_vec(&atb);
    let np1 = T::from_count(n + 1);
    let mut binom = vec![T::one(); d];
    for j in 1..d {
        binom[j] = binom[j - 1] * T::from_count(n + 2 - j) / T::from_count(j);
    }
    Ok((0..d)
        .map(|m| {
            let j = n + 1 - m;
            np1 * c[j] / scale.powi(j as i32) / binom[j]
        })
        .collect())
}
