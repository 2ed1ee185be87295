//! Run configuration: a TOML file with one section per concern.
//!
//! ```toml
//! n = 2
//! seed = 7
//!
//! [anisotropy]
//! family = "ellipsoid"          # round | ellipsoid | harmonic
//! semi_axes = [2.0, 1.0, 1.0]
//!
//! [grid]
//! mode = "axisymmetric"         # full | axisymmetric
//! n_theta = 64
//!
//! [body]
//! kind = "harmonic"             # sphere | ellipsoid | harmonic | wulff | random
//! radius = 1.0
//! terms = [{ l = 2, m = 0, coeff = 0.3 }]
//!
//! [flow]
//! k = 2
//! t_max = 50.0
//! ```
//!
//! Every cross-field constraint is checked by [`RunConfig::validate`] before
//! anything is computed.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use wulff_core::bodies::{random_bodies, ConvexBody};
use wulff_core::discretization::{SphereGrid, StencilOrder};
use wulff_core::flow::{FlowConfig, Parametrization};
use wulff_core::functionals::McConfig;
use wulff_core::linalg::SVec;
use wulff_core::{Anisotropy, DerivativeMode, Family, HarmonicTerm};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dimension of the hypersurface, `S^n`.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub anisotropy: AnisotropySection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub body: BodySection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub af: AfSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

fn default_n() -> usize {
    2
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Round,
    Ellipsoid,
    Harmonic,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub l: usize,
    #[serde(default)]
    pub m: i32,
    pub coeff: f64,
}

impl From<Term> for HarmonicTerm {
    fn from(t: Term) -> Self {
        HarmonicTerm::new(t.l, t.m, t.coeff)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnisotropySection {
    pub family: FamilyName,
    pub semi_axes: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub terms: Option<Vec<Term>>,
    /// Finite-difference derivatives of `F` with this base step instead of closed forms.
    pub fd_step: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GridModeName {
    #[default]
    Full,
    Axisymmetric,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OrderName {
    #[default]
    Second,
    Fourth,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub mode: GridModeName,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    /// Defaults to `2 n_theta`; ignored in axisymmetric mode.
    pub n_phi: Option<usize>,
    #[serde(default)]
    pub order: OrderName,
}

fn default_n_theta() -> usize {
    32
}

impl Default for GridSection {
    fn default() -> Self {
        Self { mode: GridModeName::Full, n_theta: default_n_theta(), n_phi: None, order: OrderName::Second }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    #[default]
    Sphere,
    Ellipsoid,
    Harmonic,
    Wulff,
    Random,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySection {
    #[serde(default)]
    pub kind: BodyKind,
    pub radius: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub semi_axes: Option<Vec<f64>>,
    pub scale: Option<f64>,
    pub terms: Option<Vec<Term>>,
    /// Seeded harmonic perturbation: coefficients uniform in `±amplitude/l²`.
    pub amplitude: Option<f64>,
    pub max_degree: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ParametrizationName {
    #[default]
    Support,
    Radial,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub k: usize,
    pub parametrization: ParametrizationName,
    pub t_max: f64,
    pub speed_tol: f64,
    pub max_steps: usize,
    pub cfl: f64,
    pub record_stride: usize,
    pub monotonicity_slack: f64,
    /// Write a mesh every this many records; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        let d = FlowConfig::default();
        Self {
            k: d.k,
            parametrization: ParametrizationName::Support,
            t_max: d.t_max,
            speed_tol: d.speed_tol,
            max_steps: d.max_steps,
            cfl: d.cfl,
            record_stride: d.record_stride,
            monotonicity_slack: d.monotonicity_slack,
            snapshot_every: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from(DEFAULT_OUT) }
    }
}

pub const DEFAULT_OUT: &str = "wulff-out";

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AfSection {
    pub bodies: usize,
    /// Relative slack below `−tolerance` fails the check.
    pub tolerance: f64,
}

impl Default for AfSection {
    fn default() -> Self {
        Self { bodies: 10, tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub r_bar: f64,
    /// Number of eigenvalues listed, including the zero mode.
    pub count: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { r_bar: 1.0, count: 4 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub samples: usize,
    pub directions: usize,
    pub eps_max: f64,
    pub eps_count: usize,
    pub replicates: usize,
    /// Relative agreement accepted on top of the combined error bars.
    pub rel_tol: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        let d = McConfig::default();
        Self {
            samples: d.samples,
            directions: d.directions,
            eps_max: d.eps_max,
            eps_count: d.eps_count,
            replicates: d.replicates,
            rel_tol: 0.02,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn axisymmetric(&self) -> bool {
        self.grid.mode == GridModeName::Axisymmetric
    }

    /// Checks every constraint that can be decided from the file alone.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        ensure!((2..=6).contains(&n), "n = {n} outside 2..=6");
        let d = n + 1;

        let a = &self.anisotropy;
        match a.family {
            FamilyName::Round => {}
            FamilyName::Ellipsoid => {
                let axes = a.semi_axes.as_ref().context("anisotropy.semi_axes is required for an ellipsoid")?;
                ensure!(axes.len() == d, "anisotropy.semi_axes needs n + 1 = {d} entries, got {}", axes.len());
                ensure!(axes.iter().all(|x| x.is_finite() && *x > 0.0), "anisotropy.semi_axes must be positive");
            }
            FamilyName::Harmonic => {
                let eps = a.epsilon.context("anisotropy.epsilon is required for a harmonic family")?;
                ensure!(eps.is_finite(), "anisotropy.epsilon must be finite");
                let terms = a.terms.as_ref().context("anisotropy.terms is required for a harmonic family")?;
                check_terms("anisotropy.terms", terms, n)?;
            }
        }
        if let Some(h) = a.fd_step {
            ensure!(h.is_finite() && h > 0.0, "anisotropy.fd_step must be positive");
        }

        let g = &self.grid;
        match g.mode {
            GridModeName::Full => {
                ensure!(n == 2, "grid.mode = \"full\" is the latitude-longitude grid on S²; use axisymmetric for n = {n}");
                ensure!(g.n_theta >= 16, "grid.n_theta must be at least 16");
                let np = g.n_phi.unwrap_or(2 * g.n_theta);
                ensure!(np >= 32 && np % 2 == 0, "grid.n_phi must be even and at least 32");
            }
            GridModeName::Axisymmetric => {
                ensure!(g.n_theta >= 16, "grid.n_theta must be at least 16");
                ensure!(self.anisotropy_is_axisymmetric(), "an axisymmetric grid needs an anisotropy invariant about e₁");
                ensure!(self.body_is_axisymmetric(), "an axisymmetric grid needs an initial body invariant about e₁");
            }
        }

        self.validate_body()?;

        let f = &self.flow;
        ensure!(f.k >= 2 && f.k <= n, "flow.k = {} outside 2..=n = 2..={n}", f.k);
        self.flow_config().validate(n).map_err(anyhow::Error::from)?;

        ensure!(self.af.bodies >= 1, "af.bodies must be at least 1");
        ensure!(self.af.tolerance >= 0.0, "af.tolerance must be nonnegative");
        ensure!(self.spectrum.r_bar.is_finite() && self.spectrum.r_bar > 0.0, "spectrum.r_bar must be positive");
        ensure!((2..=5).contains(&self.spectrum.count), "spectrum.count must be in 2..=5");
        let o = &self.oracle;
        ensure!(o.eps_count >= n + 3, "oracle.eps_count must be at least n + 3");
        ensure!(o.replicates >= 2 && o.directions >= 10 && o.samples >= o.replicates, "oracle sampling sizes too small");
        ensure!(o.eps_max > 0.0 && o.rel_tol >= 0.0, "oracle.eps_max must be positive and oracle.rel_tol nonnegative");
        Ok(())
    }

    fn validate_body(&self) -> Result<()> {
        let b = &self.body;
        let d = self.n + 1;
        if let Some(c) = &b.center {
            ensure!(c.len() == d, "body.center needs {d} entries");
            ensure!(matches!(b.kind, BodyKind::Sphere | BodyKind::Ellipsoid | BodyKind::Wulff), "body.center is not used by {:?} bodies", b.kind);
        }
        let positive = |name: &str, v: Option<f64>| -> Result<()> {
            if let Some(x) = v {
                ensure!(x.is_finite() && x > 0.0, "body.{name} must be positive");
            }
            Ok(())
        };
        positive("radius", b.radius)?;
        positive("scale", b.scale)?;
        match b.kind {
            BodyKind::Sphere | BodyKind::Wulff | BodyKind::Random => {}
            BodyKind::Ellipsoid => {
                let axes = b.semi_axes.as_ref().context("body.semi_axes is required for an ellipsoid body")?;
                ensure!(axes.len() == d, "body.semi_axes needs {d} entries");
                ensure!(axes.iter().all(|x| x.is_finite() && *x > 0.0), "body.semi_axes must be positive");
            }
            BodyKind::Harmonic => match (&b.terms, b.amplitude) {
                (Some(t), None) => check_terms("body.terms", t, self.n)?,
                (None, Some(amp)) => {
                    ensure!(amp.is_finite() && amp > 0.0, "body.amplitude must be positive");
                    ensure!(b.max_degree.unwrap_or(3) >= 1, "body.max_degree must be at least 1");
                }
                _ => bail!("a harmonic body needs exactly one of body.terms or body.amplitude"),
            },
        }
        Ok(())
    }

    fn anisotropy_is_axisymmetric(&self) -> bool {
        let a = &self.anisotropy;
        match a.family {
            FamilyName::Round => true,
            FamilyName::Ellipsoid => a.semi_axes.as_ref().is_some_and(|s| s.len() > 1 && s[1..].iter().all(|x| *x == s[1])),
            FamilyName::Harmonic => a.terms.as_ref().is_some_and(|t| t.iter().all(|t| t.m == 0)),
        }
    }

    fn body_is_axisymmetric(&self) -> bool {
        let b = &self.body;
        let on_axis = b.center.as_ref().map_or(true, |c| c.iter().skip(1).all(|x| *x == 0.0));
        match b.kind {
            BodyKind::Sphere | BodyKind::Wulff => on_axis,
            BodyKind::Ellipsoid => on_axis && b.semi_axes.as_ref().is_some_and(|s| s.len() > 1 && s[1..].iter().all(|x| *x == s[1])),
            BodyKind::Harmonic => b.terms.as_ref().map_or(true, |t| t.iter().all(|t| t.m == 0)),
            BodyKind::Random => true,
        }
    }

    pub fn anisotropy(&self) -> wulff_core::Result<Anisotropy<f64>> {
        let a = &self.anisotropy;
        let family = match a.family {
            FamilyName::Round => Family::Round,
            FamilyName::Ellipsoid => Family::Ellipsoid { semi_axes: a.semi_axes.clone().unwrap_or_default() },
            FamilyName::Harmonic => Family::Harmonic {
                epsilon: a.epsilon.unwrap_or(0.0),
                terms: a.terms.iter().flatten().map(|&t| t.into()).collect(),
            },
        };
        let mode = a.fd_step.map_or(DerivativeMode::ClosedForm, |step| DerivativeMode::FiniteDifference { step });
        Anisotropy::new(family, self.n, mode)
    }

    pub fn grid(&self) -> wulff_core::Result<SphereGrid<f64>> {
        let g = &self.grid;
        let grid = match g.mode {
            GridModeName::Full => SphereGrid::full(g.n_theta, g.n_phi.unwrap_or(2 * g.n_theta))?,
            GridModeName::Axisymmetric => SphereGrid::axisymmetric(self.n, g.n_theta)?,
        };
        Ok(grid.with_order(match g.order {
            OrderName::Second => StencilOrder::Second,
            OrderName::Fourth => StencilOrder::Fourth,
        }))
    }

    pub fn flow_config(&self) -> FlowConfig {
        let f = &self.flow;
        FlowConfig {
            parametrization: match f.parametrization {
                ParametrizationName::Support => Parametrization::Support,
                ParametrizationName::Radial => Parametrization::RadialGraph,
            },
            k: f.k,
            t_max: f.t_max,
            speed_tol: f.speed_tol,
            max_steps: f.max_steps,
            cfl: f.cfl,
            record_stride: f.record_stride,
            monotonicity_slack: f.monotonicity_slack,
        }
    }

    pub fn mc_config(&self) -> McConfig {
        let o = &self.oracle;
        McConfig {
            samples: o.samples,
            directions: o.directions,
            eps_max: o.eps_max,
            eps_count: o.eps_count,
            replicates: o.replicates,
            seed: self.seed,
        }
    }

    /// Initial body; seeded kinds draw from `seed`.
    pub fn body(&self, aniso: &Anisotropy<f64>, grid: &SphereGrid<f64>) -> wulff_core::Result<ConvexBody<f64>> {
        let b = &self.body;
        let n = self.n;
        let center = || b.center.as_deref().map_or_else(|| SVec::zeros(n + 1), SVec::from_slice);
        Ok(match b.kind {
            BodyKind::Sphere => ConvexBody::ball_at(center(), b.radius.unwrap_or(1.0)),
            BodyKind::Ellipsoid => ConvexBody::Ellipsoid {
                center: center(),
                semi_axes: SVec::from_slice(b.semi_axes.as_deref().unwrap_or_default()),
                rotation: wulff_core::linalg::SMat::identity(n + 1),
            },
            BodyKind::Wulff => ConvexBody::Wulff { scale: b.scale.unwrap_or(1.0), center: center() },
            BodyKind::Harmonic => {
                let terms: Vec<HarmonicTerm> = match &b.terms {
                    Some(t) => t.iter().map(|&t| t.into()).collect(),
                    None => self.seeded_terms(),
                };
                ConvexBody::harmonic(n, b.radius.unwrap_or(1.0), &terms)?
            }
            BodyKind::Random => random_bodies(aniso, grid, 1, self.seed)?.remove(0),
        })
    }

    fn seeded_terms(&self) -> Vec<HarmonicTerm> {
        let amp = self.body.amplitude.unwrap_or(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let zonal_only = self.axisymmetric() || self.n != 2;
        let mut terms = Vec::new();
        for l in 1..=self.body.max_degree.unwrap_or(3) {
            let ms: Vec<i32> = if zonal_only { vec![0] } else { (-(l as i32)..=l as i32).collect() };
            for m in ms {
                terms.push(HarmonicTerm::new(l, m, rng.gen_range(-amp..amp) / (l * l) as f64));
            }
        }
        terms
    }
}

fn check_terms(name: &str, terms: &[Term], n: usize) -> Result<()> {
    ensure!(!terms.is_empty(), "{name} must not be empty");
    for t in terms {
        ensure!(t.l >= 1, "{name}: degree l must be at least 1");
        ensure!(t.m.unsigned_abs() as usize <= t.l, "{name}: |m| = {} exceeds l = {}", t.m.abs(), t.l);
        ensure!(t.m == 0 || n == 2, "{name}: non-zonal terms (m ≠ 0) are only available on S²");
        ensure!(t.coeff.is_finite(), "{name}: coefficients must be finite");
    }
    Ok(())
}
