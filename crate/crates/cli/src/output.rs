//! Artifact writers: `summary.txt`, versioned CSV files and OBJ meshes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use wulff_core::discretization::{GridMode, SphereGrid};
use wulff_core::flow::FlowRecord;
use wulff_core::linalg::SVec;

pub const FLOW_SCHEMA: &str = "# wulff flow.csv v1";
pub const STATE_SCHEMA: &str = "# wulff final_state.csv v1";
pub const AF_SCHEMA: &str = "# wulff af.csv v1";
pub const DEVIATION_SCHEMA: &str = "# wulff deviation.csv v1";

/// Shortest round-trip text of `x`, in exponent form outside `[1e-4, 1e6)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e6).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Ordered `key: value` report, written as `summary.txt` on every exit path.
#[derive(Debug, Default)]
pub struct Summary {
    lines: Vec<(String, String)>,
}

impl Summary {
    pub fn new(command: &str) -> Self {
        let mut s = Self::default();
        s.set("command", command);
        s
    }

    /// Sets `key`, replacing an earlier value in place.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.lines.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.lines.push((key.to_string(), value)),
        }
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("summary.txt");
        fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}

/// CSV file whose first line is a schema comment.
pub fn csv_writer(path: &Path, schema: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{schema}")?;
    Ok(csv::Writer::from_writer(out))
}

pub fn flow_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "vol".to_string()];
    h.extend((0..=n + 1).map(|m| format!("v{m}")));
    h.extend(["i_k", "s_min", "s_max", "kappa_min", "kappa_max"].map(String::from));
    h.extend((0..n).map(|k| format!("mink_res_{k}")));
    h.extend(["umbilicity", "sup_speed"].map(String::from));
    h
}

pub fn flow_row(r: &FlowRecord<f64>) -> Vec<String> {
    let mut row = vec![r.t, r.vol];
    row.extend(&r.v);
    row.extend([r.i_k, r.s_min, r.s_max, r.kappa_min, r.kappa_max]);
    row.extend(&r.minkowski);
    row.extend([r.umbilicity, r.sup_speed]);
    row.into_iter().map(num).collect()
}

/// Streams flow records to `flow.csv` and `deviation.csv`.
pub struct FlowWriter {
    flow: csv::Writer<BufWriter<File>>,
    deviation: csv::Writer<BufWriter<File>>,
}

impl FlowWriter {
    pub fn create(dir: &Path, n: usize) -> Result<Self> {
        let mut flow = csv_writer(&dir.join("flow.csv"), FLOW_SCHEMA)?;
        flow.write_record(flow_header(n))?;
        let mut deviation = csv_writer(&dir.join("deviation.csv"), DEVIATION_SCHEMA)?;
        deviation.write_record(["t", "deviation", "r_bar"])?;
        Ok(Self { flow, deviation })
    }

    pub fn push(&mut self, r: &FlowRecord<f64>) -> Result<()> {
        self.flow.write_record(flow_row(r))?;
        self.deviation.write_record([num(r.t), num(r.deviation), num(r.r_bar)])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.flow.flush()?;
        self.deviation.flush()?;
        Ok(())
    }
}

/// One row per node of the final state.
pub struct StateRow {
    pub value: f64,
    pub point: SVec<f64>,
    /// Smallest principal curvature (radial) or radius (support) at the node.
    pub min_principal: f64,
}

pub fn write_state(path: &Path, grid: &SphereGrid<f64>, value_name: &str, t: f64, rows: &[StateRow]) -> Result<()> {
    let mut w = csv_writer(path, &format!("{STATE_SCHEMA} t={t}"))?;
    let d = grid.n + 1;
    let mut header = vec!["node".to_string(), "theta".to_string(), "phi".to_string(), value_name.to_string()];
    header.extend((0..d).map(|i| format!("x{i}")));
    header.push("min_principal".to_string());
    w.write_record(&header)?;
    for (idx, r) in rows.iter().enumerate() {
        let (i, j) = grid.ij(idx);
        let mut rec = vec![idx.to_string(), num(grid.theta[i]), num(grid.phi[j]), num(r.value)];
        rec.extend((0..d).map(|k| num(r.point[k])));
        rec.push(num(r.min_principal));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// ASCII OBJ of the boundary points in lat-long order, with quads between
/// rings and one polygon per polar cap, oriented outward. Axisymmetric
/// profiles are revolved about `e₁` into the `(x₀, x₁, x₂)` section.
pub fn write_obj(path: &Path, grid: &SphereGrid<f64>, points: &[SVec<f64>]) -> Result<()> {
    let nt = grid.n_theta;
    let (np, verts): (usize, Vec<[f64; 3]>) = match grid.mode {
        GridMode::Full2D { n_phi, .. } => (n_phi, points.iter().map(|p| [p[0], p[1], p[2]]).collect()),
        GridMode::Axisymmetric { .. } => {
            let np = 2 * nt;
            let mut v = Vec::with_capacity(nt * np);
            for p in points {
                for j in 0..np {
                    let (s, c) = (2.0 * std::f64::consts::PI * j as f64 / np as f64).sin_cos();
                    v.push([p[0], p[1] * c, p[1] * s]);
                }
            }
            (np, v)
        }
    };
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "# wulff mesh: {nt} latitudes x {np} longitudes")?;
    for v in &verts {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2])?;
    }
    let id = |i: usize, j: usize| i * np + (j % np) + 1;
    let cap = |js: &mut dyn Iterator<Item = usize>, i: usize| js.map(|j| id(i, j).to_string()).collect::<Vec<_>>().join(" ");
    writeln!(out, "f {}", cap(&mut (0..np), 0))?;
    for i in 0..nt - 1 {
        for j in 0..np {
            writeln!(out, "f {} {} {} {}", id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1))?;
        }
    }
    writeln!(out, "f {}", cap(&mut (0..np).rev(), nt - 1))?;
    out.flush()?;
    Ok(())
}

pub fn snapshot_path(dir: &Path, label: &str) -> PathBuf {
    dir.join("snapshots").join(format!("{label}.obj"))
}
