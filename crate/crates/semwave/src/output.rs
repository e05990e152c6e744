//! File outputs: probe time series, volume snapshots in the legacy ASCII
//! VTK structured-grid format, per-routine timing tables and the run
//! manifest. Floats go out in Rust's shortest round-trip form, so a file
//! is a bitwise function of the numbers in it.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result, Routine};
use crate::mesh::VolumeMesh;

pub fn create_file(path: &Path) -> Result<BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    let f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(BufWriter::new(f))
}

fn finish<W: Write>(mut w: W, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// One wave gauge: surface elevation, surface potential and vertical
/// velocity sampled once per step at a fixed x.
#[derive(Debug, Clone)]
pub struct ProbeSeries {
    pub x: f64,
    pub t: Vec<f64>,
    pub eta: Vec<f64>,
    pub phi_eta: Vec<f64>,
    pub w_eta: Vec<f64>,
}

impl ProbeSeries {
    pub fn new(x: f64) -> Self {
        ProbeSeries {
            x,
            t: Vec::new(),
            eta: Vec::new(),
            phi_eta: Vec::new(),
            w_eta: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, eta: f64, phi_eta: f64, w_eta: f64) {
        self.t.push(t);
        self.eta.push(eta);
        self.phi_eta.push(phi_eta);
        self.w_eta.push(w_eta);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

pub fn write_probe_csv(path: &Path, series: &ProbeSeries) -> Result<()> {
    let mut w = create_file(path)?;
    let io = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "t,eta,phi_eta,w_eta").map_err(io)?;
    for i in 0..series.len() {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e}",
            series.t[i], series.eta[i], series.phi_eta[i], series.w_eta[i]
        )
        .map_err(io)?;
    }
    finish(w, path)
}

/// Read a probe CSV back into a series; `x` is not stored in the file and
/// comes back as NaN unless the caller knows it.
pub fn read_probe_csv(path: &Path) -> Result<ProbeSeries> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut series = ProbeSeries::new(f64::NAN);
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 {
            if line.trim() != "t,eta,phi_eta,w_eta" {
                return Err(Error::Config(format!(
                    "{}: unexpected probe header '{line}'",
                    path.display()
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut vals = [0.0f64; 4];
        let mut parts = line.split(',');
        for v in vals.iter_mut() {
            let field = parts.next().ok_or_else(|| {
                Error::Config(format!("{}:{}: short row", path.display(), ln + 1))
            })?;
            *v = field.trim().parse().map_err(|_| {
                Error::Config(format!("{}:{}: bad number '{field}'", path.display(), ln + 1))
            })?;
        }
        series.push(vals[0], vals[1], vals[2], vals[3]);
    }
    Ok(series)
}

pub fn write_timing_csv(path: &Path, rows: &[(Routine, usize, f64)]) -> Result<()> {
    let mut w = create_file(path)?;
    let io = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "routine,calls,total_seconds").map_err(io)?;
    for (routine, calls, seconds) in rows {
        writeln!(w, "{},{},{:.6}", routine.name(), calls, seconds).map_err(io)?;
    }
    finish(w, path)
}

/// Volume snapshot of the potential and the vertical velocity on the
/// current mesh, legacy ASCII VTK. The DoF numbering is column-fastest,
/// which is exactly the structured-grid point order.
pub fn write_vtk_snapshot(
    path: &Path,
    mesh: &VolumeMesh,
    time: f64,
    phi: &[f64],
    w: &[f64],
) -> Result<()> {
    assert_eq!(phi.len(), mesh.n_dofs());
    assert_eq!(w.len(), mesh.n_dofs());
    let mut out = create_file(path)?;
    let io = |e| Error::io(path.display().to_string(), e);
    let n_cols = mesh.n_cols();
    let n_levels = mesh.n_levels();
    let n = mesh.n_dofs();
    writeln!(out, "# vtk DataFile Version 3.0").map_err(io)?;
    writeln!(out, "free surface potential flow, t = {:e}", time).map_err(io)?;
    writeln!(out, "ASCII").map_err(io)?;
    writeln!(out, "DATASET STRUCTURED_GRID").map_err(io)?;
    writeln!(out, "DIMENSIONS {} {} 1", n_cols, n_levels).map_err(io)?;
    writeln!(out, "POINTS {} double", n).map_err(io)?;
    let x = mesh.surface().coords();
    let z = mesh.z();
    for level in 0..n_levels {
        for c in 0..n_cols {
            writeln!(out, "{:e} {:e} 0", x[c], z[level * n_cols + c]).map_err(io)?;
        }
    }
    writeln!(out, "POINT_DATA {}", n).map_err(io)?;
    for (name, field) in [("phi", phi), ("w", w)] {
        writeln!(out, "SCALARS {} double 1", name).map_err(io)?;
        writeln!(out, "LOOKUP_TABLE default").map_err(io)?;
        for v in field {
            writeln!(out, "{:e}", v).map_err(io)?;
        }
    }
    finish(out, path)
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestRun {
    pub created_unix: u64,
    pub elapsed_seconds: f64,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub surface_dofs: usize,
    pub volume_dofs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestWave {
    pub period: f64,
    pub wavelength: f64,
    pub celerity: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestSolves {
    pub laplace_solves: usize,
    pub laplace_total_iterations: usize,
    pub laplace_max_iterations: usize,
    pub mass_solves: usize,
    pub mass_total_iterations: usize,
    pub mass_max_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestFiles {
    pub probes: Vec<String>,
    pub snapshots: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub run: ManifestRun,
    pub wave: ManifestWave,
    pub solves: ManifestSolves,
    pub files: ManifestFiles,
    /// Verbatim text of the configuration that produced the run.
    pub config_text: String,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = toml::to_string_pretty(manifest)
        .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
    let mut w = create_file(path)?;
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    finish(w, path)
}
