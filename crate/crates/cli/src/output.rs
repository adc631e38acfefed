//! CSV and JSON artifacts. Floats are written with `{:e}`, which is the
//! shortest representation that parses back to the same bits.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use fpme_core::diagnostics::DiagnosticsRecord;
use fpme_core::fem::NodalField;
use fpme_core::mesh::Mesh;
use fpme_core::sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DIAG_HEADER: &str = "step,time,mass,linf,min_val,neg_measure,entropy_reg,entropy,energy,grad_product,hs_norm_c,picard_iters,picard_residual";
pub const SNAPSHOT_HEADER: &str = "node,x,y,rho,c";
pub const VERTICES_HEADER: &str = "id,x,y";
pub const TRIANGLES_HEADER: &str = "id,v0,v1,v2";
pub const COO_HEADER: &str = "row,col,value";

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(CliError::io(path))?))
}

/// Writes a header and rows, surfacing I/O errors with the file path.
fn write_csv<I>(path: &Path, header: &str, rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = String>,
{
    let mut w = create(path)?;
    let io = |e| CliError::Io { path: path.to_path_buf(), source: e };
    writeln!(w, "{header}").map_err(io)?;
    for row in rows {
        writeln!(w, "{row}").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn diag_row(r: &DiagnosticsRecord) -> String {
    format!(
        "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
        r.step,
        r.time,
        r.mass,
        r.linf,
        r.min_val,
        r.neg_measure,
        r.entropy_reg,
        r.entropy,
        r.energy,
        r.grad_product,
        r.hs_norm_c,
        r.picard_iters,
        r.picard_residual
    )
}

/// Streams `diag.csv` one record at a time.
pub struct DiagWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl DiagWriter {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let mut out = create(path)?;
        writeln!(out, "{DIAG_HEADER}").map_err(CliError::io(path))?;
        Ok(Self { path: path.to_path_buf(), out })
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> Result<(), CliError> {
        writeln!(self.out, "{}", diag_row(r)).map_err(CliError::io(&self.path))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(CliError::io(&self.path))
    }
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<(), CliError> {
    write_csv(path, DIAG_HEADER, records.iter().map(diag_row))
}

/// Lines after the header, each split on commas and checked for `width`.
fn read_rows(path: &Path, header: &str, width: usize) -> Result<Vec<(usize, Vec<String>)>, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: usize, msg: String| CliError::Parse { path: path.to_path_buf(), line, msg };
    let first = lines.next().transpose().map_err(CliError::io(path))?.unwrap_or_default();
    if first != header {
        return Err(parse_err(1, format!("expected header `{header}`, found `{first}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(CliError::io(path))?;
        let fields: Vec<String> = line.split(',').map(str::to_owned).collect();
        if fields.len() != width {
            return Err(parse_err(i + 2, format!("expected {width} columns, found {}", fields.len())));
        }
        rows.push((i + 2, fields));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, text: &str) -> Result<T, CliError> {
    text.parse().map_err(|_| CliError::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("column {name}: cannot parse `{text}`"),
    })
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>, CliError> {
    let names: Vec<&str> = DIAG_HEADER.split(',').collect();
    read_rows(path, DIAG_HEADER, names.len())?
        .into_iter()
        .map(|(line, f)| {
            let x = |i: usize| field::<f64>(path, line, names[i], &f[i]);
            Ok(DiagnosticsRecord {
                step: field(path, line, names[0], &f[0])?,
                time: x(1)?,
                mass: x(2)?,
                linf: x(3)?,
                min_val: x(4)?,
                neg_measure: x(5)?,
                entropy_reg: x(6)?,
                entropy: x(7)?,
                energy: x(8)?,
                grad_product: x(9)?,
                hs_norm_c: x(10)?,
                picard_iters: field(path, line, names[11], &f[11])?,
                picard_residual: x(12)?,
            })
        })
        .collect()
}

pub fn snapshot_name(step: usize) -> String {
    format!("snap_{step:06}.csv")
}

/// Writes `snap_{step:06}.csv` into `dir` and returns its path.
pub fn write_snapshot(
    dir: &Path,
    step: usize,
    mesh: &Mesh,
    rho: &NodalField,
    c: &NodalField,
) -> Result<PathBuf, CliError> {
    let n = mesh.num_vertices();
    if rho.len() != n || c.len() != n || rho.mesh_tag() != mesh.tag() || c.mesh_tag() != mesh.tag() {
        return Err(fpme_core::Error::MeshMismatch.into());
    }
    let path = dir.join(snapshot_name(step));
    let rows = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{i},{:e},{:e},{:e},{:e}", p[0], p[1], rho.values()[i], c.values()[i]));
    write_csv(&path, SNAPSHOT_HEADER, rows)?;
    Ok(path)
}

/// Reads a snapshot back as `(rho, c)` on `mesh`; node ids and coordinates
/// must match the mesh exactly.
pub fn read_snapshot(path: &Path, mesh: &Mesh) -> Result<(NodalField, NodalField), CliError> {
    let rows = read_rows(path, SNAPSHOT_HEADER, 5)?;
    if rows.len() != mesh.num_vertices() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: rows.len() + 1,
            msg: format!("{} rows for a mesh with {} vertices", rows.len(), mesh.num_vertices()),
        });
    }
    let mut rho = Vec::with_capacity(rows.len());
    let mut c = Vec::with_capacity(rows.len());
    for (i, (line, f)) in rows.iter().enumerate() {
        let node: usize = field(path, *line, "node", &f[0])?;
        let x: f64 = field(path, *line, "x", &f[1])?;
        let y: f64 = field(path, *line, "y", &f[2])?;
        if node != i || [x, y] != mesh.vertex(i) {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: *line,
                msg: format!("node {node} at ({x}, {y}) does not match mesh vertex {i}"),
            });
        }
        rho.push(field(path, *line, "rho", &f[3])?);
        c.push(field(path, *line, "c", &f[4])?);
    }
    Ok((NodalField::new(mesh, rho)?, NodalField::new(mesh, c)?))
}

/// `vertices.csv` and `triangles.csv`.
pub fn write_mesh(dir: &Path, mesh: &Mesh) -> Result<(), CliError> {
    write_csv(
        &dir.join("vertices.csv"),
        VERTICES_HEADER,
        mesh.vertices().iter().enumerate().map(|(i, p)| format!("{i},{:e},{:e}", p[0], p[1])),
    )?;
    write_csv(
        &dir.join("triangles.csv"),
        TRIANGLES_HEADER,
        mesh.triangles().iter().enumerate().map(|(i, t)| format!("{i},{},{},{}", t.0[0], t.0[1], t.0[2])),
    )
}

/// Coordinate-format dump of a sparse matrix, row-major.
pub fn write_coo(path: &Path, a: &CsrMatrix) -> Result<(), CliError> {
    write_csv(path, COO_HEADER, a.triplets().map(|(i, j, v)| format!("{i},{j},{v:e}")))
}

pub fn write_eigenvalues(path: &Path, eigenvalues: &[f64]) -> Result<(), CliError> {
    write_csv(path, "k,lambda", eigenvalues.iter().enumerate().map(|(k, l)| format!("{},{l:e}", k + 1)))
}

/// Generic numeric table.
pub fn write_table(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), CliError> {
    write_csv(path, header, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub num_vertices: usize,
    pub num_triangles: usize,
    pub h: f64,
}

impl MeshSummary {
    pub fn of(mesh: &Mesh) -> Self {
        Self { num_vertices: mesh.num_vertices(), num_triangles: mesh.num_triangles(), h: mesh.h() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub version: String,
    pub mesh: MeshSummary,
    pub wall_clock_seconds: f64,
    /// Paths relative to the output directory.
    pub diagnostics: Option<String>,
    pub snapshots: Vec<String>,
    /// Command-specific results.
    pub results: serde_json::Value,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes `manifest.json` through a temporary file and a rename, so a
/// reader never sees a partial manifest.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf, CliError> {
    let path = dir.join(MANIFEST_NAME);
    let tmp = dir.join(".manifest.json.tmp");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&tmp, text + "\n").map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, &path).map_err(CliError::io(&path))?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse { path, line: e.line(), msg: e.to_string() })
}
