//! Subcommand drivers. Each writes its artifacts into the output directory
//! and finishes with `manifest.json`.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use fpme_core::diagnostics::{decay_rate_fit, profile_distance, DiagnosticsRecord, ProfileNorm};
use fpme_core::fem::{interpolate, transfer, FemOperators, NodalField};
use fpme_core::mesh::Mesh;
use fpme_core::stepper::{effective_cutoff, smooth_initial_datum, Discretization, SolverConfig, Stepper};
use serde::Serialize;
use serde_json::json;

use crate::config::{EigConfig, FracPoissonConfig, RhsConfig, RunConfig, SelfSimConfig, SweepCell, SweepConfig};
use crate::output::{self, DiagWriter, Manifest, MeshSummary};
use crate::CliError;

pub const DIAG_NAME: &str = "diag.csv";

fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn echo<T: Serialize>(cfg: &T) -> serde_json::Value {
    serde_json::to_value(cfg).expect("configs serialize")
}

/// What a time integration produced, besides the files it wrote.
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<String>,
    pub final_rho: NodalField,
    pub l_cap: f64,
}

/// Smooths `rho0` and integrates, streaming `diag.csv` and snapshots into
/// `dir`. `extra` sees every state after it is written.
pub fn integrate(
    disc: &Discretization,
    cfg: &SolverConfig,
    rho0: &NodalField,
    dir: &Path,
    snapshots: bool,
    mut extra: impl FnMut(&fpme_core::stepper::StepState<'_>) -> Result<(), CliError>,
) -> Result<Trajectory, CliError> {
    let mut cfg = *cfg;
    cfg.cutoff = effective_cutoff(cfg.cutoff, rho0)?;
    let start = smooth_initial_datum(rho0, cfg.dt, &disc.ops)?;
    let stepper = Stepper::new(disc, cfg)?;
    let steps = cfg.num_steps();
    let mut diag = DiagWriter::create(&dir.join(DIAG_NAME))?;
    let mut snaps = Vec::new();
    let mut last = None;
    let records = stepper.run_with(&start, |st| -> Result<(), CliError> {
        diag.write(st.record)?;
        let k = st.record.step;
        if snapshots && cfg.snapshot_every > 0 && (k % cfg.snapshot_every == 0 || k == steps) {
            output::write_snapshot(dir, k, &disc.mesh, st.rho, st.c)?;
            snaps.push(output::snapshot_name(k));
        }
        if k == steps {
            last = Some(st.rho.clone());
        }
        extra(st)
    })?;
    diag.finish()?;
    let final_rho = last.expect("at least one step is taken");
    Ok(Trajectory { records, snapshots: snaps, final_rho, l_cap: cfg.cutoff.l_cap() })
}

/// Entropy decay rate over the tail half of the run, when defined.
fn entropy_rate(records: &[DiagnosticsRecord]) -> Option<f64> {
    let series: Vec<(f64, f64)> = records.iter().map(|r| (r.time, r.entropy)).collect();
    decay_rate_fit(&series).ok()
}

fn manifest(command: &str, config: serde_json::Value, mesh: &Mesh, start: Instant) -> Manifest {
    Manifest {
        command: command.into(),
        config,
        version: version(),
        mesh: MeshSummary::of(mesh),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        diagnostics: None,
        snapshots: Vec::new(),
        results: serde_json::Value::Null,
    }
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let solver = cfg.solver()?;
    let mesh = cfg.mesh.build()?;
    let rho0 = cfg.initial_datum(&mesh)?;
    ensure_dir(out)?;
    output::write_mesh(out, &mesh)?;
    let disc = Discretization::new(mesh)?;
    let traj = integrate(&disc, &solver, &rho0, out, true, |_| Ok(()))?;
    let last = traj.records.last().expect("nonempty");
    let mut m = manifest("run", echo(cfg), &disc.mesh, start);
    m.diagnostics = Some(DIAG_NAME.into());
    m.snapshots = traj.snapshots;
    m.results = json!({
        "steps": last.step,
        "l_cap": traj.l_cap,
        "initial_linf": rho0.linf(),
        "final_mass": last.mass,
        "max_picard_iters": traj.records.iter().map(|r| r.picard_iters).max(),
        "entropy_decay": {"window": "tail half of the entropy series", "rate": entropy_rate(&traj.records)},
    });
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    output::write_manifest(out, &m)?;
    Ok(m)
}

pub const PROFILE_HEADER: &str = "step,time,l1,l2";

pub fn selfsim(cfg: &SelfSimConfig, out: &Path) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let solver = cfg.solver()?;
    let mesh = cfg.mesh.build()?;
    let rho0 = cfg.initial_datum(&mesh)?;
    ensure_dir(out)?;
    output::write_mesh(out, &mesh)?;
    let disc = Discretization::new(mesh)?;
    let mut rows = Vec::new();
    let mut last = (f64::NAN, f64::NAN);
    let traj = integrate(&disc, &solver, &rho0, out, true, |st| {
        let l1 = profile_distance(st.rho, cfg.s, &disc.mesh, &disc.ops.lumped, ProfileNorm::L1)?;
        let l2 = profile_distance(st.rho, cfg.s, &disc.mesh, &disc.ops.lumped, ProfileNorm::L2)?;
        rows.push(format!("{},{:e},{l1:e},{l2:e}", st.record.step, st.record.time));
        last = (l1, l2);
        Ok(())
    })?;
    output::write_table(&out.join("profile_distance.csv"), PROFILE_HEADER, rows)?;
    let rec = traj.records.last().expect("nonempty");
    let mut m = manifest("selfsim", echo(cfg), &disc.mesh, start);
    m.diagnostics = Some(DIAG_NAME.into());
    m.snapshots = traj.snapshots;
    m.results = json!({
        "steps": rec.step,
        "l_cap": traj.l_cap,
        "lambda_drift": match solver.mode { fpme_core::stepper::Mode::SelfSimilar { lambda_drift } => lambda_drift, _ => f64::NAN },
        "final_mass": rec.mass,
        "profile_distance": {"file": "profile_distance.csv", "final_l1": last.0, "final_l2": last.1},
    });
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    output::write_manifest(out, &m)?;
    Ok(m)
}

/// Right-hand side and, for Neumann eigenfunctions, the exact potential.
fn rhs_and_exact(rhs: &RhsConfig, mesh: &Mesh, s: f64) -> Result<(NodalField, Option<NodalField>), CliError> {
    let b = mesh.bounds();
    let (lx, ly) = (b.xmax - b.xmin, b.ymax - b.ymin);
    match *rhs {
        RhsConfig::Cosine { kx, ky } => {
            let (wx, wy) = (kx as f64 * PI / lx, ky as f64 * PI / ly);
            let f = move |p: [f64; 2]| (wx * (p[0] - b.xmin)).cos() * (wy * (p[1] - b.ymin)).cos();
            let mu = wx * wx + wy * wy;
            let scale = if mu > 0.0 { -mu.powf(-s) } else { 0.0 };
            Ok((interpolate(f, mesh)?, Some(interpolate(|p| scale * f(p), mesh)?)))
        }
        RhsConfig::Gaussian { sigma, center } => {
            if !(sigma > 0.0) {
                return Err(CliError::Config(format!("rhs.sigma = {sigma} must be positive")));
            }
            let f =
                |p: [f64; 2]| (-((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)) / (2.0 * PI * sigma)).exp();
            Ok((interpolate(f, mesh)?, None))
        }
    }
}

pub fn fracpoisson(cfg: &FracPoissonConfig, out: &Path) -> Result<Manifest, CliError> {
    let start = Instant::now();
    if !(cfg.s > 0.0 && cfg.s < 1.0) {
        return Err(CliError::Config(format!("s = {} must lie in (0, 1)", cfg.s)));
    }
    let mesh = cfg.mesh.build()?;
    let (f, exact) = rhs_and_exact(&cfg.rhs, &mesh, cfg.s)?;
    ensure_dir(out)?;
    let disc = Discretization::new(mesh)?;
    let c = disc.spectral.solve_fractional_poisson(&disc.ops.mass, &f, cfg.s)?;
    let mesh = &disc.mesh;
    let rows = (0..mesh.num_vertices()).map(|i| {
        let p = mesh.vertex(i);
        let mut row = format!("{i},{:e},{:e},{:e},{:e}", p[0], p[1], f.values()[i], c.values()[i]);
        if let Some(e) = &exact {
            row.push_str(&format!(",{:e}", e.values()[i]));
        }
        row
    });
    let header = if exact.is_some() { "node,x,y,f,c,c_exact" } else { "node,x,y,f,c" };
    output::write_table(&out.join("solution.csv"), header, rows)?;
    let error = exact.as_ref().map(|e| {
        let diff: Vec<f64> = c.values().iter().zip(e.values()).map(|(a, b)| a - b).collect();
        let abs = disc.ops.mass.l2_norm(&diff);
        let norm = disc.ops.mass.l2_norm(e.values());
        json!({"l2": abs, "relative_l2": if norm > 0.0 { abs / norm } else { abs }})
    });
    let mut m = manifest("fracpoisson", echo(cfg), mesh, start);
    m.results = json!({"solution": "solution.csv", "error": error});
    output::write_manifest(out, &m)?;
    Ok(m)
}

pub fn eig(cfg: &EigConfig, out: &Path) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let mesh = cfg.mesh.build()?;
    ensure_dir(out)?;
    output::write_mesh(out, &mesh)?;
    let ops = FemOperators::assemble(&mesh);
    if cfg.export_matrices {
        output::write_coo(&out.join("stiffness.coo"), ops.stiffness.matrix())?;
        output::write_coo(&out.join("mass.coo"), ops.mass.matrix())?;
    }
    let disc = Discretization::new(mesh)?;
    let lambdas = disc.spectral.eigenvalues();
    output::write_eigenvalues(&out.join("eigenvalues.csv"), lambdas)?;
    let k = cfg.vectors.min(disc.spectral.num_modes());
    if k > 0 {
        let vecs: Vec<Vec<f64>> = (0..k).map(|j| disc.spectral.vector(j)).collect();
        let header = std::iter::once("node".to_string()).chain((1..=k).map(|j| format!("v{j}"))).collect::<Vec<_>>();
        let rows = (0..disc.mesh.num_vertices()).map(|i| {
            std::iter::once(i.to_string())
                .chain(vecs.iter().map(|v| format!("{:e}", v[i])))
                .collect::<Vec<_>>()
                .join(",")
        });
        output::write_table(&out.join("eigenvectors.csv"), &header.join(","), rows)?;
    }
    let mut m = manifest("eig", echo(cfg), &disc.mesh, start);
    m.results = json!({
        "lambda_1": lambdas[0],
        "lambda_max": lambdas[lambdas.len() - 1],
        "num_modes": lambdas.len(),
        "zero_mode": disc.spectral.zero_mode(),
        "eigenvectors_written": k,
    });
    output::write_manifest(out, &m)?;
    Ok(m)
}

/// Result of one sweep cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: SweepCell,
    pub dir: String,
    pub h: f64,
    pub steps: usize,
    pub max_picard_iters: usize,
    pub final_mass: f64,
    pub wall_seconds: f64,
    pub l2_error: f64,
}

pub const CELLS_HEADER: &str = "cell,dir,nx,h,dt,delta,epsilon,steps,max_picard_iters,final_mass,wall_seconds";
pub const ERROR_HEADER: &str = "nx,h,dt,delta,epsilon,l2_error";

/// Runs every cell, then measures each final state against the reference
/// cell on the reference mesh in the consistent-mass L² norm.
pub fn sweep(cfg: &SweepConfig, out: &Path) -> Result<(Manifest, Vec<CellResult>), CliError> {
    let start = Instant::now();
    cfg.validate()?;
    ensure_dir(out)?;
    let cells = cfg.cells();
    let reference = cfg.reference();
    // Cells are nx-major, so one discretization is live at a time.
    let mut disc: Option<(usize, Discretization)> = None;
    let mut finals: Vec<(usize, NodalField)> = Vec::with_capacity(cells.len());
    let mut results = Vec::with_capacity(cells.len());
    for (idx, &cell) in cells.iter().enumerate() {
        let t = Instant::now();
        if disc.as_ref().is_none_or(|(nx, _)| *nx != cell.nx) {
            drop(disc.take()); // release the old dense matrices first
            disc = Some((cell.nx, Discretization::new(cfg.mesh(cell.nx).build()?)?));
        }
        let d = &disc.as_ref().expect("built above").1;
        let solver = cfg.solver(cell)?;
        let rho0 = cfg.initial.build(&d.mesh, cfg.default_mass())?;
        let name = format!("cell_{idx:03}");
        let dir = out.join(&name);
        ensure_dir(&dir)?;
        let traj = integrate(d, &solver, &rho0, &dir, false, |_| Ok(()))?;
        let c = d.spectral.solve_fractional_poisson(&d.ops.mass, &traj.final_rho, cfg.s)?;
        output::write_snapshot(&dir, solver.num_steps(), &d.mesh, &traj.final_rho, &c)?;
        let last = traj.records.last().expect("nonempty");
        results.push(CellResult {
            cell,
            dir: name,
            h: d.mesh.h(),
            steps: last.step,
            max_picard_iters: traj.records.iter().map(|r| r.picard_iters).max().unwrap_or(0),
            final_mass: last.mass,
            wall_seconds: t.elapsed().as_secs_f64(),
            l2_error: f64::NAN,
        });
        finals.push((cell.nx, traj.final_rho));
    }
    drop(disc);

    let ref_idx = cells.iter().position(|c| *c == reference).expect("reference is a grid cell");
    let ref_mesh = cfg.mesh(reference.nx).build()?;
    let ref_mass = fpme_core::fem::assemble_consistent_mass(&ref_mesh);
    let meshes: std::collections::BTreeMap<usize, Mesh> =
        cfg.nx.iter().map(|&nx| Ok((nx, cfg.mesh(nx).build()?))).collect::<Result<_, CliError>>()?;
    let ref_rho = &finals[ref_idx].1;
    for (res, (nx, rho)) in results.iter_mut().zip(&finals) {
        let on_ref = transfer(rho, &meshes[nx], &ref_mesh)?;
        let diff: Vec<f64> = on_ref.values().iter().zip(ref_rho.values()).map(|(a, b)| a - b).collect();
        res.l2_error = ref_mass.l2_norm(&diff);
    }

    output::write_table(
        &out.join("cells.csv"),
        CELLS_HEADER,
        results.iter().enumerate().map(|(i, r)| {
            format!(
                "{i},{},{},{:e},{:e},{:e},{:e},{},{},{:e},{:e}",
                r.dir,
                r.cell.nx,
                r.h,
                r.cell.dt,
                r.cell.delta,
                r.cell.epsilon,
                r.steps,
                r.max_picard_iters,
                r.final_mass,
                r.wall_seconds
            )
        }),
    )?;
    output::write_table(
        &out.join("error_matrix.csv"),
        ERROR_HEADER,
        results.iter().map(|r| {
            format!("{},{:e},{:e},{:e},{:e},{:e}", r.cell.nx, r.h, r.cell.dt, r.cell.delta, r.cell.epsilon, r.l2_error)
        }),
    )?;
    let mut m = manifest("sweep", echo(cfg), &ref_mesh, start);
    m.results = json!({
        "cells": results.len(),
        "reference": {"cell": ref_idx, "nx": reference.nx, "dt": reference.dt, "delta": reference.delta, "epsilon": reference.epsilon},
        "error_matrix": "error_matrix.csv",
        "cell_table": "cells.csv",
    });
    output::write_manifest(out, &m)?;
    Ok((m, results))
}
