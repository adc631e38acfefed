//! Implicit Euler time stepping with a Picard linearization of the
//! regularized transport term.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::diagnostics::{self, DiagnosticsRecord, PicardStats, RecordContext};
use crate::fem::{FemOperators, NodalField};
use crate::math;
use crate::mesh::{Mesh, DIM};
use crate::nonlinearity::{theta_diagonal, CutoffParams};
use crate::sparse::{Cholesky, CsrMatrix};
use crate::spectral::SpectralDecomposition;
use crate::{Error, Result};

/// Slack allowed when checking the smoothed initial datum against
/// `[0, ‖ρ_0‖∞]`, relative to `max(1, ‖ρ_0‖∞)`.
pub const INITIAL_BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// `ρ_t = Δρ − ∇·(ρ∇c)`.
    Standard,
    /// Rescaled equation with the confining drift `λ ∇·(yρ)` and
    /// diffusion coefficient `epsilon`.
    SelfSimilar { lambda_drift: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub s: f64,
    pub dt: f64,
    pub t_final: f64,
    pub cutoff: CutoffParams,
    pub epsilon: f64,
    pub mode: Mode,
    pub picard_tol: f64,
    pub picard_max: usize,
    /// Keep every `k`-th state (plus the last) in [`RunOutput::snapshots`];
    /// 0 keeps none.
    pub snapshot_every: usize,
}

impl SolverConfig {
    pub fn standard(s: f64, dt: f64, t_final: f64, cutoff: CutoffParams) -> Self {
        Self {
            s,
            dt,
            t_final,
            cutoff,
            epsilon: 1.0,
            mode: Mode::Standard,
            picard_tol: 1e-10,
            picard_max: 100,
            snapshot_every: 0,
        }
    }

    /// Self-similar variables with the default drift `λ = 1/(d + 2 − 2s)`.
    pub fn self_similar(s: f64, dt: f64, t_final: f64, cutoff: CutoffParams, epsilon: f64) -> Self {
        Self {
            epsilon,
            mode: Mode::SelfSimilar { lambda_drift: diagnostics::self_similar_exponent(s, DIM) },
            ..Self::standard(s, dt, t_final, cutoff)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidParameter(msg));
        if !(self.s > 0.0 && self.s < 1.0) {
            return bad(format!("s = {} must lie in (0, 1)", self.s));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return bad(format!("T = {} must be at least dt = {}", self.t_final, self.dt));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon = {} must be positive", self.epsilon));
        }
        if !(self.picard_tol > 0.0) || self.picard_max == 0 {
            return bad("Picard tolerance and iteration cap must be positive".into());
        }
        if let Mode::SelfSimilar { lambda_drift } = self.mode {
            if !lambda_drift.is_finite() {
                return bad(format!("drift coefficient {lambda_drift} is not finite"));
            }
        }
        let n = self.t_final / self.dt;
        if (n - math::round(n)).abs() > 1e-9 * n.max(1.0) {
            return bad(format!("T = {} is not a multiple of dt = {}", self.t_final, self.dt));
        }
        Ok(())
    }

    pub fn num_steps(&self) -> usize {
        math::round(self.t_final / self.dt) as usize
    }

    fn diffusion(&self) -> f64 {
        match self.mode {
            Mode::Standard => 1.0,
            Mode::SelfSimilar { .. } => self.epsilon,
        }
    }
}

/// Mesh, finite element operators and the spectral decomposition of the
/// discrete Laplacian, built once per mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub ops: FemOperators,
    pub spectral: SpectralDecomposition,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Result<Self> {
        let ops = FemOperators::assemble(&mesh);
        let spectral = SpectralDecomposition::compute(&ops.stiffness, &ops.mass)?;
        Ok(Self { mesh, ops, spectral })
    }

    fn check(&self, field: &NodalField) -> Result<()> {
        field.check(self.mesh.tag(), self.mesh.num_vertices())
    }

    pub(crate) fn record_context(&self, cutoff: CutoffParams, s: f64) -> RecordContext<'_> {
        RecordContext {
            lumped: &self.ops.lumped,
            mass: &self.ops.mass,
            stiffness: &self.ops.stiffness,
            spectral: &self.spectral,
            cutoff,
            s,
        }
    }
}

/// One diffusion step `(M_L + Δt K) ρ = M_L ρ_0` applied to a nonnegative
/// datum. On weakly acute meshes the result stays in `[0, ‖ρ_0‖∞]`.
pub fn smooth_initial_datum(rho0: &NodalField, dt: f64, ops: &FemOperators) -> Result<NodalField> {
    rho0.check(ops.lumped.mesh_tag(), ops.lumped.diag().len())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    if let Some((i, &v)) = rho0.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::InitialBounds { vertex: i, value: v, upper: rho0.linf() });
    }
    let ml = ops.lumped.diag();
    let a = ops.stiffness.matrix().scaled_plus_diagonal(dt, ml);
    let mut x: Vec<f64> = rho0.values().iter().zip(ml).map(|(r, m)| r * m).collect();
    Cholesky::new(&a)?.solve(&mut x)?;
    let upper = rho0.linf();
    let slack = INITIAL_BOUND_TOL * upper.max(1.0);
    if let Some((i, &v)) = x.iter().enumerate().find(|(_, v)| !(**v >= -slack && **v <= upper + slack)) {
        return Err(Error::InitialBounds { vertex: i, value: v, upper });
    }
    Ok(NodalField::from_parts(rho0.mesh_tag(), x))
}

/// `b_i = Σ_K |K| (Θ_K ∇c)·∇φ_i` for the transport term.
pub fn assemble_transport_rhs(rho: &NodalField, c: &NodalField, cutoff: CutoffParams, mesh: &Mesh) -> Result<Vec<f64>> {
    let n = mesh.num_vertices();
    rho.check(mesh.tag(), n)?;
    c.check(mesh.tag(), n)?;
    let mut b = vec![0.0; n];
    transport_into(rho.values(), c.values(), cutoff, mesh, &mut b);
    Ok(b)
}

fn transport_into(rho: &[f64], c: &[f64], cutoff: CutoffParams, mesh: &Mesh, b: &mut [f64]) {
    for (k, t) in mesh.triangles().iter().enumerate() {
        let [i0, i1, i2] = t.0;
        let g = mesh.basis_gradients(k);
        let th = theta_diagonal([rho[i0], rho[i1], rho[i2]], cutoff);
        // Θ∇c = (Bᵀ)⁻¹ Θ̃ Bᵀ∇c, and the columns of (Bᵀ)⁻¹ are ∇φ_1, ∇φ_2.
        let w1 = th[0] * (c[i1] - c[i0]);
        let w2 = th[1] * (c[i2] - c[i0]);
        let flux = [w1 * g[1][0] + w2 * g[2][0], w1 * g[1][1] + w2 * g[2][1]];
        let area = mesh.area(k);
        for (a, &i) in t.0.iter().enumerate() {
            b[i] += area * (flux[0] * g[a][0] + flux[1] * g[a][1]);
        }
    }
}

/// `d_i = −λ Σ_K |K| ρ(y_K) y_K·∇φ_i` for the confining drift, with
/// barycentre quadrature.
pub fn assemble_drift_rhs(rho: &NodalField, lambda: f64, mesh: &Mesh) -> Result<Vec<f64>> {
    let n = mesh.num_vertices();
    rho.check(mesh.tag(), n)?;
    let mut d = vec![0.0; n];
    drift_into(rho.values(), lambda, mesh, &mut d);
    Ok(d)
}

fn drift_into(rho: &[f64], lambda: f64, mesh: &Mesh, d: &mut [f64]) {
    for (k, t) in mesh.triangles().iter().enumerate() {
        let g = mesh.basis_gradients(k);
        let y = mesh.barycenter(k);
        let mean = t.0.iter().map(|&i| rho[i]).sum::<f64>() / 3.0;
        let w = -lambda * mesh.area(k) * mean;
        for (a, &i) in t.0.iter().enumerate() {
            d[i] += w * (y[0] * g[a][0] + y[1] * g[a][1]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutcome {
    pub rho: NodalField,
    /// Potential of the returned density.
    pub c: NodalField,
    pub iters: usize,
    pub residual: f64,
}

/// Time stepper with the stage matrix `M_L/Δt + εK` factored once.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    disc: &'a Discretization,
    cfg: SolverConfig,
    stage: Cholesky,
}

impl<'a> Stepper<'a> {
    pub fn new(disc: &'a Discretization, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let ml: Vec<f64> = disc.ops.lumped.diag().iter().map(|m| m / cfg.dt).collect();
        let a: CsrMatrix = disc.ops.stiffness.matrix().scaled_plus_diagonal(cfg.diffusion(), &ml);
        Ok(Self { disc, cfg, stage: Cholesky::new(&a)? })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn potential(&self, rho: &NodalField) -> Result<NodalField> {
        self.disc.spectral.solve_fractional_poisson(&self.disc.ops.mass, rho, self.cfg.s)
    }

    /// Advances `rho_prev` by one step. Θ and `c` are lagged at the previous
    /// iterate; iteration stops once `‖ρ^{k+1} − ρ^k‖∞ ≤ tol (1 + ‖ρ^k‖∞)`.
    pub fn picard_step(&self, rho_prev: &NodalField) -> Result<PicardOutcome> {
        self.disc.check(rho_prev)?;
        let c_prev = self.potential(rho_prev)?;
        self.iterate(rho_prev, c_prev)
    }

    fn iterate(&self, rho_prev: &NodalField, c_prev: NodalField) -> Result<PicardOutcome> {
        let disc = self.disc;
        let n = disc.mesh.num_vertices();
        let base: Vec<f64> =
            rho_prev.values().iter().zip(disc.ops.lumped.diag()).map(|(r, m)| m * r / self.cfg.dt).collect();
        let mut rho = rho_prev.clone();
        let mut c = c_prev;
        let mut rhs = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for iter in 1..=self.cfg.picard_max {
            rhs.copy_from_slice(&base);
            transport_into(rho.values(), c.values(), self.cfg.cutoff, &disc.mesh, &mut rhs);
            if let Mode::SelfSimilar { lambda_drift } = self.cfg.mode {
                drift_into(rho.values(), lambda_drift, &disc.mesh, &mut rhs);
            }
            self.stage.solve(&mut rhs)?;
            if let Some((i, &v)) = rhs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite { vertex: i, value: v });
            }
            residual = rhs.iter().zip(rho.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = 1.0 + rho.linf();
            rho = NodalField::from_parts(rho.mesh_tag(), rhs.clone());
            c = self.potential(&rho)?;
            if residual <= self.cfg.picard_tol * scale {
                return Ok(PicardOutcome { rho, c, iters: iter, residual });
            }
        }
        Err(Error::PicardNotConverged { iters: self.cfg.picard_max, residual })
    }

    /// Runs all steps from `rho0`, calling `observer` after each one (and
    /// once for the initial state with `step == 0`).
    /// Solver errors are wrapped with the failing step; observer errors are
    /// passed through unchanged.
    pub fn run_with<E, F>(&self, rho0: &NodalField, mut observer: F) -> core::result::Result<Vec<DiagnosticsRecord>, E>
    where
        E: From<Error>,
        F: FnMut(&StepState<'_>) -> core::result::Result<(), E>,
    {
        let ctx = self.disc.record_context(self.cfg.cutoff, self.cfg.s);
        let mut rho = rho0.clone();
        let mut c = self.potential(&rho)?;
        let first = DiagnosticsRecord::compute(&ctx, 0, 0.0, &rho, &c, PicardStats::default())?;
        observer(&StepState { record: &first, rho: &rho, c: &c })?;
        let mut records = vec![first];
        let steps = self.cfg.num_steps();
        for step in 1..=steps {
            let wrap = |e: Error| Error::Step { step, source: alloc::boxed::Box::new(e) };
            let out = self.iterate(&rho, c).map_err(wrap)?;
            rho = out.rho;
            c = out.c;
            let stats = PicardStats { iters: out.iters, residual: out.residual };
            let rec =
                DiagnosticsRecord::compute(&ctx, step, step as f64 * self.cfg.dt, &rho, &c, stats).map_err(wrap)?;
            observer(&StepState { record: &rec, rho: &rho, c: &c })?;
            records.push(rec);
        }
        Ok(records)
    }
}

/// State handed to a [`Stepper::run_with`] observer.
#[derive(Debug, Clone, Copy)]
pub struct StepState<'s> {
    pub record: &'s DiagnosticsRecord,
    pub rho: &'s NodalField,
    pub c: &'s NodalField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub rho: NodalField,
    pub c: NodalField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_rho: NodalField,
    pub final_c: NodalField,
    /// Cut-off actually used, after raising `L` to `2‖ρ_0‖∞` if needed.
    pub cutoff: CutoffParams,
}

/// Cut-off with `L` raised to at least `2‖ρ_0‖∞`.
pub fn effective_cutoff(cutoff: CutoffParams, rho0: &NodalField) -> Result<CutoffParams> {
    let l = cutoff.l_cap().max(2.0 * rho0.linf());
    CutoffParams::new(cutoff.delta(), l)
}

/// Smooths `rho0`, then integrates to `t_final`.
pub fn run(cfg: &SolverConfig, rho0: &NodalField, disc: &Discretization) -> Result<RunOutput> {
    cfg.validate()?;
    disc.check(rho0)?;
    let mut cfg = *cfg;
    cfg.cutoff = effective_cutoff(cfg.cutoff, rho0)?;
    let start = smooth_initial_datum(rho0, cfg.dt, &disc.ops)?;
    let stepper = Stepper::new(disc, cfg)?;
    let steps = cfg.num_steps();
    let mut snapshots = Vec::new();
    let mut last: Option<(NodalField, NodalField)> = None;
    let records = stepper.run_with(&start, |st| -> Result<()> {
        let k = st.record.step;
        if cfg.snapshot_every > 0 && (k % cfg.snapshot_every == 0 || k == steps) {
            snapshots.push(Snapshot { step: k, time: st.record.time, rho: st.rho.clone(), c: st.c.clone() });
        }
        if k == steps {
            last = Some((st.rho.clone(), st.c.clone()));
        }
        Ok(())
    })?;
    let (final_rho, final_c) = last.ok_or_else(|| Error::InvalidParameter("no steps taken".into()))?;
    Ok(RunOutput { records, snapshots, final_rho, final_c, cutoff: cfg.cutoff })
}

/// Single Picard-converged step from `rho_prev`.
pub fn picard_step(rho_prev: &NodalField, cfg: &SolverConfig, disc: &Discretization) -> Result<PicardOutcome> {
    Stepper::new(disc, *cfg)?.picard_step(rho_prev)
}
