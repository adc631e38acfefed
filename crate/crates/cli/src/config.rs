//! JSON run configurations. Every struct rejects unknown keys.

use std::path::Path;

use fpme_core::diagnostics::barenblatt_mass;
use fpme_core::fem::{interpolate, NodalField};
use fpme_core::mesh::{build_structured_rect_mesh, Mesh, Pattern, Rect};
use fpme_core::nonlinearity::CutoffParams;
use fpme_core::stepper::{Mode, SolverConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_L_CAP: f64 = 2.0;
pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_PICARD_MAX: usize = 100;

/// Reads and validates a config file.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PatternName {
    #[default]
    RightDiagonal,
    Crisscross,
}

impl From<PatternName> for Pattern {
    fn from(p: PatternName) -> Self {
        match p {
            PatternName::RightDiagonal => Pattern::RightDiagonal,
            PatternName::Crisscross => Pattern::Crisscross,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// `[xmin, xmax, ymin, ymax]`.
    pub domain: [f64; 4],
    pub nx: usize,
    /// Defaults to `nx`.
    #[serde(default)]
    pub ny: Option<usize>,
    #[serde(default)]
    pub pattern: PatternName,
}

impl MeshConfig {
    pub fn rect(&self) -> Rect {
        let [a, b, c, d] = self.domain;
        Rect::new(a, b, c, d)
    }

    pub fn build(&self) -> Result<Mesh, CliError> {
        build_structured_rect_mesh(self.rect(), self.nx, self.ny.unwrap_or(self.nx), self.pattern.into())
            .map_err(|e| CliError::Config(format!("mesh: {e}")))
    }
}

/// Initial density, rescaled to total mass `mass`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// `exp(−|x − center|²/(2πσ))`.
    Gaussian {
        sigma: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default)]
        mass: Option<f64>,
    },
    Uniform {
        #[serde(default)]
        mass: Option<f64>,
    },
    /// Indicator of a disc.
    Disc {
        center: [f64; 2],
        radius: f64,
        #[serde(default)]
        mass: Option<f64>,
    },
}

impl InitialConfig {
    fn mass(&self) -> Option<f64> {
        match *self {
            Self::Gaussian { mass, .. } | Self::Uniform { mass } | Self::Disc { mass, .. } => mass,
        }
    }

    /// Nodal initial datum with the configured mass, or `default_mass`.
    pub fn build(&self, mesh: &Mesh, default_mass: f64) -> Result<NodalField, CliError> {
        let shape = |p: [f64; 2]| -> f64 {
            match *self {
                Self::Gaussian { sigma, center, .. } => {
                    let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                    (-r2 / (2.0 * std::f64::consts::PI * sigma)).exp()
                }
                Self::Uniform { .. } => 1.0,
                Self::Disc { center, radius, .. } => {
                    let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                    if r2 <= radius * radius {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        };
        if let Self::Gaussian { sigma, .. } = *self {
            if !(sigma > 0.0) {
                return Err(CliError::Config(format!("initial.sigma = {sigma} must be positive")));
            }
        }
        let mass = self.mass().unwrap_or(default_mass);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(CliError::Config(format!("initial.mass = {mass} must be positive")));
        }
        let raw = interpolate(shape, mesh)?;
        let lumped = fpme_core::fem::assemble_lumped_mass(mesh);
        let total = lumped.integral(raw.values());
        if !(total > 0.0) {
            return Err(CliError::Config("initial datum has no mass on this mesh".into()));
        }
        Ok(raw.map(|v| v * mass / total)?)
    }
}

/// `run`: the standard equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    /// Mass defaults to `|Ω|` (mean one).
    pub initial: InitialConfig,
    pub s: f64,
    pub delta: f64,
    /// Raised to `2‖ρ_0‖∞` when smaller.
    #[serde(default = "default_l_cap")]
    pub l_cap: f64,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max")]
    pub picard_max: usize,
    /// Snapshot every k-th step (and the last); 0 writes none.
    #[serde(default)]
    pub snapshot_every: usize,
}

/// `selfsim`: self-similar variables with drift and diffusion `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfSimConfig {
    pub mesh: MeshConfig,
    /// Mass defaults to that of the Barenblatt profile.
    #[serde(default = "uniform")]
    pub initial: InitialConfig,
    pub s: f64,
    pub delta: f64,
    #[serde(default = "default_l_cap")]
    pub l_cap: f64,
    pub dt: f64,
    pub t_final: f64,
    pub epsilon: f64,
    /// Defaults to `1/(d + 2 − 2s)`.
    #[serde(default)]
    pub lambda_drift: Option<f64>,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max")]
    pub picard_max: usize,
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_l_cap() -> f64 {
    DEFAULT_L_CAP
}

fn default_picard_tol() -> f64 {
    DEFAULT_PICARD_TOL
}

fn default_picard_max() -> usize {
    DEFAULT_PICARD_MAX
}

fn uniform() -> InitialConfig {
    InitialConfig::Uniform { mass: None }
}

fn cutoff(delta: f64, l_cap: f64) -> Result<CutoffParams, CliError> {
    CutoffParams::new(delta, l_cap).map_err(|e| CliError::Config(e.to_string()))
}

fn checked(cfg: SolverConfig) -> Result<SolverConfig, CliError> {
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

impl RunConfig {
    pub fn solver(&self) -> Result<SolverConfig, CliError> {
        let mut cfg = SolverConfig::standard(self.s, self.dt, self.t_final, cutoff(self.delta, self.l_cap)?);
        cfg.picard_tol = self.picard_tol;
        cfg.picard_max = self.picard_max;
        cfg.snapshot_every = self.snapshot_every;
        checked(cfg)
    }

    pub fn initial_datum(&self, mesh: &Mesh) -> Result<NodalField, CliError> {
        self.initial.build(mesh, self.mesh.rect().area())
    }
}

impl SelfSimConfig {
    pub fn solver(&self) -> Result<SolverConfig, CliError> {
        let mut cfg =
            SolverConfig::self_similar(self.s, self.dt, self.t_final, cutoff(self.delta, self.l_cap)?, self.epsilon);
        if let Some(lambda_drift) = self.lambda_drift {
            cfg.mode = Mode::SelfSimilar { lambda_drift };
        }
        cfg.picard_tol = self.picard_tol;
        cfg.picard_max = self.picard_max;
        cfg.snapshot_every = self.snapshot_every;
        checked(cfg)
    }

    pub fn initial_datum(&self, mesh: &Mesh) -> Result<NodalField, CliError> {
        self.initial.build(mesh, barenblatt_mass(self.s, 2))
    }
}

/// Right-hand side of a single fractional Poisson solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhsConfig {
    /// `cos(kx π (x − xmin)/Lx) cos(ky π (y − ymin)/Ly)`, a Neumann
    /// eigenfunction; the exact potential is known.
    Cosine { kx: u32, ky: u32 },
    Gaussian {
        sigma: f64,
        #[serde(default)]
        center: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FracPoissonConfig {
    pub mesh: MeshConfig,
    pub s: f64,
    pub rhs: RhsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigConfig {
    pub mesh: MeshConfig,
    /// Number of leading eigenvectors written to `eigenvectors.csv`.
    #[serde(default)]
    pub vectors: usize,
    /// Also write `stiffness.coo` and `mass.coo`.
    #[serde(default)]
    pub export_matrices: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Standard,
    SelfSimilar,
}

/// Grid of runs over `nx × dt × delta × epsilon`; the reference is the
/// finest cell (largest `nx`, smallest `dt`, `delta` and `epsilon`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: SweepMode,
    pub domain: [f64; 4],
    #[serde(default)]
    pub pattern: PatternName,
    pub nx: Vec<usize>,
    pub dt: Vec<f64>,
    pub delta: Vec<f64>,
    /// Required in self-similar mode, must be absent in standard mode.
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub lambda_drift: Option<f64>,
    pub initial: InitialConfig,
    pub s: f64,
    #[serde(default = "default_l_cap")]
    pub l_cap: f64,
    pub t_final: f64,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max")]
    pub picard_max: usize,
}

/// One point of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub nx: usize,
    pub dt: f64,
    pub delta: f64,
    /// 1 in standard mode.
    pub epsilon: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if self.nx.is_empty() || self.dt.is_empty() || self.delta.is_empty() {
            return bad("sweep needs at least one value of nx, dt and delta");
        }
        match self.mode {
            SweepMode::Standard if !self.epsilon.is_empty() || self.lambda_drift.is_some() => {
                bad("epsilon and lambda_drift apply to self_similar sweeps only")
            }
            SweepMode::SelfSimilar if self.epsilon.is_empty() => bad("self_similar sweep needs epsilon values"),
            _ => Ok(()),
        }?;
        for cell in self.cells() {
            self.solver(cell)?;
        }
        Ok(())
    }

    pub fn mesh(&self, nx: usize) -> MeshConfig {
        MeshConfig { domain: self.domain, nx, ny: None, pattern: self.pattern }
    }

    pub fn cells(&self) -> Vec<SweepCell> {
        let eps: Vec<f64> = if self.epsilon.is_empty() { vec![1.0] } else { self.epsilon.clone() };
        let mut out = Vec::new();
        for &nx in &self.nx {
            for &dt in &self.dt {
                for &delta in &self.delta {
                    for &epsilon in &eps {
                        out.push(SweepCell { nx, dt, delta, epsilon });
                    }
                }
            }
        }
        out
    }

    pub fn reference(&self) -> SweepCell {
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        SweepCell {
            nx: self.nx.iter().copied().max().unwrap_or(0),
            dt: min(&self.dt),
            delta: min(&self.delta),
            epsilon: if self.epsilon.is_empty() { 1.0 } else { min(&self.epsilon) },
        }
    }

    pub fn solver(&self, cell: SweepCell) -> Result<SolverConfig, CliError> {
        let p = cutoff(cell.delta, self.l_cap)?;
        let mut cfg = match self.mode {
            SweepMode::Standard => SolverConfig::standard(self.s, cell.dt, self.t_final, p),
            SweepMode::SelfSimilar => {
                let mut c = SolverConfig::self_similar(self.s, cell.dt, self.t_final, p, cell.epsilon);
                if let Some(lambda_drift) = self.lambda_drift {
                    c.mode = Mode::SelfSimilar { lambda_drift };
                }
                c
            }
        };
        cfg.picard_tol = self.picard_tol;
        cfg.picard_max = self.picard_max;
        checked(cfg)
    }

    pub fn default_mass(&self) -> f64 {
        match self.mode {
            SweepMode::Standard => self.mesh(1).rect().area(),
            SweepMode::SelfSimilar => barenblatt_mass(self.s, 2),
        }
    }
}
