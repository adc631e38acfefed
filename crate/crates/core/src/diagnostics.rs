//! Per-step conserved and dissipated quantities, decay-rate fits and the
//! self-similar Barenblatt reference profile.

use alloc::format;
use alloc::vec::Vec;

use crate::fem::{ConsistentMass, LumpedMass, NodalField};
use crate::math;
use crate::mesh::Mesh;
use crate::nonlinearity::{g_entropy, g_reg, CutoffParams};
use crate::spectral::SpectralDecomposition;
use crate::{Error, Result};

/// One row of the diagnostics table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    /// `∫ ρ_h`.
    pub mass: f64,
    pub linf: f64,
    pub min_val: f64,
    /// `∫ π_h([ρ]_−²)`.
    pub neg_measure: f64,
    /// `∫ π_h(G_δ^L(ρ))`.
    pub entropy_reg: f64,
    /// `∫ π_h(G(ρ_+))`.
    pub entropy: f64,
    pub energy: f64,
    /// `a(c, ρ*)`; nonpositive for the repulsive potential.
    pub grad_product: f64,
    pub hs_norm_c: f64,
    pub picard_iters: usize,
    pub picard_residual: f64,
}

/// Picard statistics attached to a record.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PicardStats {
    pub iters: usize,
    pub residual: f64,
}

/// Operators a record is computed from.
#[derive(Debug, Clone, Copy)]
pub struct RecordContext<'a> {
    pub lumped: &'a LumpedMass,
    pub mass: &'a ConsistentMass,
    pub stiffness: &'a crate::fem::StiffnessMatrix,
    pub spectral: &'a SpectralDecomposition,
    pub cutoff: CutoffParams,
    pub s: f64,
}

impl DiagnosticsRecord {
    pub fn compute(
        ctx: &RecordContext<'_>,
        step: usize,
        time: f64,
        rho: &NodalField,
        c: &NodalField,
        picard: PicardStats,
    ) -> Result<Self> {
        let lumped = ctx.lumped;
        let r = rho.values();
        let mass = lumped.integral(r);
        let neg_measure = r
            .iter()
            .zip(lumped.diag())
            .map(|(&v, &m)| {
                let neg = v.min(0.0);
                m * neg * neg
            })
            .sum();
        let entropy_reg = r.iter().zip(lumped.diag()).map(|(&v, &m)| m * g_reg(v, ctx.cutoff)).sum();
        let entropy = clipped_entropy(rho, lumped)?;
        let interaction = -0.5 * ctx.mass.inner(r, c.values());
        let grad_product = ctx.stiffness.energy(c.values(), r);
        let cz = ctx.spectral.project(c)?;
        let hs_norm_c = ctx.spectral.sobolev_norms(ctx.mass, &cz, ctx.s)?.hs;
        Ok(Self {
            step,
            time,
            mass,
            linf: rho.linf(),
            min_val: rho.min(),
            neg_measure,
            entropy_reg,
            entropy,
            energy: entropy + interaction,
            grad_product,
            hs_norm_c,
            picard_iters: picard.iters,
            picard_residual: picard.residual,
        })
    }
}

fn clipped_entropy(rho: &NodalField, lumped: &LumpedMass) -> Result<f64> {
    let mut sum = 0.0;
    for (&v, &m) in rho.values().iter().zip(lumped.diag()) {
        sum += m * g_entropy(v.max(0.0))?;
    }
    Ok(sum)
}

/// Free energy `∫ π_h G(ρ_+) − ½ (c, ρ)`, the pairing taken in the
/// consistent L² product.
pub fn energy(rho: &NodalField, c: &NodalField, lumped: &LumpedMass, mass: &ConsistentMass) -> Result<f64> {
    rho.check(lumped.mesh_tag(), lumped.diag().len())?;
    c.check(lumped.mesh_tag(), lumped.diag().len())?;
    Ok(clipped_entropy(rho, lumped)? - 0.5 * mass.inner(rho.values(), c.values()))
}

/// Exponential rate `r` of `value ≈ A e^{−r t}`, from a least-squares line
/// through `ln value` over the later half of the series.
pub fn decay_rate_fit(series: &[(f64, f64)]) -> Result<f64> {
    if series.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 points, got {}", series.len())));
    }
    if let Some(&(t, v)) = series.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Fit(format!("nonpositive value {v} at t = {t}")));
    }
    let tail = &series[series.len() / 2..];
    let pts: Vec<(f64, f64)> = tail.iter().map(|&(t, v)| (t, math::ln(v))).collect();
    Ok(-least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Self-similar exponent `λ = 1/(d + 2 − 2s)`.
pub fn self_similar_exponent(s: f64, d: usize) -> f64 {
    1.0 / (d as f64 + 2.0 - 2.0 * s)
}

/// `k_{s,d} = d Γ(d/2) / ((d + 2s) 4^s Γ(2 − s) Γ(d/2 + 1 − s))`.
pub fn barenblatt_constant(s: f64, d: usize) -> f64 {
    let d = d as f64;
    d * math::gamma(d / 2.0)
        / ((d + 2.0 * s) * math::powf(4.0, s) * math::gamma(2.0 - s) * math::gamma(d / 2.0 + 1.0 - s))
}

/// `Φ(y) = k_{s,d} (1 − |y|²)_+^s`.
pub fn barenblatt_profile(y: &[f64], s: f64, d: usize) -> f64 {
    let r2: f64 = y.iter().map(|v| v * v).sum();
    if r2 >= 1.0 {
        0.0
    } else {
        barenblatt_constant(s, d) * math::powf(1.0 - r2, s)
    }
}

/// `∫ Φ = k_{s,d} π^{d/2} Γ(s + 1) / Γ(s + 1 + d/2)`.
pub fn barenblatt_mass(s: f64, d: usize) -> f64 {
    let half = d as f64 / 2.0;
    barenblatt_constant(s, d) * math::powf(core::f64::consts::PI, half) * math::gamma(s + 1.0)
        / math::gamma(s + 1.0 + half)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileNorm {
    L1,
    L2,
}

/// Distance between `ρ` and `π_h Φ`, both rescaled to unit mass, measured
/// with vertex quadrature.
pub fn profile_distance(rho: &NodalField, s: f64, mesh: &Mesh, lumped: &LumpedMass, norm: ProfileNorm) -> Result<f64> {
    rho.check(mesh.tag(), mesh.num_vertices())?;
    let phi: Vec<f64> = mesh.vertices().iter().map(|p| barenblatt_profile(p, s, 2)).collect();
    let m_rho = lumped.integral(rho.values());
    let m_phi = lumped.integral(&phi);
    if !(m_rho.abs() > 0.0) {
        return Err(Error::InvalidParameter("profile distance of a zero-mass field".into()));
    }
    if !(m_phi > 0.0) {
        return Err(Error::InvalidParameter("the mesh does not resolve the profile support".into()));
    }
    let diffs = rho.values().iter().zip(&phi).map(|(r, p)| r / m_rho - p / m_phi);
    Ok(match norm {
        ProfileNorm::L1 => diffs.zip(lumped.diag()).map(|(d, m)| m * d.abs()).sum(),
        ProfileNorm::L2 => math::sqrt(diffs.zip(lumped.diag()).map(|(d, m)| m * d * d).sum()),
    })
}
