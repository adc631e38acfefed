//! Discrete spectral fractional Neumann Laplacian.
//!
//! The generalized problem `K v = λ M v` (P1 stiffness against the
//! consistent mass) is solved densely. The constant mode is discarded and the
//! remaining `N_h − 1` eigenpairs define
//!
//! ```text
//! (−Δ_h)^s u = Σ_k λ_k^s (u, v_k) v_k,     (u, v_k) = v_kᵀ M u,
//! ```
//!
//! on mean-zero fields. Inputs and outputs are re-projected onto the
//! mean-zero subspace so roundoff cannot reintroduce the constant mode.

use alloc::format;
use alloc::vec::Vec;

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Col, Mat, Par, Side};

use crate::fem::{ConsistentMass, LumpedMass, NodalField, StiffnessMatrix};
use crate::math;
use crate::mesh::MeshTag;
use crate::{Error, Result};

/// Largest problem the dense eigensolver accepts.
pub const MAX_DENSE_NODES: usize = 20_000;

/// Relative tolerance on the mean of a [`ZeroMeanField`].
pub const MEAN_TOL: f64 = 1e-12;

/// A nodal field whose lumped-mass mean vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroMeanField(NodalField);

impl ZeroMeanField {
    /// Wraps `field`, rejecting it if `|mean| > MEAN_TOL ‖field‖∞`.
    pub fn new(field: NodalField, lumped: &LumpedMass) -> Result<Self> {
        field.check(lumped.mesh_tag(), lumped.diag().len())?;
        let mean = lumped.mean(field.values());
        if mean.abs() > MEAN_TOL * field.linf() {
            return Err(Error::NotMeanZero { mean });
        }
        Ok(Self(field))
    }

    pub fn field(&self) -> &NodalField {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn into_field(self) -> NodalField {
        self.0
    }
}

/// `ρ* = ρ − ρ̄`.
pub fn project_zero_mean(field: &NodalField, lumped: &LumpedMass) -> Result<ZeroMeanField> {
    field.check(lumped.mesh_tag(), lumped.diag().len())?;
    Ok(ZeroMeanField(project_with(field, lumped.diag())))
}

fn project_with(field: &NodalField, weights: &[f64]) -> NodalField {
    let mut values = field.values().to_vec();
    subtract_mean(&mut values, weights);
    NodalField::from_parts(field.mesh_tag(), values)
}

fn subtract_mean(values: &mut [f64], weights: &[f64]) {
    let total: f64 = weights.iter().sum();
    let mean = weights.iter().zip(values.iter()).map(|(w, v)| w * v).sum::<f64>() / total;
    for v in values.iter_mut() {
        *v -= mean;
    }
}

/// `‖u‖_{H^s}` and `‖u‖_{H^{−s}}` in the discrete eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevNorms {
    pub hs: f64,
    pub h_minus_s: f64,
}

/// Positive generalized eigenpairs of the discrete Neumann Laplacian.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// `N_h × (N_h − 1)`, M-orthonormal, mean-zero columns.
    vectors: Mat<f64>,
    /// Discarded eigenvalue of the constant mode (roundoff-sized).
    zero_mode: f64,
    /// Row sums of the consistent mass, used for mean projections.
    weights: Vec<f64>,
    mesh: MeshTag,
}

impl SpectralDecomposition {
    /// Full dense generalized symmetric eigensolve of `K v = λ M v`.
    ///
    /// Reduces to a standard problem through the Cholesky factor of `M`.
    /// Eigenvalues are ascending; each eigenvector has its first
    /// non-negligible component positive.
    pub fn compute(stiffness: &StiffnessMatrix, mass: &ConsistentMass) -> Result<Self> {
        if stiffness.mesh_tag() != mass.mesh_tag() {
            return Err(Error::MeshMismatch);
        }
        let n = mass.matrix().dim();
        if n > MAX_DENSE_NODES {
            return Err(Error::TooManyNodes { nodes: n, limit: MAX_DENSE_NODES });
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!("need at least two nodes, got {n}")));
        }

        let m_dense = dense(mass.matrix().triplets(), n);
        let llt = m_dense.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite { pivot: 0, value: f64::NAN })?;
        let l = llt.L();

        // C = L⁻¹ K L⁻ᵀ, formed as L⁻¹ (L⁻¹ K)ᵀ since K is symmetric.
        let mut x = dense(stiffness.matrix().triplets(), n);
        solve_lower_triangular_in_place(l, x.as_mut(), Par::Seq);
        let mut c = x.transpose().to_owned();
        drop(x);
        solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
        for j in 0..n {
            for i in (j + 1)..n {
                let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
                c[(i, j)] = avg;
                c[(j, i)] = avg;
            }
        }
        let evd = c.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenNoConvergence)?;
        drop(c);
        let lambdas: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
        let mut u = evd.U().to_owned();
        drop(evd);
        solve_upper_triangular_in_place(l.transpose(), u.as_mut(), Par::Seq);

        let lambda_max = lambdas.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let zero = (0..n).min_by(|&a, &b| lambdas[a].abs().total_cmp(&lambdas[b].abs())).expect("n >= 2");
        let weights = mass.matrix().row_sums();
        let mut eigenvalues = Vec::with_capacity(n - 1);
        let mut vectors = Mat::<f64>::zeros(n, n - 1);
        let mut k = 0;
        for (i, &lam) in lambdas.iter().enumerate() {
            if i == zero {
                continue;
            }
            if !(lam > 1e-10 * lambda_max.max(1.0)) {
                return Err(Error::NonPositiveEigenvalue { index: i, value: lam });
            }
            let mut v: Vec<f64> = (0..n).map(|r| u[(r, i)]).collect();
            subtract_mean(&mut v, &weights);
            let norm = math::sqrt(mass.inner(&v, &v));
            let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let lead = v.iter().copied().find(|x| x.abs() > 1e-10 * peak).unwrap_or(1.0);
            let scale = if lead < 0.0 { -1.0 / norm } else { 1.0 / norm };
            for (r, x) in v.iter().enumerate() {
                vectors[(r, k)] = x * scale;
            }
            eigenvalues.push(lam);
            k += 1;
        }
        if lambdas[zero].abs() > 1e-8 * lambda_max.max(1.0) {
            return Err(Error::NonPositiveEigenvalue { index: zero, value: lambdas[zero] });
        }
        Ok(Self { eigenvalues, vectors, zero_mode: lambdas[zero], weights, mesh: stiffness.mesh_tag() })
    }

    /// `λ_1 ≤ … ≤ λ_{N_h−1}`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn num_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.vectors.nrows()
    }

    /// Eigenvalue of the discarded constant mode.
    pub fn zero_mode(&self) -> f64 {
        self.zero_mode
    }

    pub fn mesh_tag(&self) -> MeshTag {
        self.mesh
    }

    /// Nodal values of eigenvector `k` (0-based, so `k = 0` is `v_1`).
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.col(k).iter().copied().collect()
    }

    /// Eigen-coefficients `u_k = v_kᵀ M u`.
    pub fn coefficients(&self, mass: &ConsistentMass, u: &[f64]) -> Vec<f64> {
        let coeffs: Col<f64> = self.vectors.transpose() * col_of(&mass.apply(u));
        coeffs.iter().copied().collect()
    }

    /// `Σ_k a_k v_k`, projected onto the mean-zero subspace.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.num_modes());
        let out: Col<f64> = &self.vectors * col_of(coeffs);
        let mut values: Vec<f64> = out.iter().copied().collect();
        subtract_mean(&mut values, &self.weights);
        values
    }

    fn check(&self, mass: &ConsistentMass, field: &NodalField) -> Result<()> {
        if mass.mesh_tag() != self.mesh {
            return Err(Error::MeshMismatch);
        }
        field.check(self.mesh, self.num_nodes())
    }

    /// `(−Δ_h)^s u` for `s ∈ [−1, 1]`.
    pub fn apply_fractional_power(&self, mass: &ConsistentMass, u: &ZeroMeanField, s: f64) -> Result<ZeroMeanField> {
        if !(-1.0..=1.0).contains(&s) {
            return Err(Error::InvalidParameter(format!("fractional power {s} outside [-1, 1]")));
        }
        self.check(mass, u.field())?;
        let mut coeffs = self.coefficients(mass, u.values());
        for (a, &lam) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *a *= math::powf(lam, s);
        }
        let values = self.synthesize(&coeffs);
        Ok(ZeroMeanField(NodalField::from_parts(self.mesh, values)))
    }

    /// Potential `c` with `−(−Δ_h)^s c = ρ*`, for `s ∈ (0, 1)`.
    pub fn solve_fractional_poisson(&self, mass: &ConsistentMass, rho: &NodalField, s: f64) -> Result<NodalField> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("fractional order {s} outside (0, 1)")));
        }
        self.check(mass, rho)?;
        let star = ZeroMeanField(project_with(rho, &self.weights));
        let inv = self.apply_fractional_power(mass, &star, -s)?;
        let values: Vec<f64> = inv.values().iter().map(|v| -v).collect();
        Ok(NodalField::from_parts(self.mesh, values))
    }

    /// Mean-zero projection using the stored mass weights.
    pub fn project(&self, field: &NodalField) -> Result<ZeroMeanField> {
        field.check(self.mesh, self.num_nodes())?;
        Ok(ZeroMeanField(project_with(field, &self.weights)))
    }

    /// `(Σ λ_k^{±s} u_k²)^{1/2}`.
    pub fn sobolev_norms(&self, mass: &ConsistentMass, u: &ZeroMeanField, s: f64) -> Result<SobolevNorms> {
        self.check(mass, u.field())?;
        let coeffs = self.coefficients(mass, u.values());
        let (mut plus, mut minus) = (0.0, 0.0);
        for (a, &lam) in coeffs.iter().zip(&self.eigenvalues) {
            plus += math::powf(lam, s) * a * a;
            minus += math::powf(lam, -s) * a * a;
        }
        Ok(SobolevNorms { hs: math::sqrt(plus), h_minus_s: math::sqrt(minus) })
    }
}

fn dense(entries: impl Iterator<Item = (usize, usize, f64)>, n: usize) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(n, n);
    for (i, j, v) in entries {
        m[(i, j)] = v;
    }
    m
}

fn col_of(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}
