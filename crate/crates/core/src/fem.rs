//! P1 finite element operators: stiffness, lumped and consistent mass,
//! nodal interpolation and element gradients.
//!
//! All element integrands are polynomial, so every matrix is assembled from
//! closed-form local matrices; there is no quadrature error.

use alloc::vec;
use alloc::vec::Vec;

use crate::mesh::{Mesh, MeshTag, PointLocator};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Nodal coefficients of a continuous piecewise linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    values: Vec<f64>,
    mesh: MeshTag,
}

impl NodalField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::FieldLength { got: values.len(), expected: mesh.num_vertices() });
        }
        if let Some((vertex, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { vertex, value });
        }
        Ok(Self { values, mesh: mesh.tag() })
    }

    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        Self { values: vec![value; mesh.num_vertices()], mesh: mesh.tag() }
    }

    /// Builds a field from values already known to be finite and sized for
    /// the mesh identified by `mesh`.
    pub(crate) fn from_parts(mesh: MeshTag, values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values, mesh }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mesh_tag(&self) -> MeshTag {
        self.mesh
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Applies `f` to every nodal value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        if let Some((vertex, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { vertex, value });
        }
        Ok(Self { values, mesh: self.mesh })
    }

    pub(crate) fn check(&self, tag: MeshTag, len: usize) -> Result<()> {
        if self.mesh != tag {
            return Err(Error::MeshMismatch);
        }
        if self.values.len() != len {
            return Err(Error::FieldLength { got: self.values.len(), expected: len });
        }
        Ok(())
    }
}

/// Symmetric positive semidefinite P1 stiffness matrix `∫ ∇φ_i · ∇φ_j`.
#[derive(Debug, Clone)]
pub struct StiffnessMatrix {
    matrix: CsrMatrix,
    mesh: MeshTag,
}

/// Exact P1 mass matrix `∫ φ_i φ_j`.
#[derive(Debug, Clone)]
pub struct ConsistentMass {
    matrix: CsrMatrix,
    mesh: MeshTag,
}

/// Vertex quadrature weights `∫ φ_i`; realizes `∫ π_h(u v)`.
#[derive(Debug, Clone)]
pub struct LumpedMass {
    diag: Vec<f64>,
    mesh: MeshTag,
}

impl StiffnessMatrix {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn mesh_tag(&self) -> MeshTag {
        self.mesh
    }

    /// `a(u, v) = uᵀ K v`.
    pub fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        self.matrix.bilinear(u, v)
    }
}

impl ConsistentMass {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn mesh_tag(&self) -> MeshTag {
        self.mesh
    }

    /// L² inner product `(u, v)`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.matrix.bilinear(u, v)
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(u)
    }

    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        crate::math::sqrt(self.inner(u, u).max(0.0))
    }
}

impl LumpedMass {
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn mesh_tag(&self) -> MeshTag {
        self.mesh
    }

    pub fn total(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// `∫ π_h(u v)`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.diag.iter().zip(u).zip(v).map(|((m, a), b)| m * a * b).sum()
    }

    /// `∫ u_h`, exact for P1 functions.
    pub fn integral(&self, u: &[f64]) -> f64 {
        self.diag.iter().zip(u).map(|(m, a)| m * a).sum()
    }

    /// Domain average of `u_h`.
    pub fn mean(&self, u: &[f64]) -> f64 {
        self.integral(u) / self.total()
    }
}

/// Bundled operators assembled once per mesh.
#[derive(Debug, Clone)]
pub struct FemOperators {
    pub stiffness: StiffnessMatrix,
    pub mass: ConsistentMass,
    pub lumped: LumpedMass,
}

impl FemOperators {
    pub fn assemble(mesh: &Mesh) -> Self {
        Self {
            stiffness: assemble_stiffness(mesh),
            mass: assemble_consistent_mass(mesh),
            lumped: assemble_lumped_mass(mesh),
        }
    }
}

pub fn assemble_stiffness(mesh: &Mesh) -> StiffnessMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for (e, t) in mesh.triangles().iter().enumerate() {
        let g = mesh.basis_gradients(e);
        let area = mesh.area(e);
        for a in 0..3 {
            for b in 0..3 {
                let v = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                triplets.push((t.0[a], t.0[b], v));
            }
        }
    }
    StiffnessMatrix { matrix: CsrMatrix::from_triplets(mesh.num_vertices(), triplets), mesh: mesh.tag() }
}

pub fn assemble_consistent_mass(mesh: &Mesh) -> ConsistentMass {
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for (e, t) in mesh.triangles().iter().enumerate() {
        let area = mesh.area(e);
        for a in 0..3 {
            for b in 0..3 {
                let w = if a == b { 2.0 } else { 1.0 };
                triplets.push((t.0[a], t.0[b], area * w / 12.0));
            }
        }
    }
    ConsistentMass { matrix: CsrMatrix::from_triplets(mesh.num_vertices(), triplets), mesh: mesh.tag() }
}

pub fn assemble_lumped_mass(mesh: &Mesh) -> LumpedMass {
    let mut diag = vec![0.0; mesh.num_vertices()];
    for (e, t) in mesh.triangles().iter().enumerate() {
        let third = mesh.area(e) / 3.0;
        for &v in &t.0 {
            diag[v] += third;
        }
    }
    LumpedMass { diag, mesh: mesh.tag() }
}

/// Nodal interpolant `π_h f`.
pub fn interpolate(f: impl Fn([f64; 2]) -> f64, mesh: &Mesh) -> Result<NodalField> {
    let mut values = Vec::with_capacity(mesh.num_vertices());
    for (vertex, &p) in mesh.vertices().iter().enumerate() {
        let value = f(p);
        if !value.is_finite() {
            return Err(Error::NonFinite { vertex, value });
        }
        values.push(value);
    }
    Ok(NodalField { values, mesh: mesh.tag() })
}

/// Constant gradient of a P1 field on one element.
pub fn element_gradient(field: &NodalField, mesh: &Mesh, elem: usize) -> Result<[f64; 2]> {
    field.check(mesh.tag(), mesh.num_vertices())?;
    if elem >= mesh.num_triangles() {
        return Err(Error::ElementIndex { elem, count: mesh.num_triangles() });
    }
    Ok(gradient_of_values(mesh, elem, field.values()))
}

pub(crate) fn gradient_of_values(mesh: &Mesh, elem: usize, values: &[f64]) -> [f64; 2] {
    let g = mesh.basis_gradients(elem);
    let t = mesh.triangles()[elem].0;
    let mut out = [0.0; 2];
    for a in 0..3 {
        out[0] += values[t[a]] * g[a][0];
        out[1] += values[t[a]] * g[a][1];
    }
    out
}

/// Nodal interpolant on `target` of the P1 function `field` on `source`.
/// Exact when `target` refines `source`.
pub fn transfer(field: &NodalField, source: &Mesh, target: &Mesh) -> Result<NodalField> {
    field.check(source.tag(), source.num_vertices())?;
    let locator = PointLocator::new(source);
    let mut values = Vec::with_capacity(target.num_vertices());
    for &p in target.vertices() {
        let (k, lam) = locator.locate(p).ok_or_else(|| {
            Error::InvalidParameter(alloc::format!("point ({}, {}) lies outside the source mesh", p[0], p[1]))
        })?;
        let t = source.triangles()[k].0;
        values.push((0..3).map(|a| lam[a] * field.values[t[a]]).sum());
    }
    Ok(NodalField { values, mesh: target.tag() })
}

/// `∫ π_h(g(u_h)) = Σ_i m_i g(u_i)`.
pub fn integrate_pi_h(g: impl Fn(f64) -> f64, field: &NodalField, lumped: &LumpedMass) -> Result<f64> {
    field.check(lumped.mesh_tag(), lumped.diag().len())?;
    let mut sum = 0.0;
    for (vertex, (&v, &m)) in field.values().iter().zip(lumped.diag()).enumerate() {
        let value = g(v);
        if !value.is_finite() {
            return Err(Error::NonFinite { vertex, value });
        }
        sum += m * value;
    }
    Ok(sum)
}
