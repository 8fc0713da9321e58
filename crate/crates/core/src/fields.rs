//! Piecewise-constant fields on the primary, dual and bidual grids.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mesh::{FaceIndex, Mesh};

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// One value per primary cell (`Q_h`).
#[derive(Clone, Debug, PartialEq)]
pub struct CellField {
    mesh: Mesh,
    values: Vec<f64>,
}

impl CellField {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.cell_count() {
            return Err(Error::LengthMismatch { expected: mesh.cell_count(), got: values.len() });
        }
        check_finite(&values, "cell field")?;
        Ok(CellField { mesh, values })
    }

    /// Internal constructor for values computed from already-validated fields.
    pub(crate) fn from_vec(mesh: Mesh, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), mesh.cell_count());
        CellField { mesh, values }
    }

    pub fn constant(mesh: Mesh, c: f64) -> Self {
        CellField { mesh, values: vec![c; mesh.cell_count()] }
    }

    pub fn zeros(mesh: Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn from_fn(mesh: Mesh, f: impl FnMut(usize) -> f64) -> Self {
        CellField { mesh, values: mesh.cells().map(f).collect() }
    }

    /// Uniform in `[lo, hi)`.
    pub fn random(mesh: Mesh, rng: &mut impl Rng, lo: f64, hi: f64) -> Self {
        Self::from_fn(mesh, |_| rng.random_range(lo..hi))
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `int_T f = h^d sum_K f_K`.
    pub fn integral(&self) -> f64 {
        self.mesh.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// `int_T f g`.
    pub fn inner(&self, other: &CellField) -> f64 {
        self.mesh.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellField {
        CellField { mesh: self.mesh, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &CellField, f: impl Fn(f64, f64) -> f64) -> CellField {
        CellField { mesh: self.mesh, values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
    }
}

/// `d` cell fields, one per component (`Q_h^d`).
#[derive(Clone, Debug, PartialEq)]
pub struct CellVectorField {
    components: Vec<CellField>,
}

impl CellVectorField {
    pub fn new(components: Vec<CellField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::LengthMismatch { expected: 1, got: 0 });
        };
        let mesh = *first.mesh();
        if components.len() != mesh.dim() {
            return Err(Error::LengthMismatch { expected: mesh.dim(), got: components.len() });
        }
        if components.iter().any(|c| *c.mesh() != mesh) {
            return Err(Error::MeshMismatch);
        }
        Ok(CellVectorField { components })
    }

    pub(crate) fn from_components(components: Vec<CellField>) -> Self {
        CellVectorField { components }
    }

    pub fn zeros(mesh: Mesh) -> Self {
        CellVectorField { components: (0..mesh.dim()).map(|_| CellField::zeros(mesh)).collect() }
    }

    pub fn constant(mesh: Mesh, c: &[f64]) -> Self {
        CellVectorField { components: (0..mesh.dim()).map(|i| CellField::constant(mesh, c[i])).collect() }
    }

    pub fn random(mesh: Mesh, rng: &mut impl Rng, lo: f64, hi: f64) -> Self {
        CellVectorField { components: (0..mesh.dim()).map(|_| CellField::random(mesh, rng, lo, hi)).collect() }
    }

    pub fn mesh(&self) -> &Mesh {
        self.components[0].mesh()
    }

    pub fn component(&self, i: usize) -> &CellField {
        &self.components[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut CellField {
        &mut self.components[i]
    }

    pub fn components(&self) -> &[CellField] {
        &self.components
    }

    pub fn inner(&self, other: &CellVectorField) -> f64 {
        self.components.iter().zip(&other.components).map(|(a, b)| a.inner(b)).sum()
    }

    /// `max_K |v_K|`.
    pub fn max_norm(&self) -> f64 {
        let mesh = self.mesh();
        mesh.cells()
            .map(|k| self.components.iter().map(|c| c.values()[k].powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Face-staggered vector field (`W_h`): component `i` has one value per face in `E_i`,
/// indexed by the lower cell of the face.
#[derive(Clone, Debug, PartialEq)]
pub struct StaggeredField {
    mesh: Mesh,
    components: Vec<Vec<f64>>,
}

impl StaggeredField {
    pub fn new(mesh: Mesh, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != mesh.dim() {
            return Err(Error::LengthMismatch { expected: mesh.dim(), got: components.len() });
        }
        for c in &components {
            if c.len() != mesh.faces_per_dir() {
                return Err(Error::LengthMismatch { expected: mesh.faces_per_dir(), got: c.len() });
            }
            check_finite(c, "staggered field")?;
        }
        Ok(StaggeredField { mesh, components })
    }

    pub(crate) fn from_vecs(mesh: Mesh, components: Vec<Vec<f64>>) -> Self {
        StaggeredField { mesh, components }
    }

    pub fn zeros(mesh: Mesh) -> Self {
        Self::constant(mesh, &[0.0; 3])
    }

    pub fn constant(mesh: Mesh, c: &[f64]) -> Self {
        StaggeredField { mesh, components: (0..mesh.dim()).map(|i| vec![c[i]; mesh.faces_per_dir()]).collect() }
    }

    pub fn from_fn(mesh: Mesh, mut f: impl FnMut(FaceIndex) -> f64) -> Self {
        let components = (0..mesh.dim()).map(|dir| mesh.faces(dir).map(&mut f).collect()).collect();
        StaggeredField { mesh, components }
    }

    pub fn random(mesh: Mesh, rng: &mut impl Rng, lo: f64, hi: f64) -> Self {
        Self::from_fn(mesh, |_| rng.random_range(lo..hi))
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.components[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn at(&self, f: FaceIndex) -> f64 {
        self.components[f.dir][f.cell]
    }

    /// `int_T u . v` with each component integrated over its dual grid.
    pub fn inner(&self, other: &StaggeredField) -> f64 {
        let vol = self.mesh.cell_volume();
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum::<f64>()
            * vol
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Tensor field `T_ij` where each entry lives on its own lattice of boxes (cells for
/// `grad_Q`, dual cells for `grad_D`, bidual cells for `grad_B`). Entry `(i, j)` is
/// stored at position `i * d + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    mesh: Mesh,
    entries: Vec<Vec<f64>>,
}

impl TensorField {
    pub(crate) fn from_entries(mesh: Mesh, entries: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(entries.len(), mesh.dim() * mesh.dim());
        TensorField { mesh, entries }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[i * self.mesh.dim() + j]
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// `int_T A : B`; all grids have box measure `h^d`.
    pub fn contract(&self, other: &TensorField) -> f64 {
        let vol = self.mesh.cell_volume();
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum::<f64>()
            * vol
    }

    pub fn norm_sq(&self) -> f64 {
        self.contract(self)
    }
}
