use crate::error::{Error, Result};
use crate::fields::{CellField, CellVectorField, StaggeredField};
use crate::mesh::Mesh;
use crate::ops;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Collocated finite volumes.
    Fv,
    /// Staggered marker-and-cell.
    Mac,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Fv => "fv",
            SchemeKind::Mac => "mac",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fv" => Ok(SchemeKind::Fv),
            "mac" => Ok(SchemeKind::Mac),
            _ => Err(Error::Parse(format!("unknown scheme `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Velocity {
    Collocated(CellVectorField),
    Staggered(StaggeredField),
}

impl Velocity {
    pub fn mesh(&self) -> &Mesh {
        match self {
            Velocity::Collocated(v) => v.mesh(),
            Velocity::Staggered(u) => u.mesh(),
        }
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            Velocity::Collocated(_) => SchemeKind::Fv,
            Velocity::Staggered(_) => SchemeKind::Mac,
        }
    }

    /// `Pi_Q u`: the field itself for collocated velocities, the two-face mean otherwise.
    pub fn cell_velocity(&self) -> CellVectorField {
        match self {
            Velocity::Collocated(v) => v.clone(),
            Velocity::Staggered(u) => ops::cell_average_staggered(u),
        }
    }

    /// Largest speed: per-face values and cell averages for staggered velocities.
    pub fn max_speed(&self) -> f64 {
        match self {
            Velocity::Collocated(v) => v.max_norm(),
            Velocity::Staggered(u) => u.max_abs().max(ops::cell_average_staggered(u).max_norm()),
        }
    }
}

/// Density and velocity at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidState {
    pub rho: CellField,
    pub velocity: Velocity,
    pub time: f64,
}

impl FluidState {
    pub fn new(rho: CellField, velocity: Velocity, time: f64) -> Result<Self> {
        if rho.mesh() != velocity.mesh() {
            return Err(Error::MeshMismatch);
        }
        Ok(FluidState { rho, velocity, time })
    }

    pub fn mesh(&self) -> &Mesh {
        self.rho.mesh()
    }

    pub fn kind(&self) -> SchemeKind {
        self.velocity.kind()
    }

    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }

    pub fn min_density(&self) -> f64 {
        self.rho.min()
    }

    pub fn check_positive(&self) -> Result<()> {
        for (cell, &value) in self.rho.values().iter().enumerate() {
            if !(value > 0.0) {
                return Err(Error::NonPositiveDensity { cell, value });
            }
        }
        Ok(())
    }

    /// `rho Pi_Q u` per cell.
    pub fn momentum(&self) -> CellVectorField {
        let u = self.velocity.cell_velocity();
        CellVectorField::from_components(
            u.components().iter().map(|c| c.zip_map(&self.rho, |a, r| a * r)).collect(),
        )
    }

    /// Unknowns packed as `[rho, u_1, .., u_d]`.
    pub fn pack(&self) -> Vec<f64> {
        let mut x = self.rho.values().to_vec();
        match &self.velocity {
            Velocity::Collocated(v) => v.components().iter().for_each(|c| x.extend_from_slice(c.values())),
            Velocity::Staggered(u) => u.components().iter().for_each(|c| x.extend_from_slice(c)),
        }
        x
    }

    pub fn unpack(mesh: &Mesh, kind: SchemeKind, x: &[f64], time: f64) -> FluidState {
        let n = mesh.cell_count();
        let rho = CellField::from_vec(*mesh, x[..n].to_vec());
        let chunks = (0..mesh.dim()).map(|i| x[(i + 1) * n..(i + 2) * n].to_vec());
        let velocity = match kind {
            SchemeKind::Fv => Velocity::Collocated(CellVectorField::from_components(
                chunks.map(|c| CellField::from_vec(*mesh, c)).collect(),
            )),
            SchemeKind::Mac => Velocity::Staggered(StaggeredField::from_vecs(*mesh, chunks.collect())),
        };
        FluidState { rho, velocity, time }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_roundtrip() {
        let m = Mesh::new(2, 3).unwrap();
        let s = FluidState::new(
            CellField::from_fn(m, |k| 1.0 + k as f64),
            Velocity::Staggered(StaggeredField::from_fn(m, |f| f.cell as f64 - f.dir as f64)),
            0.5,
        )
        .unwrap();
        let back = FluidState::unpack(&m, SchemeKind::Mac, &s.pack(), 0.5);
        assert_eq!(back, s);
    }

    #[test]
    fn positivity_check() {
        let m = Mesh::new(2, 2).unwrap();
        let mut rho = CellField::constant(m, 1.0);
        rho.values_mut()[3] = 0.0;
        let s = FluidState::new(rho, Velocity::Collocated(CellVectorField::zeros(m)), 0.0).unwrap();
        assert_eq!(s.check_positive(), Err(Error::NonPositiveDensity { cell: 3, value: 0.0 }));
    }
}
