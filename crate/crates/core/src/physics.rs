//! Isentropic gas law, viscosity, energies and error norms.

use crate::error::{Error, Result};
use crate::fields::{CellField, CellVectorField};
use crate::ops;
use crate::state::{FluidState, Velocity};

/// `p = a rho^gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GasLaw {
    a: f64,
    gamma: f64,
}

impl GasLaw {
    pub fn new(a: f64, gamma: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter { name: "a", reason: format!("must be positive, got {a}") });
        }
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter { name: "gamma", reason: format!("must exceed 1, got {gamma}") });
        }
        Ok(GasLaw { a, gamma })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn check(rho: f64) -> Result<()> {
        if rho >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter { name: "rho", reason: format!("must be nonnegative, got {rho}") })
        }
    }

    pub fn pressure(&self, rho: f64) -> Result<f64> {
        Self::check(rho)?;
        Ok(self.p(rho))
    }

    pub fn pressure_potential(&self, rho: f64) -> Result<f64> {
        Self::check(rho)?;
        Ok(self.h(rho))
    }

    /// `E(rho | r) = H(rho) - H'(r)(rho - r) - H(r)`.
    pub fn relative_pressure(&self, rho: f64, r: f64) -> Result<f64> {
        Self::check(rho)?;
        if !(r > 0.0) {
            return Err(Error::InvalidParameter { name: "r", reason: format!("must be positive, got {r}") });
        }
        Ok(self.rel(rho, r))
    }

    /// Unchecked `a rho^gamma`, for `rho >= 0`.
    #[inline]
    pub fn p(&self, rho: f64) -> f64 {
        if self.gamma == 2.0 { self.a * rho * rho } else { self.a * rho.powf(self.gamma) }
    }

    /// Unchecked `dp/drho`.
    #[inline]
    pub fn dp(&self, rho: f64) -> f64 {
        if self.gamma == 2.0 { 2.0 * self.a * rho } else { self.a * self.gamma * rho.powf(self.gamma - 1.0) }
    }

    /// Unchecked `H(rho) = a rho^gamma / (gamma - 1)`.
    #[inline]
    pub fn h(&self, rho: f64) -> f64 {
        self.p(rho) / (self.gamma - 1.0)
    }

    /// Unchecked `H'(rho)`.
    #[inline]
    pub fn dh(&self, rho: f64) -> f64 {
        self.a * self.gamma / (self.gamma - 1.0) * rho.powf(self.gamma - 1.0)
    }

    #[inline]
    fn rel(&self, rho: f64, r: f64) -> f64 {
        // Clamp rounding noise: the exact value is nonnegative by convexity.
        (self.h(rho) - self.dh(r) * (rho - r) - self.h(r)).max(0.0)
    }
}

/// `mu > 0`, `lambda >= 0`; `nu = (d-2)/d mu + lambda` is derived on demand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViscosityLaw {
    mu: f64,
    lambda: f64,
}

impl ViscosityLaw {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter { name: "mu", reason: format!("must be positive, got {mu}") });
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter { name: "lambda", reason: format!("must be nonnegative, got {lambda}") });
        }
        Ok(ViscosityLaw { mu, lambda })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn nu(&self, dim: usize) -> f64 {
        (dim as f64 - 2.0) / dim as f64 * self.mu + self.lambda
    }
}

/// `int_T 1/2 rho |Pi_Q u - Pi_Q U|^2 + E(rho | r)`.
pub fn relative_energy(law: &GasLaw, state: &FluidState, r: &CellField, u_ref: &Velocity) -> Result<f64> {
    let m = state.mesh();
    if r.mesh() != m || u_ref.mesh() != m {
        return Err(Error::MeshMismatch);
    }
    if let Some((cell, &value)) = r.values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositiveDensity { cell, value });
    }
    let u = state.velocity.cell_velocity();
    let uu = u_ref.cell_velocity();
    let rho = state.rho.values();
    let mut acc = 0.0;
    for k in m.cells() {
        let kin: f64 = (0..m.dim()).map(|i| (u.component(i).values()[k] - uu.component(i).values()[k]).powi(2)).sum();
        acc += 0.5 * rho[k] * kin + law.rel(rho[k], r.values()[k]);
    }
    Ok(acc * m.cell_volume())
}

/// `int_T 1/2 rho |Pi_Q u|^2 + H(rho)`.
pub fn total_energy(state: &FluidState, law: &GasLaw) -> f64 {
    let m = state.mesh();
    let u = state.velocity.cell_velocity();
    let rho = state.rho.values();
    let mut acc = 0.0;
    for k in m.cells() {
        let kin: f64 = u.components().iter().map(|c| c.values()[k].powi(2)).sum();
        acc += 0.5 * rho[k] * kin + law.h(rho[k]);
    }
    acc * m.cell_volume()
}

/// Discrete velocity gradient and divergence of the scheme the state belongs to:
/// `(grad_D, div_Q)` for collocated, `(grad_B, div_W)` for staggered velocities.
pub fn velocity_derivatives(u: &Velocity) -> (crate::fields::TensorField, CellField) {
    match u {
        Velocity::Collocated(v) => (ops::grad_d_vector(v), ops::div_q(v)),
        Velocity::Staggered(w) => (ops::grad_b(w), ops::div_w(w)),
    }
}

/// `mu int |grad_h u|^2 + nu int |div_h u|^2`.
pub fn dissipation(state: &FluidState, visc: &ViscosityLaw) -> f64 {
    let (g, div) = velocity_derivatives(&state.velocity);
    let d = state.mesh().dim();
    visc.mu() * g.norm_sq() + visc.nu(d) * div.inner(&div)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    /// Exponent of the density norm: `gamma` for `gamma <= 2`, else 2.
    pub density_p: f64,
    pub density: f64,
    /// Exponent of the momentum norm, `2 gamma / (gamma + 1)`.
    pub momentum_p: f64,
    pub momentum: f64,
    /// `L^2` velocity error at this time level.
    pub velocity: f64,
}

fn lp(values: impl Iterator<Item = f64>, p: f64, vol: f64) -> f64 {
    (values.map(|v| v.abs().powf(p)).sum::<f64>() * vol).powf(1.0 / p)
}

/// Norms of the differences to a reference given on the same discrete spaces. The
/// velocity difference is measured on the state's own grid.
pub fn error_norms(
    law: &GasLaw,
    state: &FluidState,
    rho_ref: &CellField,
    m_ref: &CellVectorField,
    u_ref: &Velocity,
) -> Result<ErrorNorms> {
    let mesh = state.mesh();
    if rho_ref.mesh() != mesh || m_ref.mesh() != mesh || u_ref.mesh() != mesh {
        return Err(Error::MeshMismatch);
    }
    let vol = mesh.cell_volume();
    let g = law.gamma();
    let density_p = if g <= 2.0 { g } else { 2.0 };
    let momentum_p = 2.0 * g / (g + 1.0);
    let rho = state.rho.values();
    let density = lp(rho.iter().zip(rho_ref.values()).map(|(a, b)| a - b), density_p, vol);
    let mom = state.momentum();
    let momentum = lp(
        mesh.cells().map(|k| {
            (0..mesh.dim())
                .map(|i| (mom.component(i).values()[k] - m_ref.component(i).values()[k]).powi(2))
                .sum::<f64>()
                .sqrt()
        }),
        momentum_p,
        vol,
    );
    let velocity = match (&state.velocity, u_ref) {
        (Velocity::Collocated(a), Velocity::Collocated(b)) => {
            let s: f64 = a
                .components()
                .iter()
                .zip(b.components())
                .map(|(x, y)| x.values().iter().zip(y.values()).map(|(p, q)| (p - q).powi(2)).sum::<f64>())
                .sum::<f64>()
                * vol;
            s.sqrt()
        }
        (Velocity::Staggered(a), Velocity::Staggered(b)) => {
            let s: f64 = a
                .components()
                .iter()
                .zip(b.components())
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>())
                .sum();
            (s * vol).sqrt()
        }
        _ => return Err(Error::VelocityKind("error_norms")),
    };
    Ok(ErrorNorms { density_p, density, momentum_p, momentum, velocity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::StaggeredField;
    use crate::mesh::Mesh;

    #[test]
    fn law_values() {
        let l = GasLaw::new(1.0, 1.4).unwrap();
        assert_eq!(l.pressure(1.0).unwrap(), 1.0);
        assert_eq!(l.pressure(0.0).unwrap(), 0.0);
        assert!(l.pressure(-1.0).is_err());
        let l = GasLaw::new(1.0, 2.0).unwrap();
        assert_eq!(l.pressure(2.0).unwrap(), 4.0);
        assert_eq!(l.pressure_potential(2.0).unwrap(), 4.0);
        assert_eq!(l.relative_pressure(3.0, 1.0).unwrap(), 4.0);
        assert_eq!(l.relative_pressure(1.7, 1.7).unwrap(), 0.0);
        assert!(GasLaw::new(1.0, 1.0).is_err());
        assert!(GasLaw::new(0.0, 2.0).is_err());
    }

    #[test]
    fn viscosity() {
        let v = ViscosityLaw::new(0.3, 0.1).unwrap();
        assert_eq!(v.nu(2), 0.1);
        assert!((v.nu(3) - (0.1 + 0.1)).abs() < 1e-15);
        assert!(ViscosityLaw::new(0.0, 0.0).is_err());
        assert!(ViscosityLaw::new(1.0, -0.1).is_err());
    }

    #[test]
    fn unit_energy_values() {
        let m = Mesh::new(2, 4).unwrap();
        let law = GasLaw::new(1.0, 2.0).unwrap();
        let s = FluidState::new(CellField::constant(m, 1.0), Velocity::Collocated(CellVectorField::zeros(m)), 0.0).unwrap();
        assert!((total_energy(&s, &law) - 1.0).abs() < 1e-14);
        let u_ref = Velocity::Collocated(CellVectorField::constant(m, &[1.0, 0.0]));
        let e = relative_energy(&law, &s, &CellField::constant(m, 1.0), &u_ref).unwrap();
        assert!((e - 0.5).abs() < 1e-14);
        assert_eq!(relative_energy(&law, &s, &s.rho, &s.velocity).unwrap(), 0.0);
        let visc = ViscosityLaw::new(0.2, 0.1).unwrap();
        let c = FluidState::new(CellField::constant(m, 1.0), Velocity::Staggered(StaggeredField::constant(m, &[1.0, 2.0])), 0.0).unwrap();
        assert_eq!(dissipation(&c, &visc), 0.0);
    }

    #[test]
    fn shifted_density_norm() {
        let m = Mesh::new(2, 4).unwrap();
        let law = GasLaw::new(1.0, 1.5).unwrap();
        let rho = CellField::constant(m, 1.0);
        let s = FluidState::new(rho.map(|r| r + 0.25), Velocity::Collocated(CellVectorField::zeros(m)), 0.0).unwrap();
        let e = error_norms(&law, &s, &rho, &CellVectorField::zeros(m), &s.velocity).unwrap();
        assert!((e.density - 0.25).abs() < 1e-14);
        assert_eq!(e.density_p, 1.5);
        assert_eq!(e.momentum, 0.0);
        assert_eq!(e.velocity, 0.0);
    }
}
