//! Manufactured smooth solutions with matching source terms.
//!
//! Density and velocity are trigonometric polynomials. The mass source is always a
//! trigonometric polynomial; the momentum source is one when `gamma` is a small
//! integer (the pressure is then a polynomial in the density) and otherwise falls back
//! to pointwise evaluation of the expanded derivatives.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::StaggeredField;
use crate::mesh::Mesh;
use crate::ops;
use crate::physics::{GasLaw, ViscosityLaw};
use crate::schemes::{InitialData, Sources};
use crate::smooth::{Factor, SharedFn, SmoothFunction, TrigPoly};
use crate::state::{FluidState, SchemeKind, Velocity};

#[derive(Clone, Debug)]
pub struct Manufactured {
    law: GasLaw,
    visc: ViscosityLaw,
    rho: TrigPoly,
    velocity: Vec<TrigPoly>,
}

impl Manufactured {
    pub fn new(law: GasLaw, visc: ViscosityLaw, rho: TrigPoly, velocity: Vec<TrigPoly>) -> Result<Self> {
        let d = rho.dim();
        if d != 2 && d != 3 {
            return Err(Error::InvalidParameter { name: "d", reason: format!("{d} is not 2 or 3") });
        }
        if velocity.len() != d || velocity.iter().any(|u| u.dim() != d) {
            return Err(Error::LengthMismatch { expected: d, got: velocity.len() });
        }
        Ok(Manufactured { law, visc, rho, velocity })
    }

    /// The two-dimensional test family
    /// `rho = 2 + cos(2 pi t) sin(2 pi x) sin(2 pi y) / 2`,
    /// `u = cos(2 pi t) (sin(2 pi x) cos(2 pi y), cos(2 pi x) sin(2 pi y)) / 2 + (sin(2 pi y), -sin(2 pi x)) / 4`.
    pub fn standard(law: GasLaw, visc: ViscosityLaw) -> Self {
        let (c, s) = (Factor::cos(1), Factor::sin(1));
        let mut rho = TrigPoly::constant(2, 2.0);
        rho.add_term(0.5, c, &[s, s]);
        let mut u1 = TrigPoly::term(2, 0.5, c, &[s, c]);
        u1.add_term(0.25, Factor::ONE, &[Factor::ONE, s]);
        let mut u2 = TrigPoly::term(2, 0.5, c, &[c, s]);
        u2.add_term(-0.25, Factor::ONE, &[s, Factor::ONE]);
        Manufactured { law, visc, rho, velocity: vec![u1, u2] }
    }

    /// A three-dimensional analogue of [`Manufactured::standard`].
    pub fn standard_3d(law: GasLaw, visc: ViscosityLaw) -> Self {
        let (c, s, one) = (Factor::cos(1), Factor::sin(1), Factor::ONE);
        let mut rho = TrigPoly::constant(3, 2.0);
        rho.add_term(0.5, c, &[s, s, s]);
        let mut u1 = TrigPoly::term(3, 0.5, c, &[s, c, one]);
        u1.add_term(0.25, one, &[one, s, one]);
        let mut u2 = TrigPoly::term(3, 0.5, c, &[one, s, c]);
        u2.add_term(0.25, one, &[one, one, s]);
        let mut u3 = TrigPoly::term(3, 0.5, c, &[c, one, s]);
        u3.add_term(0.25, one, &[s, one, one]);
        Manufactured { law, visc, rho, velocity: vec![u1, u2, u3] }
    }

    /// A constant state; every source vanishes.
    pub fn constant(law: GasLaw, visc: ViscosityLaw, rho: f64, u: &[f64]) -> Result<Self> {
        let d = u.len();
        Self::new(law, visc, TrigPoly::constant(d, rho), u.iter().map(|&c| TrigPoly::constant(d, c)).collect())
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn law(&self) -> GasLaw {
        self.law
    }

    pub fn visc(&self) -> ViscosityLaw {
        self.visc
    }

    pub fn rho(&self) -> &TrigPoly {
        &self.rho
    }

    pub fn velocity(&self) -> &[TrigPoly] {
        &self.velocity
    }

    pub fn momentum(&self) -> Vec<TrigPoly> {
        self.velocity.iter().map(|u| self.rho.mul(u)).collect()
    }

    fn divergence(&self) -> TrigPoly {
        (0..self.dim()).fold(TrigPoly::zero(self.dim()), |acc, j| acc.add(&self.velocity[j].d_dx(j)))
    }

    /// `d_t rho + div(rho u)`.
    pub fn mass_source(&self) -> TrigPoly {
        let m = self.momentum();
        (0..self.dim()).fold(self.rho.d_dt(), |acc, j| acc.add(&m[j].d_dx(j)))
    }

    /// `p(rho)` as a trigonometric polynomial, when `gamma` is an integer in `2..=4`.
    pub fn pressure_poly(&self) -> Option<TrigPoly> {
        let g = self.law.gamma();
        if g.fract() != 0.0 || !(2.0..=4.0).contains(&g) {
            return None;
        }
        let mut p = self.rho.clone();
        for _ in 1..g as usize {
            p = p.mul(&self.rho);
        }
        Some(p.scale(self.law.a()))
    }

    /// `d_t(rho u_i) + div(rho u_i u) + d_i p - mu lap u_i - nu d_i div u`, exactly.
    pub fn momentum_source_poly(&self) -> Option<Vec<TrigPoly>> {
        let p = self.pressure_poly()?;
        let d = self.dim();
        let m = self.momentum();
        let div = self.divergence();
        let (mu, nu) = (self.visc.mu(), self.visc.nu(d));
        Some(
            (0..d)
                .map(|i| {
                    let conv = (0..d).fold(TrigPoly::zero(d), |acc, j| acc.add(&m[i].mul(&self.velocity[j]).d_dx(j)));
                    m[i].d_dt()
                        .add(&conv)
                        .add(&p.d_dx(i))
                        .sub(&self.velocity[i].laplacian().scale(mu))
                        .sub(&div.d_dx(i).scale(nu))
                })
                .collect(),
        )
    }

    /// Momentum source by the product rule, evaluated pointwise.
    pub fn momentum_source_at(&self, t: f64, x: &[f64]) -> Vec<f64> {
        PointSource::new(self).eval(t, x)
    }

    /// Sources for the scheme: exact polynomials when available.
    pub fn sources(&self) -> Sources {
        let mass: SharedFn = Arc::new(self.mass_source());
        let momentum: Vec<SharedFn> = match self.momentum_source_poly() {
            Some(ps) => ps.into_iter().map(|p| -> SharedFn { Arc::new(p) }).collect(),
            None => {
                let ps = Arc::new(PointSource::new(self));
                (0..self.dim()).map(|i| -> SharedFn { Arc::new(Component(ps.clone(), i)) }).collect()
            }
        };
        Sources { mass: Some(mass), momentum: Some(momentum) }
    }

    pub fn initial_data(&self) -> InitialData {
        InitialData {
            rho: Arc::new(self.rho.clone()),
            velocity: self.velocity.iter().map(|u| -> SharedFn { Arc::new(u.clone()) }).collect(),
            momentum: Some(self.momentum().into_iter().map(|m| -> SharedFn { Arc::new(m) }).collect()),
        }
    }

    /// The exact solution projected onto the scheme's spaces: `Pi_Q rho`, and `Pi_Q u`
    /// (FV) or `Pi_E u` (MAC).
    pub fn reference_state(&self, mesh: &Mesh, kind: SchemeKind, t: f64) -> Result<FluidState> {
        if mesh.dim() != self.dim() {
            return Err(Error::MeshMismatch);
        }
        let rho = ops::project_q(&self.rho, t, mesh);
        let velocity = match kind {
            SchemeKind::Fv => Velocity::Collocated(crate::fields::CellVectorField::new(
                self.velocity.iter().map(|u| ops::project_q(u, t, mesh)).collect(),
            )?),
            SchemeKind::Mac => Velocity::Staggered(StaggeredField::new(
                *mesh,
                (0..self.dim()).map(|i| ops::project_e_component(&self.velocity[i], i, t, mesh)).collect(),
            )?),
        };
        FluidState::new(rho, velocity, t)
    }

    /// Sampled `(max rho, max |u|)` over `[0, t_end] x T^d`.
    pub fn bounds(&self, t_end: f64) -> (f64, f64) {
        let d = self.dim();
        let per_axis: usize = if d == 2 { 96 } else { 24 };
        let times = 33;
        let mut x = [0.0; 3];
        let (mut rmax, mut umax) = (f64::NEG_INFINITY, 0.0f64);
        for q in 0..times {
            let t = t_end * q as f64 / (times - 1) as f64;
            for idx in 0..per_axis.pow(d as u32) {
                let mut rem = idx;
                for xa in x.iter_mut().take(d) {
                    *xa = (rem % per_axis) as f64 / per_axis as f64;
                    rem /= per_axis;
                }
                rmax = rmax.max(self.rho.value(t, &x[..d]));
                umax = umax.max(self.velocity.iter().map(|u| u.value(t, &x[..d]).powi(2)).sum::<f64>().sqrt());
            }
        }
        (rmax, umax)
    }
}

/// Derivatives needed by the product-rule form of the momentum source.
struct PointSource {
    law: GasLaw,
    mu: f64,
    nu: f64,
    rho: TrigPoly,
    rho_t: TrigPoly,
    rho_x: Vec<TrigPoly>,
    u: Vec<TrigPoly>,
    u_t: Vec<TrigPoly>,
    /// `u_x[i][j] = d_j u_i`.
    u_x: Vec<Vec<TrigPoly>>,
    lap: Vec<TrigPoly>,
    grad_div: Vec<TrigPoly>,
}

impl PointSource {
    fn new(m: &Manufactured) -> Self {
        let d = m.dim();
        let div = m.divergence();
        PointSource {
            law: m.law,
            mu: m.visc.mu(),
            nu: m.visc.nu(d),
            rho: m.rho.clone(),
            rho_t: m.rho.d_dt(),
            rho_x: (0..d).map(|j| m.rho.d_dx(j)).collect(),
            u: m.velocity.clone(),
            u_t: m.velocity.iter().map(|u| u.d_dt()).collect(),
            u_x: m.velocity.iter().map(|u| (0..d).map(|j| u.d_dx(j)).collect()).collect(),
            lap: m.velocity.iter().map(|u| u.laplacian()).collect(),
            grad_div: (0..d).map(|i| div.d_dx(i)).collect(),
        }
    }

    fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let d = self.u.len();
        let r = self.rho.value(t, x);
        let r_t = self.rho_t.value(t, x);
        let r_x: Vec<f64> = self.rho_x.iter().map(|p| p.value(t, x)).collect();
        let u: Vec<f64> = self.u.iter().map(|p| p.value(t, x)).collect();
        let div: f64 = (0..d).map(|j| self.u_x[j][j].value(t, x)).sum();
        let dp = self.law.dp(r);
        (0..d)
            .map(|i| {
                let u_x: Vec<f64> = self.u_x[i].iter().map(|p| p.value(t, x)).collect();
                let transport: f64 = (0..d).map(|j| r_x[j] * u[j] * u[i] + r * u[j] * u_x[j]).sum();
                r_t * u[i] + r * self.u_t[i].value(t, x) + transport + r * u[i] * div + dp * r_x[i]
                    - self.mu * self.lap[i].value(t, x)
                    - self.nu * self.grad_div[i].value(t, x)
            })
            .collect()
    }
}

struct Component(Arc<PointSource>, usize);

impl SmoothFunction for Component {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.0.eval(t, x)[self.1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(gamma: f64, lambda: f64) -> Manufactured {
        Manufactured::standard(GasLaw::new(1.3, gamma).unwrap(), ViscosityLaw::new(0.1, lambda).unwrap())
    }

    /// Sources by central differences of the conserved fluxes: fourth-order first
    /// differences with step `k1`, second differences with step `k2`.
    fn fd_sources(m: &Manufactured, t: f64, x: &[f64], k1: f64, k2: f64) -> (f64, Vec<f64>) {
        let d = m.dim();
        let rho = |t: f64, x: &[f64]| m.rho.value(t, x);
        let u = |i: usize, t: f64, x: &[f64]| m.velocity[i].value(t, x);
        let shifted = |j: usize, s: f64| {
            let mut y = x.to_vec();
            y[j] += s;
            y
        };
        let k = k1;
        let dt = |f: &dyn Fn(f64, &[f64]) -> f64| {
            (8.0 * (f(t + k, x) - f(t - k, x)) - (f(t + 2.0 * k, x) - f(t - 2.0 * k, x))) / (12.0 * k)
        };
        let dx = |f: &dyn Fn(f64, &[f64]) -> f64, j: usize| {
            (8.0 * (f(t, &shifted(j, k)) - f(t, &shifted(j, -k))) - (f(t, &shifted(j, 2.0 * k)) - f(t, &shifted(j, -2.0 * k))))
                / (12.0 * k)
        };
        let k = k2;
        let dxx = |f: &dyn Fn(f64, &[f64]) -> f64, j: usize, l: usize| {
            let mut acc = 0.0;
            for (sj, sl, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                let mut y = x.to_vec();
                y[j] += sj * k;
                y[l] += sl * k;
                acc += w * f(t, &y);
            }
            acc / (4.0 * k * k)
        };
        let mass = dt(&rho) + (0..d).map(|j| dx(&|t: f64, x: &[f64]| rho(t, x) * u(j, t, x), j)).sum::<f64>();
        let nu = m.visc.nu(d);
        let mom = (0..d)
            .map(|i| {
                let mut s = dt(&|t: f64, x: &[f64]| rho(t, x) * u(i, t, x));
                for j in 0..d {
                    s += dx(&|t: f64, x: &[f64]| rho(t, x) * u(i, t, x) * u(j, t, x), j);
                    s -= m.visc.mu() * dxx(&|t: f64, x: &[f64]| u(i, t, x), j, j);
                    s -= nu * dxx(&|t: f64, x: &[f64]| u(j, t, x), i, j);
                }
                s + dx(&|t: f64, x: &[f64]| m.law.p(rho(t, x)), i)
            })
            .collect();
        (mass, mom)
    }

    #[test]
    fn sources_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in [sample(2.0, 0.0), sample(1.4, 0.05), sample(3.0, 0.0)] {
            let exact = m.sources();
            for _ in 0..20 {
                let t: f64 = rng.random_range(0.0..1.0);
                let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
                let (fm, fs) = fd_sources(&m, t, &x, 1e-3, 1e-4);
                assert!((exact.mass.as_ref().unwrap().value(t, &x) - fm).abs() < 1e-6);
                for (i, f) in exact.momentum.as_ref().unwrap().iter().enumerate() {
                    assert!((f.value(t, &x) - fs[i]).abs() < 1e-6, "{} vs {}", f.value(t, &x), fs[i]);
                }
            }
        }
    }

    #[test]
    fn polynomial_and_pointwise_sources_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let law = GasLaw::new(0.7, 2.0).unwrap();
        let visc = ViscosityLaw::new(0.1, 0.2).unwrap();
        for m in [Manufactured::standard(law, visc), Manufactured::standard_3d(law, visc)] {
            let polys = m.momentum_source_poly().unwrap();
            let d = m.dim();
            for _ in 0..20 {
                let t: f64 = rng.random_range(0.0..1.0);
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
                let pt = m.momentum_source_at(t, &x);
                for i in 0..d {
                    assert!((polys[i].value(t, &x) - pt[i]).abs() < 1e-12);
                }
            }
        }
        assert!(sample(1.4, 0.0).momentum_source_poly().is_none());
        assert!(sample(2.5, 0.0).pressure_poly().is_none());
    }

    #[test]
    fn constant_state_has_no_sources() {
        let m = Manufactured::constant(GasLaw::new(1.0, 2.0).unwrap(), ViscosityLaw::new(0.1, 0.0).unwrap(), 1.5, &[0.3, -0.2])
            .unwrap();
        assert_eq!(m.mass_source().term_count(), 0);
        assert!(m.momentum_source_poly().unwrap().iter().all(|p| p.term_count() == 0));
        assert_eq!(m.momentum_source_at(0.3, &[0.1, 0.2]), vec![0.0, 0.0]);
    }

    #[test]
    fn bounds_and_reference() {
        let m = sample(2.0, 0.0);
        let (r, u) = m.bounds(0.1);
        assert!((r - 2.5).abs() < 1e-12);
        assert!(u > 0.5 && u < 1.25);
        let mesh = Mesh::new(2, 8).unwrap();
        for kind in [SchemeKind::Fv, SchemeKind::Mac] {
            let s = m.reference_state(&mesh, kind, 0.05).unwrap();
            assert_eq!(s.kind(), kind);
            assert!((s.mass() - 2.0).abs() < 1e-14);
        }
        assert!(m.reference_state(&Mesh::new(3, 4).unwrap(), SchemeKind::Fv, 0.0).is_err());
        assert!(Manufactured::new(m.law(), m.visc(), TrigPoly::zero(2), vec![TrigPoly::zero(2)]).is_err());
    }
}
