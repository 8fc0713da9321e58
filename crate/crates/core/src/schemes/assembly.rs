//! Cellwise strong forms of both schemes and their Jacobians.
//!
//! Unknowns and residual rows share one layout: `rho` on cells first, then one block
//! per velocity component (cells for FV, faces `(i, K)` for MAC). Residuals are per
//! unit measure, i.e. the Galerkin equation tested with an indicator and divided by
//! `h^d`.

use crate::error::{Error, Result};
use crate::fields::{CellField, CellVectorField, StaggeredField};
use crate::fluxes::diffusion_scale;
use crate::mesh::Mesh;
use crate::ops;
use crate::physics::GasLaw;
use crate::state::{FluidState, SchemeKind};

use super::config::SchemeConfig;

/// Periodic neighbour tables, `plus[a][k] = K + e_a`.
#[derive(Clone, Debug)]
pub(crate) struct Neighbors {
    pub plus: Vec<Vec<usize>>,
    pub minus: Vec<Vec<usize>>,
}

impl Neighbors {
    pub fn new(m: &Mesh) -> Self {
        let d = m.dim();
        Neighbors {
            plus: (0..d).map(|a| m.cells().map(|k| m.shift(k, a, 1)).collect()).collect(),
            minus: (0..d).map(|a| m.cells().map(|k| m.shift(k, a, -1)).collect()).collect(),
        }
    }
}

#[inline]
fn upwind_parts(u: f64) -> (f64, f64, f64) {
    let h = if u > 0.0 {
        1.0
    } else if u < 0.0 {
        0.0
    } else {
        0.5
    };
    (u.max(0.0), u.min(0.0), h)
}

/// One implicit step's algebraic system `R(x) = 0`.
pub(crate) struct System {
    mesh: Mesh,
    nb: Neighbors,
    kind: SchemeKind,
    law: GasLaw,
    mu: f64,
    nu: f64,
    c: f64,
    inv_dt: f64,
    rho0: Vec<f64>,
    /// Old momentum per component: `rho u` (FV) or `rho overline{u}` (MAC), on cells.
    q0: Vec<Vec<f64>>,
    s_rho: Vec<f64>,
    /// Momentum sources: cell averages (FV) or dual-cell averages (MAC).
    s_m: Vec<Vec<f64>>,
}

impl System {
    pub fn new(prev: &FluidState, cfg: &SchemeConfig, dt: f64, t_new: f64) -> Result<Self> {
        Self::with_neighbors(prev, cfg, dt, t_new, Neighbors::new(prev.mesh()))
    }

    pub fn with_neighbors(prev: &FluidState, cfg: &SchemeConfig, dt: f64, t_new: f64, nb: Neighbors) -> Result<Self> {
        if prev.kind() != cfg.scheme {
            return Err(Error::VelocityKind("scheme state"));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {dt}") });
        }
        let mesh = *prev.mesh();
        let d = mesh.dim();
        let n = mesh.cell_count();
        let momentum = prev.momentum();
        let q0 = momentum.components().iter().map(|c| c.values().to_vec()).collect();
        let s_rho = match &cfg.sources.mass {
            Some(f) => ops::project_q(f.as_ref(), t_new, &mesh).into_values(),
            None => vec![0.0; n],
        };
        let s_m = match &cfg.sources.momentum {
            Some(fs) => {
                if fs.len() != d {
                    return Err(Error::LengthMismatch { expected: d, got: fs.len() });
                }
                (0..d)
                    .map(|i| match cfg.scheme {
                        SchemeKind::Fv => ops::project_q(fs[i].as_ref(), t_new, &mesh).into_values(),
                        SchemeKind::Mac => ops::project_dual(fs[i].as_ref(), i, t_new, &mesh),
                    })
                    .collect()
            }
            None => vec![vec![0.0; n]; d],
        };
        Ok(System {
            mesh,
            nb,
            kind: cfg.scheme,
            law: cfg.law,
            mu: cfg.visc.mu(),
            nu: cfg.visc.nu(d),
            c: diffusion_scale(mesh.h(), cfg.epsilon)?,
            inv_dt: 1.0 / dt,
            rho0: prev.rho.values().to_vec(),
            q0,
            s_rho,
            s_m,
        })
    }

    pub fn len(&self) -> usize {
        (self.mesh.dim() + 1) * self.mesh.cell_count()
    }

    pub fn into_neighbors(self) -> Neighbors {
        self.nb
    }

    pub fn residual(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.len());
        match self.kind {
            SchemeKind::Fv => self.fv_residual(x, out),
            SchemeKind::Mac => self.mac_residual(x, out),
        }
    }

    /// Calls `add(row, col, value)` for every Jacobian entry. The sequence of
    /// `(row, col)` pairs depends only on the mesh and scheme, never on `x`, so a
    /// sparsity pattern captured once stays valid.
    pub fn jacobian(&self, x: &[f64], add: &mut impl FnMut(usize, usize, f64)) {
        match self.kind {
            SchemeKind::Fv => self.fv_jacobian(x, add),
            SchemeKind::Mac => self.mac_jacobian(x, add),
        }
    }

    /// Mass rows: time derivative and the diffusive upwind flux; `us(j, k)` is the
    /// normal velocity on face `(j, k)`.
    fn mass_residual(&self, x: &[f64], out: &mut [f64], us: impl Fn(usize, usize) -> f64) {
        let n = self.mesh.cell_count();
        let ih = 1.0 / self.mesh.h();
        let rho = &x[..n];
        for k in 0..n {
            out[k] = (rho[k] - self.rho0[k]) * self.inv_dt - self.s_rho[k];
        }
        for j in 0..self.mesh.dim() {
            for k in 0..n {
                let l = self.nb.plus[j][k];
                let (up, um, _) = upwind_parts(us(j, k));
                let f = (rho[k] * up + rho[l] * um - self.c * (rho[l] - rho[k])) * ih;
                out[k] += f;
                out[l] -= f;
            }
        }
    }

    fn fv_residual(&self, x: &[f64], out: &mut [f64]) {
        let (n, d) = (self.mesh.cell_count(), self.mesh.dim());
        let ih = 1.0 / self.mesh.h();
        let ih2 = ih * ih;
        let rho = &x[..n];
        let u = |i: usize| &x[(1 + i) * n..(2 + i) * n];
        self.mass_residual(x, out, |j, k| 0.5 * (u(j)[k] + u(j)[self.nb.plus[j][k]]));
        let p: Vec<f64> = rho.iter().map(|&r| self.law.p(r)).collect();
        let mut delta = vec![0.0; n];
        for j in 0..d {
            let uj = u(j);
            for k in 0..n {
                delta[k] += 0.5 * ih * (uj[self.nb.plus[j][k]] - uj[self.nb.minus[j][k]]);
            }
        }
        for i in 0..d {
            let ui = u(i);
            let row = &mut out[(1 + i) * n..(2 + i) * n];
            let (pl, mi) = (&self.nb.plus[i], &self.nb.minus[i]);
            for k in 0..n {
                let mut lap = 0.0;
                for j in 0..d {
                    lap += ui[self.nb.plus[j][k]] - 2.0 * ui[k] + ui[self.nb.minus[j][k]];
                }
                row[k] = (rho[k] * ui[k] - self.q0[i][k]) * self.inv_dt + 0.5 * ih * (p[pl[k]] - p[mi[k]])
                    - self.mu * ih2 * lap
                    - self.nu * 0.5 * ih * (delta[pl[k]] - delta[mi[k]])
                    - self.s_m[i][k];
            }
            for j in 0..d {
                let uj = u(j);
                for k in 0..n {
                    let l = self.nb.plus[j][k];
                    let (up, um, _) = upwind_parts(0.5 * (uj[k] + uj[l]));
                    let (qk, ql) = (rho[k] * ui[k], rho[l] * ui[l]);
                    let g = (qk * up + ql * um - self.c * (ql - qk)) * ih;
                    row[k] += g;
                    row[l] -= g;
                }
            }
        }
    }

    fn fv_jacobian(&self, x: &[f64], add: &mut impl FnMut(usize, usize, f64)) {
        let (n, d) = (self.mesh.cell_count(), self.mesh.dim());
        let ih = 1.0 / self.mesh.h();
        let ih2 = ih * ih;
        let c = self.c;
        let rho = &x[..n];
        let u = |i: usize| &x[(1 + i) * n..(2 + i) * n];
        let var = |i: usize, k: usize| (1 + i) * n + k;
        for k in 0..n {
            add(k, k, self.inv_dt);
        }
        for i in 0..d {
            for k in 0..n {
                add(var(i, k), k, u(i)[k] * self.inv_dt);
                add(var(i, k), var(i, k), rho[k] * self.inv_dt);
            }
        }
        for j in 0..d {
            let uj = u(j);
            for k in 0..n {
                let l = self.nb.plus[j][k];
                let (up, um, hv) = upwind_parts(0.5 * (uj[k] + uj[l]));
                let (ak, al) = (up + c, um - c);
                let b = 0.5 * (rho[k] * hv + rho[l] * (1.0 - hv));
                for (row, s) in [(k, ih), (l, -ih)] {
                    add(row, k, s * ak);
                    add(row, l, s * al);
                    add(row, var(j, k), s * b);
                    add(row, var(j, l), s * b);
                }
                for i in 0..d {
                    let ui = u(i);
                    let bq = 0.5 * (rho[k] * ui[k] * hv + rho[l] * ui[l] * (1.0 - hv));
                    for (cell, s) in [(k, ih), (l, -ih)] {
                        let row = var(i, cell);
                        add(row, k, s * ak * ui[k]);
                        add(row, var(i, k), s * ak * rho[k]);
                        add(row, l, s * al * ui[l]);
                        add(row, var(i, l), s * al * rho[l]);
                        add(row, var(j, k), s * bq);
                        add(row, var(j, l), s * bq);
                    }
                }
            }
        }
        let cn = -self.nu * 0.25 * ih2;
        for i in 0..d {
            let (pl, mi) = (&self.nb.plus[i], &self.nb.minus[i]);
            for k in 0..n {
                let row = var(i, k);
                add(row, pl[k], 0.5 * ih * self.law.dp(rho[pl[k]]));
                add(row, mi[k], -0.5 * ih * self.law.dp(rho[mi[k]]));
                add(row, row, 2.0 * d as f64 * self.mu * ih2);
                for j in 0..d {
                    add(row, var(i, self.nb.plus[j][k]), -self.mu * ih2);
                    add(row, var(i, self.nb.minus[j][k]), -self.mu * ih2);
                }
                let (cp, cm) = (pl[k], mi[k]);
                for j in 0..d {
                    add(row, var(j, self.nb.plus[j][cp]), cn);
                    add(row, var(j, self.nb.minus[j][cp]), -cn);
                    add(row, var(j, self.nb.plus[j][cm]), -cn);
                    add(row, var(j, self.nb.minus[j][cm]), cn);
                }
            }
        }
    }

    /// `overline{u}_i` on cells.
    fn cell_means(&self, x: &[f64], i: usize) -> Vec<f64> {
        let n = self.mesh.cell_count();
        let ui = &x[(1 + i) * n..(2 + i) * n];
        (0..n).map(|k| 0.5 * (ui[k] + ui[self.nb.minus[i][k]])).collect()
    }

    fn mac_residual(&self, x: &[f64], out: &mut [f64]) {
        let (n, d) = (self.mesh.cell_count(), self.mesh.dim());
        let ih = 1.0 / self.mesh.h();
        let ih2 = ih * ih;
        let rho = &x[..n];
        let u = |i: usize| &x[(1 + i) * n..(2 + i) * n];
        self.mass_residual(x, out, |j, k| u(j)[k]);
        let p: Vec<f64> = rho.iter().map(|&r| self.law.p(r)).collect();
        let mut delta = vec![0.0; n];
        for j in 0..d {
            let uj = u(j);
            for k in 0..n {
                delta[k] += ih * (uj[k] - uj[self.nb.minus[j][k]]);
            }
        }
        let mut cell = vec![0.0; n];
        for i in 0..d {
            let ub = self.cell_means(x, i);
            for k in 0..n {
                cell[k] = (rho[k] * ub[k] - self.q0[i][k]) * self.inv_dt;
            }
            for j in 0..d {
                let uj = u(j);
                for k in 0..n {
                    let l = self.nb.plus[j][k];
                    let (up, um, _) = upwind_parts(uj[k]);
                    let w = 0.5 * (ub[k] + ub[l]);
                    let g = (rho[k] * ub[k] * up + rho[l] * ub[l] * um - self.c * (rho[l] - rho[k]) * w) * ih;
                    cell[k] += g;
                    cell[l] -= g;
                }
            }
            let ui = u(i);
            let pl = &self.nb.plus[i];
            let row = &mut out[(1 + i) * n..(2 + i) * n];
            for k in 0..n {
                let mut lap = 0.0;
                for j in 0..d {
                    lap += ui[self.nb.plus[j][k]] - 2.0 * ui[k] + ui[self.nb.minus[j][k]];
                }
                row[k] = 0.5 * (cell[k] + cell[pl[k]]) + ih * (p[pl[k]] - p[k])
                    - self.mu * ih2 * lap
                    - self.nu * ih * (delta[pl[k]] - delta[k])
                    - self.s_m[i][k];
            }
        }
    }

    fn mac_jacobian(&self, x: &[f64], add: &mut impl FnMut(usize, usize, f64)) {
        let (n, d) = (self.mesh.cell_count(), self.mesh.dim());
        let ih = 1.0 / self.mesh.h();
        let ih2 = ih * ih;
        let c = self.c;
        let rho = &x[..n];
        let u = |i: usize| &x[(1 + i) * n..(2 + i) * n];
        let var = |i: usize, k: usize| (1 + i) * n + k;
        let nb = &self.nb;
        // A cell quantity of component i at `cell` feeds faces (i, cell) and (i, cell - e_i).
        let cell_entry = |add: &mut dyn FnMut(usize, usize, f64), i: usize, cell: usize, col: usize, v: f64| {
            add(var(i, cell), col, 0.5 * v);
            add(var(i, nb.minus[i][cell]), col, 0.5 * v);
        };
        // Derivative with respect to overline{u}_i at cell `at`.
        let mean_entry = |ce: &mut dyn FnMut(usize, usize, usize, f64), i: usize, cell: usize, at: usize, v: f64| {
            ce(i, cell, var(i, at), 0.5 * v);
            ce(i, cell, var(i, nb.minus[i][at]), 0.5 * v);
        };

        for k in 0..n {
            add(k, k, self.inv_dt);
        }
        for j in 0..d {
            let uj = u(j);
            for k in 0..n {
                let l = nb.plus[j][k];
                let (up, um, hv) = upwind_parts(uj[k]);
                let b = rho[k] * hv + rho[l] * (1.0 - hv);
                for (row, s) in [(k, ih), (l, -ih)] {
                    add(row, k, s * (up + c));
                    add(row, l, s * (um - c));
                    add(row, var(j, k), s * b);
                }
            }
        }
        for i in 0..d {
            let ub = self.cell_means(x, i);
            let mut ce = |i: usize, cell: usize, col: usize, v: f64| cell_entry(&mut *add, i, cell, col, v);
            for k in 0..n {
                ce(i, k, k, ub[k] * self.inv_dt);
                mean_entry(&mut ce, i, k, k, rho[k] * self.inv_dt);
            }
            for j in 0..d {
                let uj = u(j);
                for k in 0..n {
                    let l = nb.plus[j][k];
                    let (up, um, hv) = upwind_parts(uj[k]);
                    let w = 0.5 * (ub[k] + ub[l]);
                    let dr = rho[l] - rho[k];
                    let g_rk = ub[k] * up + c * w;
                    let g_rl = ub[l] * um - c * w;
                    let g_bk = rho[k] * up - 0.5 * c * dr;
                    let g_bl = rho[l] * um - 0.5 * c * dr;
                    let g_us = rho[k] * ub[k] * hv + rho[l] * ub[l] * (1.0 - hv);
                    for (cell, s) in [(k, ih), (l, -ih)] {
                        ce(i, cell, k, s * g_rk);
                        ce(i, cell, l, s * g_rl);
                        mean_entry(&mut ce, i, cell, k, s * g_bk);
                        mean_entry(&mut ce, i, cell, l, s * g_bl);
                        ce(i, cell, var(j, k), s * g_us);
                    }
                }
            }
        }
        let cn = -self.nu * ih2;
        for i in 0..d {
            let pl = &nb.plus[i];
            for k in 0..n {
                let row = var(i, k);
                add(row, pl[k], ih * self.law.dp(rho[pl[k]]));
                add(row, k, -ih * self.law.dp(rho[k]));
                add(row, row, 2.0 * d as f64 * self.mu * ih2);
                for j in 0..d {
                    add(row, var(i, nb.plus[j][k]), -self.mu * ih2);
                    add(row, var(i, nb.minus[j][k]), -self.mu * ih2);
                }
                let cp = pl[k];
                for j in 0..d {
                    add(row, var(j, cp), cn);
                    add(row, var(j, nb.minus[j][cp]), -cn);
                    add(row, var(j, k), -cn);
                    add(row, var(j, nb.minus[j][k]), cn);
                }
            }
        }
    }
}

fn check_pair(prev: &FluidState, cand: &FluidState, cfg: &SchemeConfig, kind: SchemeKind) -> Result<f64> {
    if prev.mesh() != cand.mesh() {
        return Err(Error::MeshMismatch);
    }
    if prev.kind() != kind || cand.kind() != kind || cfg.scheme != kind {
        return Err(Error::VelocityKind(kind.name()));
    }
    cand.check_positive()?;
    let dt = cand.time - prev.time;
    Ok(if dt > 0.0 { dt } else { cfg.dt })
}

/// Residual of the FV scheme for the candidate `cand` following `prev`. The step is
/// `cand.time - prev.time` when positive, `cfg.dt` otherwise.
pub fn fv_residual(prev: &FluidState, cand: &FluidState, cfg: &SchemeConfig) -> Result<(CellField, CellVectorField)> {
    let dt = check_pair(prev, cand, cfg, SchemeKind::Fv)?;
    let sys = System::new(prev, cfg, dt, prev.time + dt)?;
    let m = *prev.mesh();
    let n = m.cell_count();
    let mut r = vec![0.0; sys.len()];
    sys.residual(&cand.pack(), &mut r);
    let mass = CellField::from_vec(m, r[..n].to_vec());
    let mom = (0..m.dim()).map(|i| CellField::from_vec(m, r[(1 + i) * n..(2 + i) * n].to_vec())).collect();
    Ok((mass, CellVectorField::from_components(mom)))
}

/// Residual of the MAC scheme; momentum rows live on faces.
pub fn mac_residual(prev: &FluidState, cand: &FluidState, cfg: &SchemeConfig) -> Result<(CellField, StaggeredField)> {
    let dt = check_pair(prev, cand, cfg, SchemeKind::Mac)?;
    let sys = System::new(prev, cfg, dt, prev.time + dt)?;
    let m = *prev.mesh();
    let n = m.cell_count();
    let mut r = vec![0.0; sys.len()];
    sys.residual(&cand.pack(), &mut r);
    let mass = CellField::from_vec(m, r[..n].to_vec());
    let mom = (0..m.dim()).map(|i| r[(1 + i) * n..(2 + i) * n].to_vec()).collect();
    Ok((mass, StaggeredField::from_vecs(m, mom)))
}

/// The MAC stabilization `-h^(eps+1) sum_i sum_j int <overline{u_i}>^(j) d_{D_j} rho d_{D_j} overline{phi_i}`
/// tested with the indicator of each face, per unit measure.
pub fn mac_stabilization(rho: &CellField, u: &StaggeredField, eps: f64) -> Result<StaggeredField> {
    let m = *rho.mesh();
    if u.mesh() != &m {
        return Err(Error::MeshMismatch);
    }
    let h = m.h();
    let scale = -diffusion_scale(h, eps)? * h;
    let ubar = ops::cell_average_staggered(u);
    let grad_rho = ops::grad_d(rho);
    let d = m.dim();
    let mut out = vec![vec![0.0; m.cell_count()]; d];
    for i in 0..d {
        let avg = ops::average_face(ubar.component(i));
        // Per cell: sum_j over its faces of <ubar_i> d_D rho * (d_D indicator) / h^d * h^d.
        let mut cell = vec![0.0; m.cell_count()];
        for j in 0..d {
            for k in m.cells() {
                let l = m.shift(k, j, 1);
                let v = avg.component(j)[k] * grad_rho.component(j)[k] / h;
                // d_{D_j} of the indicator of cell k is -1/h on this face, of cell l it is +1/h.
                cell[k] -= v;
                cell[l] += v;
            }
        }
        for k in m.cells() {
            out[i][k] = scale * 0.5 * (cell[k] + cell[m.shift(k, i, 1)]);
        }
    }
    Ok(StaggeredField::from_vecs(m, out))
}
