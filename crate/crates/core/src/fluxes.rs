//! Upwind and diffusive upwind fluxes.

use crate::error::{Error, Result};
use crate::fields::{CellField, CellVectorField, StaggeredField};
use crate::ops;
use crate::state::Velocity;

/// Normal velocity `u_sigma` on every face, oriented like the face.
pub type FaceVelocity = StaggeredField;

/// `<u> . n` for collocated velocities, `u . n` for staggered ones.
pub fn face_velocity(u: &Velocity) -> FaceVelocity {
    match u {
        Velocity::Collocated(v) => ops::average_vector(v),
        Velocity::Staggered(w) => w.clone(),
    }
}

/// `r_in u^+ + r_out u^-` for a face with `r_in = r_K`, `r_out = r_L`.
#[inline]
pub fn upwind_value(r_in: f64, r_out: f64, u: f64) -> f64 {
    r_in * u.max(0.0) + r_out * u.min(0.0)
}

/// `h^eps`, exactly 1 for `eps = 0`.
pub fn diffusion_scale(h: f64, eps: f64) -> Result<f64> {
    if !(eps > -1.0) {
        return Err(Error::InvalidParameter { name: "epsilon", reason: format!("must exceed -1, got {eps}") });
    }
    Ok(if eps == 0.0 { 1.0 } else { (eps * h.ln()).exp() })
}

pub fn upwind(r: &CellField, u_sigma: &FaceVelocity) -> StaggeredField {
    let m = *r.mesh();
    let v = r.values();
    StaggeredField::from_vecs(
        m,
        (0..m.dim())
            .map(|i| m.cells().map(|k| upwind_value(v[k], v[m.shift(k, i, 1)], u_sigma.component(i)[k])).collect())
            .collect(),
    )
}

/// `Up - h^eps [[r]]`.
pub fn diffusive_upwind(r: &CellField, u_sigma: &FaceVelocity, h: f64, eps: f64) -> Result<StaggeredField> {
    let c = diffusion_scale(h, eps)?;
    let m = *r.mesh();
    let v = r.values();
    Ok(StaggeredField::from_vecs(
        m,
        (0..m.dim())
            .map(|i| {
                m.cells()
                    .map(|k| {
                        let l = m.shift(k, i, 1);
                        upwind_value(v[k], v[l], u_sigma.component(i)[k]) - c * (v[l] - v[k])
                    })
                    .collect()
            })
            .collect(),
    ))
}

pub fn vector_upwind(phi: &CellVectorField, u_sigma: &FaceVelocity) -> Vec<StaggeredField> {
    phi.components().iter().map(|c| upwind(c, u_sigma)).collect()
}

pub fn vector_diffusive_upwind(phi: &CellVectorField, u_sigma: &FaceVelocity, h: f64, eps: f64) -> Result<Vec<StaggeredField>> {
    phi.components().iter().map(|c| diffusive_upwind(c, u_sigma, h, eps)).collect()
}

/// `(1/|K|) sum_{sigma in E(K)} |sigma| F_{sigma,K}` with outward orientation.
pub fn convective_cell_update(flux: &StaggeredField) -> CellField {
    let m = *flux.mesh();
    let inv_h = 1.0 / m.h();
    let mut out = vec![0.0; m.cell_count()];
    for i in 0..m.dim() {
        let f = flux.component(i);
        for k in m.cells() {
            out[k] += (f[k] - f[m.shift(k, i, -1)]) * inv_h;
        }
    }
    CellField::from_vec(m, out)
}
