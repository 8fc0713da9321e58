//! Averages, jumps, discrete gradients and divergences, and projections of smooth
//! functions onto the discrete spaces.

use crate::fields::{CellField, CellVectorField, StaggeredField, TensorField};
use crate::mesh::Mesh;
use crate::smooth::SmoothFunction;

/// `<r>_sigma = (r_K + r_L) / 2` on every face, grouped by direction.
pub fn average_face(r: &CellField) -> StaggeredField {
    let m = *r.mesh();
    let v = r.values();
    StaggeredField::from_vecs(m, (0..m.dim()).map(|i| m.cells().map(|k| 0.5 * (v[k] + v[m.shift(k, i, 1)])).collect()).collect())
}

/// `[[r]]_sigma = r_L - r_K`.
pub fn jump_face(r: &CellField) -> StaggeredField {
    let m = *r.mesh();
    let v = r.values();
    StaggeredField::from_vecs(m, (0..m.dim()).map(|i| m.cells().map(|k| v[m.shift(k, i, 1)] - v[k]).collect()).collect())
}

/// `<v> = (<v_1>^(1), .., <v_d>^(d))`, a staggered field.
pub fn average_vector(v: &CellVectorField) -> StaggeredField {
    let m = *v.mesh();
    let comps = (0..m.dim())
        .map(|i| {
            let c = v.component(i).values();
            m.cells().map(|k| 0.5 * (c[k] + c[m.shift(k, i, 1)])).collect()
        })
        .collect();
    StaggeredField::from_vecs(m, comps)
}

/// `overline{u}_i|_K = (u_{sigma_{K,i+}} + u_{sigma_{K,i-}}) / 2`, which is `Pi_Q u`.
pub fn cell_average_staggered(u: &StaggeredField) -> CellVectorField {
    let m = *u.mesh();
    let comps = (0..m.dim())
        .map(|i| {
            let c = u.component(i);
            CellField::from_vec(m, m.cells().map(|k| 0.5 * (c[k] + c[m.shift(k, i, -1)])).collect())
        })
        .collect();
    CellVectorField::from_components(comps)
}

/// `(d_{D_i} r)_sigma = (r_L - r_K) / h` for `sigma in E_i`.
pub fn grad_d(r: &CellField) -> StaggeredField {
    let m = *r.mesh();
    let inv_h = 1.0 / m.h();
    let v = r.values();
    StaggeredField::from_vecs(
        m,
        (0..m.dim()).map(|i| m.cells().map(|k| (v[m.shift(k, i, 1)] - v[k]) * inv_h).collect()).collect(),
    )
}

/// `grad_D v`: entry `(i, j)` is `d_{D_j} v_i`, living on the faces of `E_j`.
pub fn grad_d_vector(v: &CellVectorField) -> TensorField {
    let m = *v.mesh();
    let d = m.dim();
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        let g = grad_d(v.component(i));
        for j in 0..d {
            entries.push(g.component(j).to_vec());
        }
    }
    TensorField::from_entries(m, entries)
}

/// `grad_B u`: entry `(i, j)` is `d_{B_ij} u_i = (u_sigma' - u_sigma) / h` on bidual
/// cells of `B_ij`, indexed as in [`Mesh::bidual_faces`].
pub fn grad_b(u: &StaggeredField) -> TensorField {
    let m = *u.mesh();
    let d = m.dim();
    let inv_h = 1.0 / m.h();
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        let c = u.component(i);
        for j in 0..d {
            let e: Vec<f64> = if i == j {
                m.cells().map(|k| (c[k] - c[m.shift(k, i, -1)]) * inv_h).collect()
            } else {
                m.cells().map(|k| (c[m.shift(k, j, 1)] - c[k]) * inv_h).collect()
            };
            entries.push(e);
        }
    }
    TensorField::from_entries(m, entries)
}

/// `d_{M,i} u_i|_K = (u_{sigma_{K,i+}} - u_{sigma_{K,i-}}) / h` for one component.
pub fn partial_m(m: &Mesh, ui: &[f64], i: usize) -> CellField {
    let inv_h = 1.0 / m.h();
    CellField::from_vec(*m, m.cells().map(|k| (ui[k] - ui[m.shift(k, i, -1)]) * inv_h).collect())
}

pub fn div_w(u: &StaggeredField) -> CellField {
    let m = *u.mesh();
    let inv_h = 1.0 / m.h();
    let mut out = vec![0.0; m.cell_count()];
    for i in 0..m.dim() {
        let c = u.component(i);
        for k in m.cells() {
            out[k] += (c[k] - c[m.shift(k, i, -1)]) * inv_h;
        }
    }
    CellField::from_vec(m, out)
}

/// `div_Q v = sum_i d_{M,i} <v_i>^(i) = sum_i (v_{i,K+e_i} - v_{i,K-e_i}) / 2h`.
pub fn div_q(v: &CellVectorField) -> CellField {
    let m = *v.mesh();
    let s = 0.5 / m.h();
    let mut out = vec![0.0; m.cell_count()];
    for i in 0..m.dim() {
        let c = v.component(i).values();
        for k in m.cells() {
            out[k] += (c[m.shift(k, i, 1)] - c[m.shift(k, i, -1)]) * s;
        }
    }
    CellField::from_vec(m, out)
}

/// `grad_Q v|_K = sum_{sigma in E(K)} |sigma|/|K| <v> (x) n`; entry `(i, j)` per cell.
pub fn grad_q(v: &CellVectorField) -> TensorField {
    let m = *v.mesh();
    let d = m.dim();
    let s = 0.5 / m.h();
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        let c = v.component(i).values();
        for j in 0..d {
            entries.push(m.cells().map(|k| (c[m.shift(k, j, 1)] - c[m.shift(k, j, -1)]) * s).collect());
        }
    }
    TensorField::from_entries(m, entries)
}

/// `Pi_Q f` at time `t`: cell averages.
pub fn project_q(f: &dyn SmoothFunction, t: f64, m: &Mesh) -> CellField {
    CellField::from_vec(*m, f.lattice_means(t, &m.cell_lattice()))
}

/// `Pi_E^(i) f`: averages over the faces of `E_i`.
pub fn project_e_component(f: &dyn SmoothFunction, i: usize, t: f64, m: &Mesh) -> Vec<f64> {
    f.lattice_means(t, &m.face_lattice(i))
}

/// `Pi_E F = (Pi_E^(1) F_1, .., Pi_E^(d) F_d)`.
pub fn project_e(fs: &[&dyn SmoothFunction], t: f64, m: &Mesh) -> StaggeredField {
    StaggeredField::from_vecs(*m, (0..m.dim()).map(|i| project_e_component(fs[i], i, t, m)).collect())
}

/// Averages over the dual faces `eps in E~_ij`, indexed like bidual cells of `B_ij`.
pub fn project_eps(f: &dyn SmoothFunction, i: usize, j: usize, t: f64, m: &Mesh) -> Vec<f64> {
    f.lattice_means(t, &m.dual_face_lattice(i, j))
}

/// Averages over the dual cells `D_sigma`, `sigma in E_i`.
pub fn project_dual(f: &dyn SmoothFunction, i: usize, t: f64, m: &Mesh) -> Vec<f64> {
    f.lattice_means(t, &m.dual_lattice(i))
}

/// Averages over the bidual cells of `B_ij`.
pub fn project_bidual(f: &dyn SmoothFunction, i: usize, j: usize, t: f64, m: &Mesh) -> Vec<f64> {
    f.lattice_means(t, &m.bidual_lattice(i, j))
}

/// `grad^{Pi_E} f = (d_{M,1} Pi_E^(1) f, .., d_{M,d} Pi_E^(d) f)`.
pub fn grad_pi_e(f: &dyn SmoothFunction, t: f64, m: &Mesh) -> CellVectorField {
    CellVectorField::from_components((0..m.dim()).map(|i| partial_m(m, &project_e_component(f, i, t, m), i)).collect())
}
