//! Summation-by-parts identities and projection estimates, evaluated on random data.
//!
//! Integrals of piecewise-constant fields against smooth functions are sums of field
//! values times exact box averages of trigonometric polynomials, so every identity
//! holds to rounding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::eoc::fit_order;
use crate::fields::{CellField, CellVectorField, StaggeredField};
use crate::mesh::Mesh;
use crate::ops;
use crate::smooth::{random_trig, SmoothFunction, TrigPoly};

pub const REL_TOL: f64 = 1e-12;
pub const ABS_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `lhs == rhs` up to the identity tolerance.
    Equal,
    /// `lhs <= rhs`.
    AtMost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityResidual {
    pub name: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs|`, or for field-valued identities the max pointwise difference.
    pub abs_diff: f64,
}

impl IdentityResidual {
    fn equal(name: &str, lhs: f64, rhs: f64) -> Self {
        IdentityResidual { name: name.into(), relation: Relation::Equal, lhs, rhs, abs_diff: (lhs - rhs).abs() }
    }

    fn at_most(name: &str, lhs: f64, rhs: f64) -> Self {
        IdentityResidual { name: name.into(), relation: Relation::AtMost, lhs, rhs, abs_diff: (lhs - rhs).abs() }
    }

    fn fields(name: &str, a: &[f64], b: &[f64]) -> Self {
        let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let na = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let nb = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        IdentityResidual { name: name.into(), relation: Relation::Equal, lhs: na, rhs: nb, abs_diff: diff }
    }

    /// Relative residual `|lhs - rhs| / max(|lhs|, |rhs|)`, or the absolute one when both vanish.
    pub fn relative(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale == 0.0 { self.abs_diff } else { self.abs_diff / scale }
    }

    pub fn passed(&self) -> bool {
        let scale = self.lhs.abs().max(self.rhs.abs());
        match self.relation {
            Relation::Equal => self.abs_diff <= REL_TOL * scale + ABS_FLOOR,
            Relation::AtMost => self.lhs <= self.rhs * (1.0 + REL_TOL) + ABS_FLOOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    pub rows: Vec<IdentityResidual>,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed())
    }

    /// Largest relative residual over the equalities.
    pub fn max_relative(&self) -> f64 {
        self.rows.iter().filter(|r| r.relation == Relation::Equal).map(|r| r.relative()).fold(0.0, f64::max)
    }
}

fn sum_products(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn div_of(u: &[TrigPoly]) -> TrigPoly {
    u.iter().enumerate().fold(TrigPoly::zero(u[0].dim()), |acc, (i, ui)| acc.add(&ui.d_dx(i)))
}

/// `int_T u_h . grad f` for a staggered field: component `i` against dual-cell means of `d_i f`.
fn staggered_dot_grad(u: &StaggeredField, f: &TrigPoly, m: &Mesh) -> f64 {
    let vol = m.cell_volume();
    (0..m.dim()).map(|i| sum_products(u.component(i), &ops::project_dual(&f.d_dx(i), i, 0.0, m))).sum::<f64>() * vol
}

/// `int_T v_h . g` for a cell vector field and smooth vector `g`.
fn cell_dot(v: &CellVectorField, g: &[TrigPoly], m: &Mesh) -> f64 {
    let vol = m.cell_volume();
    (0..m.dim()).map(|i| sum_products(v.component(i).values(), ops::project_q(&g[i], 0.0, m).values())).sum::<f64>()
        * vol
}

/// `sum_i int_T Pi_eps^(i) f  d_{M,i} u_i`, the per-direction pairing behind `Pi_eps f div_W u`.
fn pi_eps_pairing(u: &StaggeredField, f: &TrigPoly, m: &Mesh) -> f64 {
    let vol = m.cell_volume();
    (0..m.dim())
        .map(|i| sum_products(ops::partial_m(m, u.component(i), i).values(), &ops::project_eps(f, i, i, 0.0, m)))
        .sum::<f64>()
        * vol
}

/// `(Pi_E^(i) d_i U_j)` on the faces of `E_i`, indexed `[i][j]`.
fn face_gradients(uu: &[TrigPoly], m: &Mesh) -> Vec<Vec<Vec<f64>>> {
    (0..m.dim()).map(|i| (0..m.dim()).map(|j| ops::project_e_component(&uu[j].d_dx(i), i, 0.0, m)).collect()).collect()
}

/// Evaluates every identity once for one random draw.
pub fn ibp_identity_suite(m: &Mesh, seed: u64) -> IdentityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = m.dim();
    let vol = m.cell_volume();
    let r = CellField::random(*m, &mut rng, -1.0, 1.0);
    let v = CellVectorField::random(*m, &mut rng, -1.0, 1.0);
    let u = StaggeredField::random(*m, &mut rng, -1.0, 1.0);
    let psi = random_trig(d, 4, 2, &mut rng);
    let uu: Vec<TrigPoly> = (0..d).map(|_| random_trig(d, 4, 2, &mut rng)).collect();
    let div_u = div_of(&uu);
    let grad_psi: Vec<TrigPoly> = (0..d).map(|i| psi.d_dx(i)).collect();
    let lap_u: Vec<TrigPoly> = uu.iter().map(|c| c.laplacian()).collect();
    let mut rows = Vec::new();

    let gr = ops::grad_d(&r);
    rows.push(IdentityResidual::equal("IBP2", r.inner(&ops::div_w(&u)), -u.inner(&gr)));
    for i in 0..d {
        let lhs = r.inner(&ops::partial_m(m, u.component(i), i));
        let rhs = -vol * sum_products(u.component(i), gr.component(i));
        rows.push(IdentityResidual::equal(&format!("IBP2[{i}]"), lhs, rhs));
    }

    let refs: Vec<&dyn SmoothFunction> = uu.iter().map(|p| p as &dyn SmoothFunction).collect();
    let pe_u = ops::project_e(&refs, 0.0, m);
    rows.push(IdentityResidual::equal("Divcd", r.inner(&ops::project_q(&div_u, 0.0, m)), r.inner(&ops::div_w(&pe_u))));

    rows.push(IdentityResidual::equal("Divcd2", cell_dot(&v, &grad_psi, m), v.inner(&ops::grad_pi_e(&psi, 0.0, m))));

    rows.push(IdentityResidual::equal("IBP3", staggered_dot_grad(&u, &psi, m), -pi_eps_pairing(&u, &psi, m)));

    let gv = ops::grad_d_vector(&v);
    let ibp4_rhs = -vol
        * (0..d).map(|i| sum_products(&ops::project_e_component(&psi, i, 0.0, m), gv.entry(i, i))).sum::<f64>();
    rows.push(IdentityResidual::equal("IBP4", cell_dot(&v, &grad_psi, m), ibp4_rhs));

    // IBP5: cell average of u against the Laplacian, in the grad_D form and in the
    // bidual form where each d_{B_ji} u_j meets the mean of its two neighbouring faces.
    let ubar = ops::cell_average_staggered(&u);
    let fg = face_gradients(&uu, m);
    let lhs5 = cell_dot(&ubar, &lap_u, m);
    let gub = ops::grad_d_vector(&ubar);
    let mut rhs5d = 0.0;
    for i in 0..d {
        for j in 0..d {
            rhs5d -= vol * sum_products(gub.entry(j, i), &fg[i][j]);
        }
    }
    let gb = ops::grad_b(&u);
    let mut rhs5b = 0.0;
    for i in 0..d {
        for j in 0..d {
            let b = gb.entry(j, i);
            let p = &fg[i][j];
            for c in m.cells() {
                let other = if i == j { m.shift(c, i, -1) } else { m.shift(c, j, 1) };
                rhs5b -= vol * b[c] * 0.5 * (p[c] + p[other]);
            }
        }
    }
    rows.push(IdentityResidual::equal("IBP5", lhs5, rhs5b));
    rows.push(IdentityResidual::equal("IBP5-D", lhs5, rhs5d));

    rows.push(IdentityResidual::equal("IBP6", staggered_dot_grad(&u, &div_u, m), -pi_eps_pairing(&u, &div_u, m)));

    let mut rhs7 = 0.0;
    for i in 0..d {
        for j in 0..d {
            rhs7 -= vol * sum_products(gv.entry(j, i), &fg[i][j]);
        }
    }
    rows.push(IdentityResidual::equal("IBP7", cell_dot(&v, &lap_u, m), rhs7));

    let av = ops::average_vector(&v);
    rows.push(IdentityResidual::equal("IBP9", staggered_dot_grad(&av, &div_u, m), -pi_eps_pairing(&av, &div_u, m)));

    rows.push(IdentityResidual::fields("diveq", ops::div_w(&av).values(), ops::div_q(&v).values()));

    for i in 0..d {
        rows.push(IdentityResidual::fields(
            &format!("B_ii=M_i[{i}]"),
            gb.entry(i, i),
            ops::partial_m(m, u.component(i), i).values(),
        ));
        let avg_grad = ops::cell_average_staggered(&gr);
        let ar = ops::average_face(&r);
        rows.push(IdentityResidual::fields(
            &format!("avg(D_i)=M_i<.>[{i}]"),
            avg_grad.component(i).values(),
            ops::partial_m(m, ar.component(i), i).values(),
        ));
    }

    let (lhs, rhs) = nc1_staggered(&u);
    rows.push(IdentityResidual::at_most("NC1-W", lhs, rhs));
    let (lhs, rhs) = nc1_cell(&v);
    rows.push(IdentityResidual::at_most("NC1-Q", lhs, rhs));

    IdentityReport { dim: d, n: m.n(), seed, rows }
}

/// `(||Pi_Q u - u||, h/2 ||grad_B u||)`, both in `L^2`.
pub fn nc1_staggered(u: &StaggeredField) -> (f64, f64) {
    let m = *u.mesh();
    let half = 0.5 * m.cell_volume();
    let ubar = ops::cell_average_staggered(u);
    let mut acc = 0.0;
    for i in 0..m.dim() {
        let c = u.component(i);
        let b = ubar.component(i).values();
        for k in m.cells() {
            acc += half * ((b[k] - c[k]).powi(2) + (b[k] - c[m.shift(k, i, -1)]).powi(2));
        }
    }
    (acc.sqrt(), 0.5 * m.h() * ops::grad_b(u).norm_sq().sqrt())
}

/// `(||<v> - v||, h/2 ||grad_D v||)`, both in `L^2`.
pub fn nc1_cell(v: &CellVectorField) -> (f64, f64) {
    let m = *v.mesh();
    let half = 0.5 * m.cell_volume();
    let av = ops::average_vector(v);
    let mut acc = 0.0;
    for i in 0..m.dim() {
        let c = v.component(i).values();
        let a = av.component(i);
        for k in m.cells() {
            acc += half * ((a[k] - c[k]).powi(2) + (a[m.shift(k, i, -1)] - c[k]).powi(2));
        }
    }
    (acc.sqrt(), 0.5 * m.h() * ops::grad_d_vector(v).norm_sq().sqrt())
}

/// `||c - f||_{L^2}^2` for a field constant on each box of a lattice.
fn box_l2_sq(c: &[f64], f: &TrigPoly, lat: &crate::mesh::BoxLattice) -> f64 {
    let vol = lat.h.powi(lat.dim as i32);
    let mean = f.lattice_means(0.0, lat);
    let mean_sq = f.mul(f).lattice_means(0.0, lat);
    let s: f64 = c.iter().zip(mean.iter().zip(&mean_sq)).map(|(&c, (&a, &b))| c * c - 2.0 * c * a + b).sum();
    (s * vol).max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionSeries {
    pub name: String,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`; `None` if the errors vanish.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReport {
    pub ns: Vec<usize>,
    pub series: Vec<ProjectionSeries>,
}

/// Measures the projection errors of a smooth vector field over a mesh ladder:
/// `Pi_Q` itself, and the estimates of the face, dual-face and discrete-operator
/// projections.
pub fn projection_error_suite(field: &[TrigPoly], dim: usize, ns: &[usize]) -> ProjectionReport {
    let names = ["PiQ", "NC2", "NC3-eps", "NC3-eps-E", "NC4-gradQ", "NC4-lapD"];
    let mut errs: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let div_u = div_of(field);
    let mut hs = Vec::new();
    for &n in ns {
        let m = Mesh::new(dim, n).expect("valid ladder level");
        hs.push(m.h());
        let half = 0.5 * m.cell_volume();
        let cells = m.cell_lattice();

        let mut e = 0.0;
        for f in field {
            e += box_l2_sq(ops::project_q(f, 0.0, &m).values(), f, &cells);
        }
        errs[0].push(e.sqrt());

        let mut e: f64 = 0.0;
        for i in 0..dim {
            for uj in field {
                let g = uj.d_dx(i);
                e = e.max(box_l2_sq(&ops::project_e_component(&g, i, 0.0, &m), &g, &m.dual_lattice(i)));
            }
        }
        errs[1].push(e.sqrt());

        let (mut e_eps, mut e_eps_e): (f64, f64) = (0.0, 0.0);
        for i in 0..dim {
            let pe = ops::project_eps(&div_u, i, i, 0.0, &m);
            e_eps = e_eps.max(box_l2_sq(&pe, &div_u, &cells));
            let pf = ops::project_e_component(&div_u, i, 0.0, &m);
            let mut acc = 0.0;
            for k in m.cells() {
                acc += half * ((pe[k] - pf[k]).powi(2) + (pe[k] - pf[m.shift(k, i, -1)]).powi(2));
            }
            e_eps_e = e_eps_e.max(acc);
        }
        errs[2].push(e_eps.sqrt());
        errs[3].push(e_eps_e.sqrt());

        let pq = CellVectorField::from_components(field.iter().map(|f| ops::project_q(f, 0.0, &m)).collect());
        let dq = ops::div_q(&pq);
        let s = 0.5 / m.h();
        let mut e = 0.0;
        for j in 0..dim {
            let g: Vec<f64> = m.cells().map(|k| (dq.values()[m.shift(k, j, 1)] - dq.values()[m.shift(k, j, -1)]) * s).collect();
            e += box_l2_sq(&g, &div_u.d_dx(j), &cells);
        }
        errs[4].push(e.sqrt());

        let mut e = 0.0;
        for (j, f) in field.iter().enumerate() {
            let lap = ops::div_w(&ops::grad_d(pq.component(j)));
            e += box_l2_sq(lap.values(), &f.laplacian(), &cells);
        }
        errs[5].push(e.sqrt());
    }
    let series = names
        .iter()
        .zip(errs)
        .map(|(name, errors)| ProjectionSeries { name: name.to_string(), order: fit_order(&hs, &errors), errors })
        .collect();
    ProjectionReport { ns: ns.to_vec(), series }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::Factor;

    #[test]
    fn suite_passes_on_small_grids() {
        for (d, n) in [(2, 4), (2, 5), (3, 4)] {
            let m = Mesh::new(d, n).unwrap();
            let rep = ibp_identity_suite(&m, 11);
            for row in &rep.rows {
                assert!(row.passed(), "{} failed on d={d} n={n}: {row:?}", row.name);
            }
        }
    }

    #[test]
    fn wrong_pairing_is_detected() {
        // Sanity check that the suite can fail: pairing with the wrong sign.
        let row = IdentityResidual::equal("x", 1.0, -1.0);
        assert!(!row.passed());
        let row = IdentityResidual::at_most("x", 1.0 + 1e-6, 1.0);
        assert!(!row.passed());
    }

    #[test]
    fn constant_projection_error_vanishes() {
        let c = vec![TrigPoly::constant(2, 1.5), TrigPoly::constant(2, -0.5)];
        let rep = projection_error_suite(&c, 2, &[4, 8, 16]);
        for s in &rep.series {
            assert!(s.errors.iter().all(|&e| e < 1e-6), "{}: {:?}", s.name, s.errors);
        }
    }

    #[test]
    fn sine_projection_is_first_order() {
        let f = vec![
            TrigPoly::term(2, 1.0, Factor::ONE, &[Factor::sin(1), Factor::ONE]),
            TrigPoly::term(2, 1.0, Factor::ONE, &[Factor::cos(1), Factor::sin(1)]),
        ];
        let rep = projection_error_suite(&f, 2, &[8, 16, 32, 64]);
        for s in &rep.series {
            assert!(s.order.unwrap() >= 0.9, "{}: {:?}", s.name, s.order);
        }
    }
}
