//! Sparse linear solves for the Newton iteration.
//!
//! The Jacobian pattern is fixed per mesh and scheme, so the column structure, the
//! triplet permutation and the symbolic LU are computed once. Each solve runs
//! right-preconditioned GMRES with the most recent numeric LU; when that LU is too
//! stale to converge within a few iterations it is recomputed from the current matrix.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::MatMut;

use crate::error::{Error, Result};

use super::config::LinearSolverKind;

struct Pattern {
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    triplets: usize,
    lu: SymbolicLu<usize>,
}

/// A matrix assembled on the fixed pattern.
pub(crate) struct Matrix {
    inner: SparseColMat<usize, f64>,
}

impl Matrix {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let a = self.inner.as_ref();
        let col_ptr = a.symbolic().col_ptr();
        let row_idx = a.symbolic().row_idx();
        let val = a.val();
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for p in col_ptr[j]..col_ptr[j + 1] {
                y[row_idx[p]] += val[p] * xj;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinearStats {
    pub factorizations: usize,
    pub gmres_iterations: usize,
}

pub(crate) struct LinearSolver {
    kind: LinearSolverKind,
    tolerance: f64,
    lagged_iterations: usize,
    pattern: Option<Pattern>,
    lu: Option<Lu<usize, f64>>,
    pub stats: LinearStats,
}

const FRESH_ITERATIONS: usize = 60;
const RESTART: usize = 30;

impl LinearSolver {
    pub fn new(kind: LinearSolverKind, tolerance: f64, lagged_iterations: usize) -> Self {
        LinearSolver { kind, tolerance, lagged_iterations, pattern: None, lu: None, stats: LinearStats::default() }
    }

    pub fn has_pattern(&self) -> bool {
        self.pattern.is_some()
    }

    /// Records the sparsity pattern from the `(row, col)` sequence of an assembly.
    pub fn set_pattern(&mut self, n: usize, rows: &[usize], cols: &[usize]) -> Result<()> {
        let idx: Vec<Pair<usize, usize>> = rows.iter().zip(cols).map(|(&row, &col)| Pair { row, col }).collect();
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(n, n, &idx)
            .map_err(|e| Error::LinearSolver(format!("pattern: {e:?}")))?;
        let lu = SymbolicLu::try_new(symbolic.as_ref()).map_err(|e| Error::LinearSolver(format!("symbolic lu: {e:?}")))?;
        self.pattern = Some(Pattern { symbolic, argsort, triplets: idx.len(), lu });
        self.lu = None;
        Ok(())
    }

    /// Builds the matrix from values listed in the pattern's triplet order.
    pub fn matrix(&self, values: &[f64]) -> Result<Matrix> {
        let p = self.pattern.as_ref().ok_or_else(|| Error::LinearSolver("no pattern".into()))?;
        if values.len() != p.triplets {
            return Err(Error::LengthMismatch { expected: p.triplets, got: values.len() });
        }
        let inner = SparseColMat::new_from_argsort(p.symbolic.clone(), &p.argsort, values)
            .map_err(|e| Error::LinearSolver(format!("values: {e:?}")))?;
        Ok(Matrix { inner })
    }

    fn factor(&mut self, a: &Matrix) -> Result<()> {
        let p = self.pattern.as_ref().ok_or_else(|| Error::LinearSolver("no pattern".into()))?;
        let lu = Lu::try_new_with_symbolic(p.lu.clone(), a.inner.as_ref())
            .map_err(|e| Error::LinearSolver(format!("numeric lu: {e:?}")))?;
        self.lu = Some(lu);
        self.stats.factorizations += 1;
        Ok(())
    }

    pub fn solve(&mut self, a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
        if self.kind == LinearSolverKind::LaggedGmres {
            if let Some(lu) = &self.lu {
                if let Some((x, it)) = gmres(a, lu, b, self.tolerance, self.lagged_iterations) {
                    self.stats.gmres_iterations += it;
                    return Ok(x);
                }
                self.stats.gmres_iterations += self.lagged_iterations;
            }
        }
        self.factor(a)?;
        let lu = self.lu.as_ref().expect("factored above");
        match gmres(a, lu, b, self.tolerance, FRESH_ITERATIONS) {
            Some((x, it)) => {
                self.stats.gmres_iterations += it;
                Ok(x)
            }
            None => Err(Error::LinearSolver("gmres stalled with a fresh factorization".into())),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn precondition(lu: &Lu<usize, f64>, v: &[f64]) -> Vec<f64> {
    let mut z = v.to_vec();
    let n = z.len();
    lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut z, n, 1));
    z
}

/// Right-preconditioned restarted GMRES from a zero guess. Returns the solution and
/// iteration count once `|b - A x| <= tol |b|`, or `None` after `max_iter` iterations.
fn gmres(a: &Matrix, lu: &Lu<usize, f64>, b: &[f64], tol: f64, max_iter: usize) -> Option<(Vec<f64>, usize)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Some((x, 0));
    }
    let target = tol * bnorm;
    let mut r = b.to_vec();
    let mut total = 0;
    let mut w = vec![0.0; n];
    while total < max_iter {
        let beta = norm(&r);
        if beta <= target {
            return Some((x, total));
        }
        let m = RESTART.min(max_iter - total);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut hcols: Vec<Vec<f64>> = Vec::with_capacity(m);
        let (mut cs, mut sn) = (Vec::with_capacity(m), Vec::with_capacity(m));
        let mut g = vec![beta];
        let mut done = false;
        for j in 0..m {
            let zj = precondition(lu, &v[j]);
            a.apply(&zj, &mut w);
            z.push(zj);
            let mut hcol = vec![0.0; j + 2];
            for (i, vi) in v.iter().enumerate() {
                let hij: f64 = w.iter().zip(vi).map(|(a, b)| a * b).sum();
                hcol[i] = hij;
                w.iter_mut().zip(vi).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            let hn = norm(&w);
            hcol[j + 1] = hn;
            for i in 0..j {
                let (c, s): (f64, f64) = (cs[i], sn[i]);
                let t = c * hcol[i] + s * hcol[i + 1];
                hcol[i + 1] = -s * hcol[i] + c * hcol[i + 1];
                hcol[i] = t;
            }
            let rho = hcol[j].hypot(hcol[j + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (hcol[j] / rho, hcol[j + 1] / rho) };
            cs.push(c);
            sn.push(s);
            hcol[j] = rho;
            hcol[j + 1] = 0.0;
            g.push(-s * g[j]);
            g[j] *= c;
            hcols.push(hcol);
            total += 1;
            if g[j + 1].abs() <= target || hn == 0.0 {
                done = true;
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let k = hcols.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for l in i + 1..k {
                s -= hcols[l][i] * y[l];
            }
            if hcols[i][i] == 0.0 {
                return None;
            }
            y[i] = s / hcols[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.iter_mut().zip(zi).for_each(|(xk, zk)| *xk += yi * zk);
        }
        // True residual, so the exit test does not trust the recurrence.
        a.apply(&x, &mut w);
        r.iter_mut().zip(b.iter().zip(&w)).for_each(|(rk, (bk, wk))| *rk = bk - wk);
        if done && norm(&r) <= target {
            return Some((x, total));
        }
    }
    (norm(&r) <= target).then_some((x, total))
}
