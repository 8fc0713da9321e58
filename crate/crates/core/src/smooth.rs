//! Smooth periodic space-time functions and their box averages.
//!
//! Averages default to tensor Gauss-Legendre quadrature with 5 points per
//! non-degenerate axis. Trigonometric polynomials override this with closed forms,
//! which makes every projection of them exact up to rounding.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::mesh::BoxLattice;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, 5 points.
const GL5_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_W: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

pub trait SmoothFunction: Send + Sync {
    fn value(&self, t: f64, x: &[f64]) -> f64;

    /// Mean over the box `[lo, hi]`; axes with `lo == hi` are evaluated pointwise.
    fn box_mean(&self, t: f64, lo: &[f64], hi: &[f64]) -> f64 {
        gl5_box_mean(|x| self.value(t, x), lo, hi)
    }

    /// Means over every box of a lattice, in flatten order.
    fn lattice_means(&self, t: f64, lat: &BoxLattice) -> Vec<f64> {
        (0..lat.len())
            .map(|idx| {
                let (lo, hi) = lat.bounds(idx);
                self.box_mean(t, &lo[..lat.dim], &hi[..lat.dim])
            })
            .collect()
    }

    /// Space-time means over `[t0, t1] x box` for every box of a lattice.
    fn lattice_slab_means(&self, t0: f64, t1: f64, lat: &BoxLattice) -> Vec<f64> {
        if t1 == t0 {
            return self.lattice_means(t0, lat);
        }
        let (c, r) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
        let mut out = vec![0.0; lat.len()];
        for q in 0..5 {
            let m = self.lattice_means(c + r * GL5_X[q], lat);
            for (o, v) in out.iter_mut().zip(m) {
                *o += 0.5 * GL5_W[q] * v;
            }
        }
        out
    }
}

pub type SharedFn = Arc<dyn SmoothFunction>;

fn gl5_box_mean(f: impl Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64]) -> f64 {
    let d = lo.len();
    let live: Vec<usize> = (0..d).filter(|&a| hi[a] != lo[a]).collect();
    let total = 5usize.pow(live.len() as u32);
    let mut x = [0.0; 3];
    x[..d].copy_from_slice(lo);
    let mut acc = 0.0;
    for q in 0..total {
        let mut w = 1.0;
        let mut rem = q;
        for &a in &live {
            let p = rem % 5;
            rem /= 5;
            x[a] = 0.5 * (lo[a] + hi[a]) + 0.5 * (hi[a] - lo[a]) * GL5_X[p];
            w *= 0.5 * GL5_W[p];
        }
        acc += w * f(&x[..d]);
    }
    acc
}

/// A closure wrapped as a smooth function; averages use the default quadrature.
pub struct FnSmooth<F>(pub F);

impl<F: Fn(f64, &[f64]) -> f64 + Send + Sync> SmoothFunction for FnSmooth<F> {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        (self.0)(t, x)
    }
}

pub fn shared<F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static>(f: F) -> SharedFn {
    Arc::new(FnSmooth(f))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Wave {
    Cos,
    Sin,
}

/// `cos` or `sin` of `2 pi m s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Factor {
    pub wave: Wave,
    pub freq: i32,
}

impl Factor {
    pub const ONE: Factor = Factor { wave: Wave::Cos, freq: 0 };

    pub fn cos(freq: i32) -> Factor {
        Factor { wave: Wave::Cos, freq }
    }

    pub fn sin(freq: i32) -> Factor {
        Factor { wave: Wave::Sin, freq }
    }

    /// Canonical form with `freq >= 0`, plus the sign it costs; `None` if identically 0.
    fn canonical(self) -> Option<(Factor, f64)> {
        match (self.wave, self.freq) {
            (Wave::Sin, 0) => None,
            (Wave::Cos, m) => Some((Factor::cos(m.abs()), 1.0)),
            (Wave::Sin, m) if m < 0 => Some((Factor::sin(-m), -1.0)),
            (Wave::Sin, m) => Some((Factor::sin(m), 1.0)),
        }
    }

    fn eval(self, s: f64) -> f64 {
        let arg = 2.0 * PI * self.freq as f64 * s;
        match self.wave {
            Wave::Cos => arg.cos(),
            Wave::Sin => arg.sin(),
        }
    }

    /// Mean over `[lo, hi]`, written as `f(w c) sinc(w r)` to avoid cancellation.
    fn mean(self, lo: f64, hi: f64) -> f64 {
        let c = 0.5 * (lo + hi);
        let w = 2.0 * PI * self.freq as f64;
        let r = 0.5 * (hi - lo) * w;
        let sinc = if r == 0.0 { 1.0 } else { r.sin() / r };
        self.eval(c) * sinc
    }

    /// `d/ds`, as a coefficient and a factor.
    fn derivative(self) -> (f64, Factor) {
        let w = 2.0 * PI * self.freq as f64;
        match self.wave {
            Wave::Cos => (-w, Factor::sin(self.freq)),
            Wave::Sin => (w, Factor::cos(self.freq)),
        }
    }

    /// Product as a sum of two factors.
    fn product(self, other: Factor) -> [(f64, Factor); 2] {
        let (a, b) = (self.freq, other.freq);
        match (self.wave, other.wave) {
            (Wave::Cos, Wave::Cos) => [(0.5, Factor::cos(a - b)), (0.5, Factor::cos(a + b))],
            (Wave::Sin, Wave::Sin) => [(0.5, Factor::cos(a - b)), (-0.5, Factor::cos(a + b))],
            (Wave::Sin, Wave::Cos) => [(0.5, Factor::sin(a + b)), (0.5, Factor::sin(a - b))],
            (Wave::Cos, Wave::Sin) => [(0.5, Factor::sin(a + b)), (-0.5, Factor::sin(a - b))],
        }
    }
}

/// Key: time factor then one factor per space axis (unused axes are `ONE`).
type TermKey = (Factor, [Factor; 3]);

/// Finite sum of `c * T(t) * prod_a X_a(x_a)` with trigonometric factors; periodic
/// on the unit torus and in time with period 1.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    dim: usize,
    terms: BTreeMap<TermKey, f64>,
}

impl TrigPoly {
    pub fn zero(dim: usize) -> Self {
        TrigPoly { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(c, Factor::ONE, &[Factor::ONE; 3]);
        p
    }

    /// A single term `c * time(t) * prod_a space[a](x_a)`.
    pub fn term(dim: usize, c: f64, time: Factor, space: &[Factor]) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(c, time, space);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Adds a term after canonicalising its factors; exact cancellations are dropped.
    pub fn add_term(&mut self, c: f64, time: Factor, space: &[Factor]) {
        let mut coeff = c;
        let Some((tf, s)) = time.canonical() else { return };
        coeff *= s;
        let mut sp = [Factor::ONE; 3];
        for a in 0..self.dim {
            let f = space.get(a).copied().unwrap_or(Factor::ONE);
            let Some((cf, s)) = f.canonical() else { return };
            coeff *= s;
            sp[a] = cf;
        }
        if coeff == 0.0 {
            return;
        }
        let e = self.terms.entry((tf, sp)).or_insert(0.0);
        *e += coeff;
        if *e == 0.0 {
            self.terms.remove(&(tf, sp));
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero(self.dim);
        for (&(t, sp), &c) in &self.terms {
            p.add_term(c * s, t, &sp);
        }
        p
    }

    pub fn add(&self, other: &TrigPoly) -> Self {
        let mut p = self.clone();
        for (&(t, sp), &c) in &other.terms {
            p.add_term(c, t, &sp);
        }
        p
    }

    pub fn sub(&self, other: &TrigPoly) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &TrigPoly) -> Self {
        let d = self.dim;
        let mut p = Self::zero(d);
        for (&(ta, sa), &ca) in &self.terms {
            for (&(tb, sb), &cb) in &other.terms {
                let mut factors: Vec<[(f64, Factor); 2]> = vec![ta.product(tb)];
                for a in 0..d {
                    factors.push(sa[a].product(sb[a]));
                }
                for mask in 0..(1usize << (d + 1)) {
                    let mut c = ca * cb;
                    let mut picked = [Factor::ONE; 4];
                    for (slot, options) in factors.iter().enumerate() {
                        let (w, f) = options[(mask >> slot) & 1];
                        c *= w;
                        picked[slot] = f;
                    }
                    p.add_term(c, picked[0], &picked[1..]);
                }
            }
        }
        p
    }

    pub fn d_dx(&self, axis: usize) -> Self {
        let mut p = Self::zero(self.dim);
        for (&(t, sp), &c) in &self.terms {
            let (w, f) = sp[axis].derivative();
            let mut nsp = sp;
            nsp[axis] = f;
            p.add_term(c * w, t, &nsp);
        }
        p
    }

    pub fn d_dt(&self) -> Self {
        let mut p = Self::zero(self.dim);
        for (&(t, sp), &c) in &self.terms {
            let (w, f) = t.derivative();
            p.add_term(c * w, f, &sp);
        }
        p
    }

    pub fn laplacian(&self) -> Self {
        (0..self.dim).fold(Self::zero(self.dim), |acc, a| acc.add(&self.d_dx(a).d_dx(a)))
    }

    fn term_means(&self, t_factor: impl Fn(Factor) -> f64, lat: &BoxLattice) -> Vec<f64> {
        let d = lat.dim;
        let n = lat.n;
        let mut out = vec![0.0; lat.len()];
        let mut tables = vec![vec![0.0; n]; d];
        for (&(tf, sp), &c) in &self.terms {
            let ct = c * t_factor(tf);
            if ct == 0.0 {
                continue;
            }
            for a in 0..d {
                for k in 0..n {
                    let lo = lat.offset[a] + k as f64 * lat.h;
                    tables[a][k] = sp[a].mean(lo, lo + lat.width[a]);
                }
            }
            if d == 2 {
                for k0 in 0..n {
                    let v0 = ct * tables[0][k0];
                    let row = &mut out[k0 * n..(k0 + 1) * n];
                    for (o, v1) in row.iter_mut().zip(&tables[1]) {
                        *o += v0 * v1;
                    }
                }
            } else {
                for k0 in 0..n {
                    for k1 in 0..n {
                        let v01 = ct * tables[0][k0] * tables[1][k1];
                        let row = &mut out[(k0 * n + k1) * n..(k0 * n + k1 + 1) * n];
                        for (o, v2) in row.iter_mut().zip(&tables[2]) {
                            *o += v01 * v2;
                        }
                    }
                }
            }
        }
        out
    }
}

/// Random time-independent trigonometric polynomial with coefficients in `[-1, 1)` and
/// space frequencies in `0..=max_freq`.
pub fn random_trig(dim: usize, n_terms: usize, max_freq: i32, rng: &mut impl rand::Rng) -> TrigPoly {
    let mut p = TrigPoly::zero(dim);
    for _ in 0..n_terms {
        let c = rng.random_range(-1.0..1.0);
        let sp: Vec<Factor> = (0..dim)
            .map(|_| {
                let f = rng.random_range(0..=max_freq);
                if rng.random_bool(0.5) { Factor::cos(f) } else { Factor::sin(f) }
            })
            .collect();
        p.add_term(c, Factor::ONE, &sp);
    }
    p
}

impl SmoothFunction for TrigPoly {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(&(tf, sp), &c)| c * tf.eval(t) * (0..self.dim).map(|a| sp[a].eval(x[a])).product::<f64>())
            .sum()
    }

    fn box_mean(&self, t: f64, lo: &[f64], hi: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(&(tf, sp), &c)| {
                c * tf.eval(t) * (0..self.dim).map(|a| sp[a].mean(lo[a], hi[a])).product::<f64>()
            })
            .sum()
    }

    fn lattice_means(&self, t: f64, lat: &BoxLattice) -> Vec<f64> {
        self.term_means(|f| f.eval(t), lat)
    }

    fn lattice_slab_means(&self, t0: f64, t1: f64, lat: &BoxLattice) -> Vec<f64> {
        self.term_means(|f| f.mean(t0, t1), lat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn sample(d: usize) -> TrigPoly {
        let mut p = TrigPoly::constant(d, 0.3);
        p.add_term(1.2, Factor::cos(1), &[Factor::sin(1), Factor::cos(2), Factor::sin(1)]);
        p.add_term(-0.7, Factor::sin(2), &[Factor::cos(3), Factor::ONE, Factor::cos(1)]);
        p
    }

    #[test]
    fn canonical_forms_merge() {
        let mut p = TrigPoly::zero(2);
        p.add_term(1.0, Factor::ONE, &[Factor::sin(-2), Factor::cos(-1)]);
        p.add_term(1.0, Factor::ONE, &[Factor::sin(2), Factor::cos(1)]);
        assert_eq!(p.term_count(), 0);
        p.add_term(1.0, Factor::sin(0), &[Factor::ONE, Factor::ONE]);
        assert_eq!(p.term_count(), 0);
    }

    #[test]
    fn product_matches_pointwise() {
        for d in [2, 3] {
            let a = sample(d);
            let b = sample(d).d_dx(0).add(&TrigPoly::constant(d, 2.0));
            let ab = a.mul(&b);
            for &(t, x) in &[(0.1, [0.2, 0.7, 0.4]), (0.77, [0.93, 0.05, 0.61])] {
                let want = a.value(t, &x[..d]) * b.value(t, &x[..d]);
                assert!((ab.value(t, &x[..d]) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let p = sample(3);
        let (t, x) = (0.31, [0.12, 0.55, 0.83]);
        let e = 1e-5;
        for a in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[a] += e;
            xm[a] -= e;
            let fd = (p.value(t, &xp) - p.value(t, &xm)) / (2.0 * e);
            assert!((p.d_dx(a).value(t, &x) - fd).abs() < 1e-6);
        }
        let fd = (p.value(t + e, &x) - p.value(t - e, &x)) / (2.0 * e);
        assert!((p.d_dt().value(t, &x) - fd).abs() < 1e-6);
    }

    #[test]
    fn exact_means_agree_with_quadrature() {
        let p = sample(2);
        let lo = [0.1, 0.3];
        let hi = [0.2, 0.4];
        let exact = p.box_mean(0.4, &lo, &hi);
        let quad = gl5_box_mean(|x| p.value(0.4, x), &lo, &hi);
        assert!((exact - quad).abs() < 1e-9);
        let face = p.box_mean(0.4, &[0.1, 0.3], &[0.1, 0.4]);
        let quad = gl5_box_mean(|x| p.value(0.4, x), &[0.1, 0.3], &[0.1, 0.4]);
        assert!((face - quad).abs() < 1e-9);
    }

    #[test]
    fn linear_cell_mean_by_quadrature() {
        let f = FnSmooth(|_t: f64, x: &[f64]| x[0]);
        let h = 0.25;
        assert!((f.box_mean(0.0, &[0.0, 0.0], &[h, h]) - h / 2.0).abs() < 1e-15);
        assert!((f.box_mean(0.0, &[0.0, 0.0], &[0.0, h]) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn lattice_means_match_box_means() {
        let m = Mesh::new(3, 4).unwrap();
        let p = sample(3);
        for lat in [m.cell_lattice(), m.face_lattice(1), m.bidual_lattice(0, 2), m.dual_face_lattice(2, 0)] {
            let fast = p.lattice_means(0.3, &lat);
            for (idx, v) in fast.iter().enumerate() {
                let (lo, hi) = lat.bounds(idx);
                assert!((v - p.box_mean(0.3, &lo, &hi)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn slab_means_match_quadrature() {
        let m = Mesh::new(2, 12).unwrap();
        let p = sample(2);
        let lat = m.cell_lattice();
        let exact = p.lattice_slab_means(0.1, 0.3, &lat);
        let wrapped = FnSmooth(|t: f64, x: &[f64]| p.value(t, x));
        let quad = wrapped.lattice_slab_means(0.1, 0.3, &lat);
        for (a, b) in exact.iter().zip(&quad) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
