//! Uniform periodic grids on the unit torus.
//!
//! Cells are lattice tuples `k = (k_0, .., k_{d-1})` with `0 <= k_a < n`, flattened
//! row-major: `index = k_0 n^{d-1} + .. + k_{d-1}`, so the last axis varies fastest.
//! Directions are 0-based.
//!
//! A face in direction `i` carries the lattice tuple of the cell on its lower side:
//! face `(i, k)` separates `K = k` from `L = k + e_i`, and `x_L - x_K = +h e_i`.
//! The dual cell of that face is centred at `x_k + h/2 e_i`.
//!
//! Bidual cell `(i, j, k)` with `i != j` is centred at `x_k + h/2 (e_i + e_j)`; it is
//! the dual cell in direction `j` of the `i`-th dual grid, sitting between faces
//! `(i, k)` and `(i, k + e_j)`. For `i == j` it is primary cell `k`, between faces
//! `(i, k - e_i)` and `(i, k)`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Mesh {
    dim: usize,
    n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaceIndex {
    pub dir: usize,
    /// Flat index of the lower cell.
    pub cell: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BidualIndex {
    pub i: usize,
    pub j: usize,
    pub cell: usize,
}

/// A regular lattice of axis-aligned boxes, one per cell index, in flatten order.
/// Box `k` spans `[offset_a + k_a h, offset_a + k_a h + width_a]` per axis; a zero
/// width marks a degenerate axis (faces).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxLattice {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    pub offset: [f64; 3],
    pub width: [f64; 3],
}

impl BoxLattice {
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self, idx: usize) -> ([f64; 3], [f64; 3]) {
        let k = lattice_of(self.dim, self.n, idx);
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..self.dim {
            lo[a] = self.offset[a] + k[a] as f64 * self.h;
            hi[a] = lo[a] + self.width[a];
        }
        (lo, hi)
    }
}

fn lattice_of(dim: usize, n: usize, mut idx: usize) -> [usize; 3] {
    let mut k = [0; 3];
    for a in (0..dim).rev() {
        k[a] = idx % n;
        idx /= n;
    }
    k
}

impl Mesh {
    pub fn new(dim: usize, n: usize) -> Result<Mesh> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidMesh(format!("dimension {dim} not in {{2, 3}}")));
        }
        if n < 2 {
            return Err(Error::InvalidMesh(format!("{n} cells per axis, need at least 2")));
        }
        Ok(Mesh { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn cell_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Faces per direction; equals the cell count on the torus.
    pub fn faces_per_dir(&self) -> usize {
        self.cell_count()
    }

    pub fn face_count(&self) -> usize {
        self.dim * self.cell_count()
    }

    /// `|K| = |D_sigma| = |D_eps| = h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn face_area(&self) -> f64 {
        self.h().powi(self.dim as i32 - 1)
    }

    pub fn lattice(&self, cell: usize) -> [usize; 3] {
        lattice_of(self.dim, self.n, cell)
    }

    pub fn cell_at(&self, k: &[usize]) -> usize {
        k[..self.dim].iter().fold(0, |acc, &ka| acc * self.n + ka % self.n)
    }

    /// Periodic shift of a cell by `delta` along `axis`.
    #[inline]
    pub fn shift(&self, cell: usize, axis: usize, delta: isize) -> usize {
        let stride = self.n.pow((self.dim - 1 - axis) as u32);
        let ka = (cell / stride) % self.n;
        let n = self.n as isize;
        let kn = ((ka as isize + delta) % n + n) % n;
        cell - ka * stride + kn as usize * stride
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 3] {
        let k = self.lattice(cell);
        let h = self.h();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = (k[a] as f64 + 0.5) * h;
        }
        x
    }

    pub fn cells(&self) -> std::ops::Range<usize> {
        0..self.cell_count()
    }

    pub fn faces(&self, dir: usize) -> impl Iterator<Item = FaceIndex> {
        (0..self.cell_count()).map(move |cell| FaceIndex { dir, cell })
    }

    pub fn all_faces(&self) -> impl Iterator<Item = FaceIndex> + '_ {
        (0..self.dim).flat_map(move |d| self.faces(d))
    }

    /// `(K, L, +1)` with `x_L - x_K = +h e_i`.
    pub fn face_neighbors(&self, face: FaceIndex) -> (usize, usize, i8) {
        (face.cell, self.shift(face.cell, face.dir, 1), 1)
    }

    /// The face shared by two neighbouring cells, in either argument order.
    pub fn face_between(&self, a: usize, b: usize) -> Option<FaceIndex> {
        for dir in 0..self.dim {
            if self.shift(a, dir, 1) == b {
                return Some(FaceIndex { dir, cell: a });
            }
            if self.shift(b, dir, 1) == a {
                return Some(FaceIndex { dir, cell: b });
            }
        }
        None
    }

    /// The `2d` faces of a cell with outward normal signs, ordered `(0-, 0+, 1-, 1+, ..)`.
    pub fn cell_faces(&self, cell: usize) -> Vec<(FaceIndex, i8)> {
        let mut out = Vec::with_capacity(2 * self.dim);
        for dir in 0..self.dim {
            out.push((FaceIndex { dir, cell: self.shift(cell, dir, -1) }, -1));
            out.push((FaceIndex { dir, cell }, 1));
        }
        out
    }

    pub fn face_center(&self, face: FaceIndex) -> [f64; 3] {
        let mut x = self.cell_center(face.cell);
        x[face.dir] += 0.5 * self.h();
        x
    }

    /// Dual neighbours of `sigma` in direction `j`: `(sigma, sigma', eps)` with
    /// `x_sigma' - x_sigma = h e_j`, and `eps` the bidual cell between them.
    pub fn dual_neighbors(&self, sigma: FaceIndex, j: usize) -> (FaceIndex, FaceIndex, BidualIndex) {
        let i = sigma.dir;
        let next = FaceIndex { dir: i, cell: self.shift(sigma.cell, j, 1) };
        let eps_cell = if i == j { next.cell } else { sigma.cell };
        (sigma, next, BidualIndex { i, j, cell: eps_cell })
    }

    /// Inverse of [`Mesh::dual_neighbors`]: the ordered pair of faces around a bidual cell.
    pub fn bidual_faces(&self, b: BidualIndex) -> (FaceIndex, FaceIndex) {
        if b.i == b.j {
            (FaceIndex { dir: b.i, cell: self.shift(b.cell, b.i, -1) }, FaceIndex { dir: b.i, cell: b.cell })
        } else {
            (FaceIndex { dir: b.i, cell: b.cell }, FaceIndex { dir: b.i, cell: self.shift(b.cell, b.j, 1) })
        }
    }

    pub fn bidual_center(&self, b: BidualIndex) -> [f64; 3] {
        let mut x = self.cell_center(b.cell);
        if b.i != b.j {
            x[b.i] += 0.5 * self.h();
            x[b.j] += 0.5 * self.h();
        }
        x
    }

    fn lattice_with(&self, shift: [f64; 3], collapse: Option<usize>) -> BoxLattice {
        let h = self.h();
        let mut offset = [0.0; 3];
        let mut width = [0.0; 3];
        for a in 0..self.dim {
            offset[a] = shift[a] * h;
            width[a] = h;
        }
        if let Some(c) = collapse {
            offset[c] += 0.5 * h;
            width[c] = 0.0;
        }
        BoxLattice { dim: self.dim, n: self.n, h, offset, width }
    }

    pub fn cell_lattice(&self) -> BoxLattice {
        self.lattice_with([0.0; 3], None)
    }

    /// Faces `sigma in E_i`, as degenerate boxes.
    pub fn face_lattice(&self, dir: usize) -> BoxLattice {
        let mut s = [0.0; 3];
        s[dir] = 0.5;
        self.lattice_with(s, Some(dir))
    }

    /// Dual cells `D_sigma`, `sigma in E_i`.
    pub fn dual_lattice(&self, dir: usize) -> BoxLattice {
        let mut s = [0.0; 3];
        s[dir] = 0.5;
        self.lattice_with(s, None)
    }

    /// Bidual cells `D_eps` of `B_ij`.
    pub fn bidual_lattice(&self, i: usize, j: usize) -> BoxLattice {
        let mut s = [0.0; 3];
        if i != j {
            s[i] = 0.5;
            s[j] = 0.5;
        }
        self.lattice_with(s, None)
    }

    /// Dual faces `eps in E~_ij`, i.e. bidual cells collapsed along `j`.
    pub fn dual_face_lattice(&self, i: usize, j: usize) -> BoxLattice {
        let mut lat = self.bidual_lattice(i, j);
        lat.offset[j] += 0.5 * lat.h;
        lat.width[j] = 0.0;
        lat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let m = Mesh::new(2, 4).unwrap();
        assert_eq!(m.cell_count(), 16);
        assert_eq!(m.face_count(), 32);
        assert_eq!(m.faces(0).count(), 16);
        let m = Mesh::new(3, 2).unwrap();
        assert_eq!(m.cell_count(), 8);
        assert_eq!(m.face_count(), 24);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Mesh::new(2, 1).is_err());
        assert!(Mesh::new(1, 4).is_err());
        assert!(Mesh::new(4, 4).is_err());
    }

    #[test]
    fn orientation_and_wrap() {
        let m = Mesh::new(2, 4).unwrap();
        let k00 = m.cell_at(&[0, 0]);
        let k10 = m.cell_at(&[1, 0]);
        let f = m.face_between(k00, k10).unwrap();
        assert_eq!(m.face_neighbors(f), (k00, k10, 1));
        assert_eq!(m.face_between(k10, k00), Some(f));
        let k30 = m.cell_at(&[3, 0]);
        let f = m.face_between(k00, k30).unwrap();
        assert_eq!(m.face_neighbors(f), (k30, k00, 1));
    }

    #[test]
    fn flatten_is_row_major() {
        let m = Mesh::new(3, 3).unwrap();
        assert_eq!(m.cell_at(&[1, 2, 0]), 9 + 6);
        assert_eq!(m.lattice(15), [1, 2, 0]);
        assert_eq!(m.shift(m.cell_at(&[2, 0, 1]), 0, 1), m.cell_at(&[0, 0, 1]));
        assert_eq!(m.shift(m.cell_at(&[2, 0, 1]), 2, -2), m.cell_at(&[2, 0, 2]));
    }

    #[test]
    fn each_face_in_two_cells_with_opposite_normals() {
        for (d, n) in [(2, 3), (3, 2), (2, 2)] {
            let m = Mesh::new(d, n).unwrap();
            let mut seen = std::collections::HashMap::new();
            for c in m.cells() {
                for (f, s) in m.cell_faces(c) {
                    seen.entry(f).or_insert_with(Vec::new).push(s);
                }
            }
            assert_eq!(seen.len(), m.face_count());
            for signs in seen.values() {
                let mut s = signs.clone();
                s.sort();
                assert_eq!(s, vec![-1, 1]);
            }
        }
    }

    #[test]
    fn neighbor_involution() {
        let m = Mesh::new(3, 4).unwrap();
        for f in m.all_faces() {
            let (k, l, _) = m.face_neighbors(f);
            assert_eq!(m.shift(l, f.dir, -1), k);
        }
    }

    #[test]
    fn dual_neighbors_geometry() {
        let m = Mesh::new(2, 4).unwrap();
        let h = m.h();
        for f in m.all_faces() {
            for j in 0..2 {
                let (s, s2, e) = m.dual_neighbors(f, j);
                assert_eq!(m.bidual_faces(e), (s, s2));
                let (a, b) = (m.face_center(s), m.face_center(s2));
                let mut diff = b[j] - a[j];
                diff -= diff.round();
                let diff = if diff < 0.0 { diff + 1.0 } else { diff };
                assert!((diff - h).abs() < 1e-14);
                let c = m.bidual_center(e);
                let mut mid = 0.5 * (a[j] + b[j]) - c[j];
                if (b[j] - a[j]).abs() > 0.5 {
                    mid -= 0.5;
                }
                assert!((mid - mid.round()).abs() < 1e-14);
                if f.dir == j {
                    assert_eq!(m.bidual_center(e), m.cell_center(e.cell));
                }
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        for (d, n) in [(2, 5), (3, 3)] {
            let m = Mesh::new(d, n).unwrap();
            let total = m.cell_volume() * m.cell_count() as f64;
            assert!((total - 1.0).abs() < 1e-14);
            for i in 0..d {
                let t: f64 = m.faces(i).map(|_| m.cell_volume()).sum();
                assert!((t - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn lattices_match_centres() {
        let m = Mesh::new(3, 3).unwrap();
        let lat = m.bidual_lattice(0, 2);
        let b = BidualIndex { i: 0, j: 2, cell: 7 };
        let (lo, hi) = lat.bounds(7);
        let c = m.bidual_center(b);
        for a in 0..3 {
            assert!((0.5 * (lo[a] + hi[a]) - c[a]).abs() < 1e-14);
        }
        let fl = m.face_lattice(1);
        let (lo, hi) = fl.bounds(4);
        let fc = m.face_center(FaceIndex { dir: 1, cell: 4 });
        assert_eq!(lo[1], hi[1]);
        assert!((lo[1] - fc[1]).abs() < 1e-14);
    }
}
