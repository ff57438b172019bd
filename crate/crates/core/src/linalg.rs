//! Exact dense linear algebra over Z_p.
//!
//! Everything the engine needs reduces to row-reduced echelon forms of
//! small matrices: ranks of cup-product and differential maps, kernel
//! bases for page turning, and subspace membership for homology classes.

use crate::field::PrimeField;

/// Dense matrix over Z_p, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<Vec<u32>>,
}

impl FpMatrix {
    pub fn zero(field: PrimeField, rows: usize, cols: usize) -> Self {
        FpMatrix {
            field,
            rows,
            cols,
            data: vec![vec![0; cols]; rows],
        }
    }

    pub fn from_rows(field: PrimeField, data: Vec<Vec<u32>>) -> Self {
        let rows = data.len();
        let cols = data.first().map_or(0, |r| r.len());
        debug_assert!(data.iter().all(|r| r.len() == cols));
        FpMatrix {
            field,
            rows,
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i][j] = v % self.field.p();
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|r| r.iter().all(|&v| v == 0))
    }

    /// Matrix product self * other.
    pub fn mul(&self, other: &FpMatrix) -> FpMatrix {
        assert_eq!(self.cols, other.rows);
        let f = self.field;
        let mut out = FpMatrix::zero(f, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i][k];
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let t = f.mul(a, other.data[k][j]);
                    out.data[i][j] = f.add(out.data[i][j], t);
                }
            }
        }
        out
    }

    /// Apply the matrix to a column vector.
    pub fn apply(&self, v: &[u32]) -> Vec<u32> {
        assert_eq!(v.len(), self.cols);
        let f = self.field;
        let mut out = vec![0u32; self.rows];
        for (i, row) in self.data.iter().enumerate() {
            let mut acc = 0u32;
            for (a, b) in row.iter().zip(v) {
                acc = f.add(acc, f.mul(*a, *b));
            }
            out[i] = acc;
        }
        out
    }

    /// In-place row reduction to reduced row echelon form.
    /// Returns the pivot column of each pivot row, in order.
    pub fn rref(&mut self) -> Vec<usize> {
        let f = self.field;
        let mut pivots = Vec::new();
        let mut pivot_row = 0usize;
        for col in 0..self.cols {
            if pivot_row >= self.rows {
                break;
            }
            let Some(src) = (pivot_row..self.rows).find(|&i| self.data[i][col] != 0) else {
                continue;
            };
            self.data.swap(pivot_row, src);
            let inv = f.inv(self.data[pivot_row][col]);
            for j in col..self.cols {
                self.data[pivot_row][j] = f.mul(self.data[pivot_row][j], inv);
            }
            for i in 0..self.rows {
                if i != pivot_row && self.data[i][col] != 0 {
                    let c = self.data[i][col];
                    for j in col..self.cols {
                        let t = f.mul(c, self.data[pivot_row][j]);
                        self.data[i][j] = f.sub(self.data[i][j], t);
                    }
                }
            }
            pivots.push(col);
            pivot_row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref().len()
    }

    /// Basis of the right kernel {v : M v = 0}, deterministic order
    /// (free columns ascending, each vector normalized with a 1 in its
    /// free coordinate).
    pub fn kernel_basis(&self) -> Vec<Vec<u32>> {
        let f = self.field;
        let mut m = self.clone();
        let pivots = m.rref();
        let pivot_set: std::collections::BTreeSet<usize> = pivots.iter().copied().collect();
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivot_set.contains(&free) {
                continue;
            }
            let mut v = vec![0u32; self.cols];
            v[free] = 1;
            for (row, &pc) in pivots.iter().enumerate() {
                // pivot coordinate solves row: v[pc] = -M[row][free]
                v[pc] = f.neg(m.data[row][free]);
            }
            basis.push(v);
        }
        basis
    }
}

/// A subspace of Z_p^n kept in reduced row echelon form.
///
/// Insertion keeps rows sorted by pivot column and fully back-reduced, so
/// two equal subspaces have identical row data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subspace {
    field: PrimeField,
    ambient: usize,
    rows: Vec<Vec<u32>>,
    pivots: Vec<usize>,
}

impl Subspace {
    pub fn empty(field: PrimeField, ambient: usize) -> Self {
        Subspace {
            field,
            ambient,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn full(field: PrimeField, ambient: usize) -> Self {
        let mut s = Self::empty(field, ambient);
        for i in 0..ambient {
            let mut v = vec![0u32; ambient];
            v[i] = 1;
            s.insert(&v);
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Eliminate the pivot coordinates of `v` against this subspace.
    pub fn reduce(&self, v: &mut [u32]) {
        let f = self.field;
        for (row, &pc) in self.rows.iter().zip(&self.pivots) {
            let c = v[pc];
            if c != 0 {
                for j in 0..self.ambient {
                    let t = f.mul(c, row[j]);
                    v[j] = f.sub(v[j], t);
                }
            }
        }
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        let mut w = v.to_vec();
        self.reduce(&mut w);
        w.iter().all(|&c| c == 0)
    }

    /// Insert a vector; returns true if the dimension grew.
    pub fn insert(&mut self, v: &[u32]) -> bool {
        debug_assert_eq!(v.len(), self.ambient);
        let f = self.field;
        let mut w = v.to_vec();
        self.reduce(&mut w);
        let Some(pivot) = w.iter().position(|&c| c != 0) else {
            return false;
        };
        let inv = f.inv(w[pivot]);
        for c in w.iter_mut() {
            *c = f.mul(*c, inv);
        }
        // back-reduce existing rows by the new one
        for row in self.rows.iter_mut() {
            let c = row[pivot];
            if c != 0 {
                for j in 0..self.ambient {
                    let t = f.mul(c, w[j]);
                    row[j] = f.sub(row[j], t);
                }
            }
        }
        let at = self.pivots.iter().position(|&p| p > pivot).unwrap_or(self.pivots.len());
        self.pivots.insert(at, pivot);
        self.rows.insert(at, w);
        true
    }

    /// Union of two subspaces of the same ambient space.
    pub fn sum(&self, other: &Subspace) -> Subspace {
        let mut s = self.clone();
        for row in &other.rows {
            s.insert(row);
        }
        s
    }

    pub fn is_subspace_of(&self, other: &Subspace) -> bool {
        self.rows.iter().all(|r| other.contains(r))
    }
}
