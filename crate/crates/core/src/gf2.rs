//! GF(2) linear algebra on word-packed bit matrices.
//!
//! Rows are stored one `u64` per row (bit `j` of the word is column `j`), so
//! up to 64 columns are supported. That covers Pauli bit-rows of width 2n for
//! any register size this crate can simulate densely.

use crate::error::{Error, Result};

/// A binary matrix over GF(2) with at most 64 columns.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Gf2Matrix {
    rows: Vec<u64>,
    cols: usize,
}

impl Gf2Matrix {
    pub fn new(rows: Vec<u64>, cols: usize) -> Result<Self> {
        if cols > 64 {
            return Err(Error::Resource(format!("{cols} columns exceed word width")));
        }
        let mask = Self::col_mask(cols);
        if rows.iter().any(|&r| r & !mask != 0) {
            return Err(Error::Dimension(format!(
                "row has bits beyond column count {cols}"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn zero(nrows: usize, cols: usize) -> Self {
        Self {
            rows: vec![0; nrows],
            cols,
        }
    }

    pub fn identity(cols: usize) -> Self {
        Self {
            rows: (0..cols).map(|j| 1u64 << j).collect(),
            cols,
        }
    }

    fn col_mask(cols: usize) -> u64 {
        if cols == 64 {
            u64::MAX
        } else {
            (1u64 << cols) - 1
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> u64 {
        self.rows[i]
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        (self.rows[i] >> j) & 1 == 1
    }

    /// Reduced row-echelon form with zero rows dropped. The result is the
    /// canonical generator set of the row space.
    pub fn rref(&self) -> Gf2Matrix {
        let mut work = self.rows.clone();
        let mut pivot_rows: Vec<u64> = Vec::new();
        for col in 0..self.cols {
            let bit = 1u64 << col;
            let Some(idx) = work.iter().position(|&r| r & bit != 0) else {
                continue;
            };
            let pivot = work.swap_remove(idx);
            for r in work.iter_mut() {
                if *r & bit != 0 {
                    *r ^= pivot;
                }
            }
            for r in pivot_rows.iter_mut() {
                if *r & bit != 0 {
                    *r ^= pivot;
                }
            }
            pivot_rows.push(pivot);
        }
        Gf2Matrix {
            rows: pivot_rows,
            cols: self.cols,
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().nrows()
    }

    /// Membership of `row` in the row space.
    pub fn row_space_contains(&self, row: u64) -> bool {
        let mut v = row;
        for &r in self.rref().rows.iter() {
            let pivot = r.trailing_zeros();
            if (v >> pivot) & 1 == 1 {
                v ^= r;
            }
        }
        v == 0
    }

    /// Coordinates of `row` in terms of the matrix rows, if the row lies in
    /// the row space: returns `c` with `xor_{i: c_i} rows[i] == row`.
    pub fn express(&self, row: u64) -> Option<u64> {
        // Solve rows^T * c = row, treating rows as the columns of a system
        // over the column index space.
        let mut aug: Vec<(u64, u64)> = Vec::new(); // (column j profile over rows, rhs bit)
        for j in 0..self.cols {
            let mut prof = 0u64;
            for (i, &r) in self.rows.iter().enumerate() {
                if (r >> j) & 1 == 1 {
                    prof |= 1 << i;
                }
            }
            aug.push((prof, (row >> j) & 1));
        }
        solve_system(&aug, self.rows.len())
    }

    /// Basis of `{v : M v^T = 0}` as matrix rows, i.e. `M · N^T = 0`.
    pub fn nullspace(&self) -> Gf2Matrix {
        let red = self.rref();
        let mut pivots = Vec::new();
        for &r in red.rows.iter() {
            pivots.push(r.trailing_zeros() as usize);
        }
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivots.contains(&free) {
                continue;
            }
            let mut v = 1u64 << free;
            for (k, &r) in red.rows.iter().enumerate() {
                if (r >> free) & 1 == 1 {
                    v |= 1 << pivots[k];
                }
            }
            basis.push(v);
        }
        Gf2Matrix {
            rows: basis,
            cols: self.cols,
        }
    }

    /// Any solution `x` of `M x = rhs` (rhs bit `i` is the value for row `i`),
    /// with free variables fixed to zero. `None` iff inconsistent.
    pub fn solve(&self, rhs: u64) -> Option<u64> {
        let aug: Vec<(u64, u64)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, &r)| (r, (rhs >> i) & 1))
            .collect();
        solve_system(&aug, self.cols)
    }

    /// Extend independent rows to an invertible `cols x cols` matrix whose
    /// first rows are exactly the input, appending standard basis rows in
    /// index order.
    pub fn extend_to_full_basis(&self) -> Result<Gf2Matrix> {
        if self.rank() != self.nrows() {
            return Err(Error::Validation("input rows are dependent".into()));
        }
        let mut rows = self.rows.clone();
        let mut span = self.clone();
        for j in 0..self.cols {
            if rows.len() == self.cols {
                break;
            }
            let e = 1u64 << j;
            if !span.row_space_contains(e) {
                rows.push(e);
                span = Gf2Matrix {
                    rows: rows.clone(),
                    cols: self.cols,
                };
            }
        }
        debug_assert_eq!(rows.len(), self.cols);
        Ok(Gf2Matrix {
            rows,
            cols: self.cols,
        })
    }

    pub fn transpose(&self) -> Gf2Matrix {
        let mut rows = vec![0u64; self.cols];
        for (i, &r) in self.rows.iter().enumerate() {
            for (j, row) in rows.iter_mut().enumerate() {
                if (r >> j) & 1 == 1 {
                    *row |= 1 << i;
                }
            }
        }
        Gf2Matrix {
            rows,
            cols: self.rows.len(),
        }
    }

    pub fn mul(&self, rhs: &Gf2Matrix) -> Result<Gf2Matrix> {
        if self.cols != rhs.nrows() {
            return Err(Error::Dimension(format!(
                "{}x{} times {}x{}",
                self.nrows(),
                self.cols,
                rhs.nrows(),
                rhs.ncols()
            )));
        }
        let rows = self
            .rows
            .iter()
            .map(|&r| {
                let mut acc = 0u64;
                let mut bits = r;
                while bits != 0 {
                    let k = bits.trailing_zeros() as usize;
                    acc ^= rhs.rows[k];
                    bits &= bits - 1;
                }
                acc
            })
            .collect();
        Ok(Gf2Matrix {
            rows,
            cols: rhs.ncols(),
        })
    }

    /// Map a single row vector through the matrix: `v · M`.
    pub fn apply_row(&self, v: u64) -> u64 {
        let mut acc = 0u64;
        let mut bits = v;
        while bits != 0 {
            let k = bits.trailing_zeros() as usize;
            acc ^= self.rows[k];
            bits &= bits - 1;
        }
        acc
    }

    pub fn inverse(&self) -> Option<Gf2Matrix> {
        if self.nrows() != self.cols {
            return None;
        }
        let n = self.cols;
        // Augment with the identity and reduce.
        let mut work: Vec<(u64, u64)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, &r)| (r, 1u64 << i))
            .collect();
        let mut done: Vec<(u64, u64)> = Vec::new();
        for col in 0..n {
            let bit = 1u64 << col;
            let idx = work.iter().position(|&(r, _)| r & bit != 0)?;
            let pivot = work.swap_remove(idx);
            for e in work.iter_mut().chain(done.iter_mut()) {
                if e.0 & bit != 0 {
                    e.0 ^= pivot.0;
                    e.1 ^= pivot.1;
                }
            }
            done.push(pivot);
        }
        // done[k] has pivot column k; its augmented part is row k of M^-1.
        let mut rows = vec![0u64; n];
        for (r, inv) in done {
            rows[r.trailing_zeros() as usize] = inv;
        }
        Some(Gf2Matrix { rows, cols: n })
    }
}

/// Solve a linear system given as (coefficient row, rhs bit) pairs over
/// `cols` unknowns. Free variables are set to zero.
fn solve_system(aug: &[(u64, u64)], cols: usize) -> Option<u64> {
    let mut work: Vec<(u64, u64)> = aug.to_vec();
    let mut pivots: Vec<(usize, (u64, u64))> = Vec::new();
    for col in 0..cols {
        let bit = 1u64 << col;
        let Some(idx) = work.iter().position(|&(r, _)| r & bit != 0) else {
            continue;
        };
        let pivot = work.swap_remove(idx);
        for e in work.iter_mut() {
            if e.0 & bit != 0 {
                e.0 ^= pivot.0;
                e.1 ^= pivot.1;
            }
        }
        for (_, e) in pivots.iter_mut() {
            if e.0 & bit != 0 {
                e.0 ^= pivot.0;
                e.1 ^= pivot.1;
            }
        }
        pivots.push((col, pivot));
    }
    if work.iter().any(|&(r, b)| r == 0 && b == 1) {
        return None;
    }
    let mut x = 0u64;
    for (col, (_, b)) in pivots {
        if b == 1 {
            x |= 1 << col;
        }
    }
    Some(x)
}

/// All solutions of `M x = rhs` as (particular, homogeneous basis).
pub fn solution_space(m: &Gf2Matrix, rhs: u64) -> Option<(u64, Gf2Matrix)> {
    let particular = m.solve(rhs)?;
    Some((particular, m.nullspace()))
}

/// Iterate every vector of an affine space `particular + span(basis)`.
/// Intended for desk-scale spaces only.
pub fn affine_space_iter(particular: u64, basis: &Gf2Matrix) -> impl Iterator<Item = u64> + '_ {
    let k = basis.nrows();
    assert!(k < 24, "affine space too large to enumerate");
    (0u64..(1 << k)).map(move |sel| {
        let mut v = particular;
        for i in 0..k {
            if (sel >> i) & 1 == 1 {
                v ^= basis.row(i);
            }
        }
        v
    })
}
