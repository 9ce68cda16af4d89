//! Compressed sparse row matrices.
//!
//! Patterns are structural: entries created during assembly are kept even when
//! their value is zero, so matrices assembled from the same mesh and spaces
//! always share a pattern.

use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMat {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMat {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0f64; triplets.len()];
        for &(r, c, v) in triplets {
            let p = next[r];
            cols[p] = c;
            vals[p] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|p| (cols[p], vals[p])));
            scratch.sort_by_key(|e| e.0);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMat {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let trip: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(move |(j, &v)| (i, j, v))
            })
            .collect();
        Self::from_triplets(nrows, ncols, &trip)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    /// Index into `values` of entry `(i, j)` if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].binary_search(&j).ok().map(|p| a + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        });
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> SparseMat {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let p = next[c];
                col_idx[p] = i;
                values[p] = v;
                next[c] += 1;
            }
        }
        SparseMat {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> SparseMat {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Maximum of `|a_ij - a_ji|` over the union of both patterns.
    pub fn symmetry_defect(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let mut worst = 0f64;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `Σ α_k A_k` for matrices of equal shape.
    pub fn linear_combination(terms: &[(f64, &SparseMat)]) -> SparseMat {
        assert!(!terms.is_empty());
        let (nrows, ncols) = (terms[0].1.nrows, terms[0].1.ncols);
        for (_, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nrows, ncols), "shape mismatch");
        }
        let blocks: Vec<Block<'_>> = terms
            .iter()
            .map(|&(alpha, m)| Block {
                row: 0,
                col: 0,
                alpha,
                mat: m,
            })
            .collect();
        Self::from_blocks(&[nrows], &[ncols], &blocks)
    }

    /// Assembles a block matrix. Several blocks may target the same cell;
    /// their contributions are summed.
    pub fn from_blocks(row_sizes: &[usize], col_sizes: &[usize], blocks: &[Block<'_>]) -> SparseMat {
        let row_off = offsets(row_sizes);
        let col_off = offsets(col_sizes);
        let nrows = row_off[row_sizes.len()];
        let ncols = col_off[col_sizes.len()];
        for b in blocks {
            assert_eq!(b.mat.nrows, row_sizes[b.row], "block row size mismatch");
            assert_eq!(b.mat.ncols, col_sizes[b.col], "block col size mismatch");
        }
        let mut by_block_row: Vec<Vec<&Block<'_>>> = vec![Vec::new(); row_sizes.len()];
        for b in blocks {
            by_block_row[b.row].push(b);
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut marker = vec![usize::MAX; ncols];
        for (bi, members) in by_block_row.iter().enumerate() {
            for local in 0..row_sizes[bi] {
                let start = col_idx.len();
                for b in members {
                    let shift = col_off[b.col];
                    let (cols, vals) = b.mat.row(local);
                    for (&c, &v) in cols.iter().zip(vals) {
                        let gc = c + shift;
                        if marker[gc] == usize::MAX || marker[gc] < start {
                            marker[gc] = col_idx.len();
                            col_idx.push(gc);
                            values.push(b.alpha * v);
                        } else {
                            values[marker[gc]] += b.alpha * v;
                        }
                    }
                }
                let end = col_idx.len();
                if !col_idx[start..end].windows(2).all(|w| w[0] < w[1]) {
                    let mut pairs: Vec<(usize, f64)> = col_idx[start..end]
                        .iter()
                        .copied()
                        .zip(values[start..end].iter().copied())
                        .collect();
                    pairs.sort_by_key(|p| p.0);
                    for (k, (c, v)) in pairs.into_iter().enumerate() {
                        col_idx[start + k] = c;
                        values[start + k] = v;
                    }
                }
                row_ptr.push(end);
            }
        }
        SparseMat {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] += v;
            }
        }
        out
    }

    pub fn same_pattern(&self, other: &SparseMat) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }
}

/// One scaled block of a block matrix.
#[derive(Debug, Clone, Copy)]
pub struct Block<'a> {
    pub row: usize,
    pub col: usize,
    pub alpha: f64,
    pub mat: &'a SparseMat,
}

impl<'a> Block<'a> {
    pub fn new(row: usize, col: usize, alpha: f64, mat: &'a SparseMat) -> Self {
        Block {
            row,
            col,
            alpha,
            mat,
        }
    }
}

pub fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    out.push(0);
    for s in sizes {
        out.push(out.last().unwrap() + s);
    }
    out
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseMat::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, 0.0)]);
        assert_eq!(m.row_ptr, vec![0, 2, 3]);
        assert_eq!(m.col_idx, vec![0, 2, 1]);
        assert_eq!(m.values, vec![2.0, 4.0, 0.0]);
        assert_eq!(m.get(1, 1), 0.0);
        assert!(m.position(1, 1).is_some());
    }

    #[test]
    fn transpose_and_matvec() {
        let a = SparseMat::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, 3.0, 4.0]]);
        let at = a.transpose();
        assert_eq!(at.to_dense(), vec![vec![1.0, 0.0], vec![2.0, 3.0], vec![0.0, 4.0]]);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 7.0]);
        assert_eq!(a.bilinear(&[1.0, 2.0], &[1.0, 0.0, 1.0]), 1.0 + 8.0);
    }

    #[test]
    fn block_assembly() {
        let a = SparseMat::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]);
        let b = SparseMat::identity(2);
        let m = SparseMat::from_blocks(
            &[2, 2],
            &[2, 2],
            &[
                Block::new(0, 0, 1.0, &a),
                Block::new(0, 0, 2.0, &b),
                Block::new(1, 0, -1.0, &b),
                Block::new(0, 1, 1.0, &b),
                Block::new(1, 1, 1.0, &a),
            ],
        );
        assert_eq!(
            m.to_dense(),
            vec![
                vec![3.0, 2.0, 1.0, 0.0],
                vec![0.0, 5.0, 0.0, 1.0],
                vec![-1.0, 0.0, 1.0, 2.0],
                vec![0.0, -1.0, 0.0, 3.0],
            ]
        );
        for i in 0..4 {
            let (cols, _) = m.row(i);
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
        }
        let s = SparseMat::linear_combination(&[(1.0, &a), (-1.0, &a)]);
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert_eq!(s.nnz(), a.nnz());
    }
}
