//! Dense matrices over the field with three elements.

use serde::Serialize;

/// A matrix over F₃ with entries stored as `0`, `1`, `2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct F3Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<u8>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

impl F3Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0; rows * cols],
            row_labels: vec![String::new(); rows],
            col_labels: vec![String::new(); cols],
        }
    }

    /// Builds from row vectors; values are reduced mod 3.
    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged rows");
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        self.entries[i * self.cols + j] = v % 3;
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn scale_row(&mut self, i: usize, c: u8) {
        for j in 0..self.cols {
            let v = self.get(i, j);
            self.set(i, j, v * c);
        }
    }
}

/// Rank over F₃ by Gaussian elimination on a copy.
pub fn f3_rank(m: &F3Matrix) -> usize {
    rank_of_rows(m.to_rows(), m.cols())
}

pub(crate) fn rank_of_rows(mut rows: Vec<Vec<u8>>, cols: usize) -> usize {
    let mut rank = 0;
    for c in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][c] != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        // In F₃ every nonzero element is its own inverse.
        let inv = rows[rank][c];
        for v in rows[rank].iter_mut() {
            *v = (*v * inv) % 3;
        }
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[c] != 0 {
                let f = row[c];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v = (*v + 3 * 3 - f * p) % 3;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}
