//! Dense bit matrices over GF(2) and Gaussian elimination.

use rand::RngCore;

use crate::error::{Error, Result};

const WORD: usize = 64;

#[inline]
fn words_for(cols: usize) -> usize {
    cols.div_ceil(WORD)
}

#[inline]
fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

#[inline]
fn bit(words: &[u64], col: usize) -> bool {
    words[col / WORD] >> (col % WORD) & 1 == 1
}

#[inline]
fn lowest_set(words: &[u64]) -> Option<usize> {
    words
        .iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * WORD + w.trailing_zeros() as usize)
}

#[inline]
fn popcount(words: &[u64]) -> u32 {
    words.iter().map(|w| w.count_ones()).sum()
}

/// Row-major dense matrix over GF(2), 64 columns per word.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    stride: usize,
    bits: Vec<u64>,
}

impl std::fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Gf2Matrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows.min(32) {
            let line: String = (0..self.cols.min(96))
                .map(|c| if self.get(r, c) { '1' } else { '.' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Gf2Matrix {
            rows,
            cols,
            stride,
            bits: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    /// Builds a matrix from 0/1 rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::WidthMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, v & 1 == 1);
            }
        }
        Ok(m)
    }

    /// Uniform random bits drawn row-major from `rng` (see [`crate::rng`]).
    pub fn random<R: RngCore + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(rows, cols);
        let mask = m.tail_mask();
        for r in 0..rows {
            let row = m.row_words_mut(r);
            for w in row.iter_mut() {
                *w = rng.next_u64();
            }
            if let Some(last) = row.last_mut() {
                *last &= mask;
            }
        }
        m
    }

    fn tail_mask(&self) -> u64 {
        match self.cols % WORD {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of range");
        bit(self.row_words(r), c)
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of range");
        let w = &mut self.bits[r * self.stride + c / WORD];
        let m = 1u64 << (c % WORD);
        if v {
            *w |= m
        } else {
            *w &= !m
        }
    }

    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.bits[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row_words_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.bits[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row_weight(&self, r: usize) -> usize {
        popcount(self.row_words(r)) as usize
    }

    /// Column indices set in row `r`.
    pub fn row_support(&self, r: usize) -> Vec<usize> {
        (0..self.cols).filter(|&c| self.get(r, c)).collect()
    }

    pub fn push_row(&mut self, words: &[u64]) -> Result<()> {
        if words.len() != self.stride {
            return Err(Error::WidthMismatch {
                expected: self.cols,
                found: words.len() * WORD,
            });
        }
        self.bits.extend_from_slice(words);
        self.rows += 1;
        Ok(())
    }

    /// `self ^= other` restricted to row `dst` of self and row `src` of other.
    pub fn xor_row_from(&mut self, dst: usize, other: &Gf2Matrix, src: usize) {
        debug_assert_eq!(self.cols, other.cols);
        let s = self.stride;
        xor_into(&mut self.bits[dst * s..(dst + 1) * s], other.row_words(src));
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, rhs: &Gf2Matrix) -> Result<Gf2Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::WidthMismatch {
                expected: rhs.rows,
                found: self.cols,
            });
        }
        let mut out = Gf2Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let row = self.row_words(r);
            for (wi, &w) in row.iter().enumerate() {
                let mut w = w;
                while w != 0 {
                    let k = wi * WORD + w.trailing_zeros() as usize;
                    w &= w - 1;
                    out.xor_row_from(r, rhs, k);
                }
            }
        }
        Ok(out)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Gf2Matrix {
        let mut out = Gf2Matrix::zeros(0, self.cols);
        out.bits.reserve(idx.len() * self.stride);
        for &i in idx {
            out.bits.extend_from_slice(self.row_words(i));
            out.rows += 1;
        }
        out
    }

    pub fn vstack(&self, other: &Gf2Matrix) -> Result<Gf2Matrix> {
        if self.cols != other.cols {
            return Err(Error::WidthMismatch {
                expected: self.cols,
                found: other.cols,
            });
        }
        let mut out = self.clone();
        out.bits.extend_from_slice(&other.bits);
        out.rows += other.rows;
        Ok(out)
    }

    pub fn rank(&self) -> usize {
        self.echelon().rank()
    }

    /// Reduced row echelon form of the row space.
    pub fn echelon(&self) -> Echelon {
        let mut e = Echelon::new(self.cols);
        for r in 0..self.rows {
            e.insert(self.row_words(r));
        }
        e
    }

    /// Reduced row echelon form as a matrix with `rank` rows, ordered by pivot.
    pub fn reduced(&self) -> Gf2Matrix {
        self.echelon().to_matrix()
    }
}

/// Incrementally maintained reduced row echelon basis of a row space.
///
/// Every stored row has a distinct pivot (its lowest set column) and no other
/// stored row has a bit in that column. An optional companion payload is
/// carried through the same row operations, which turns the basis into a
/// GF(2) linear-system solver.
#[derive(Clone, Debug)]
pub struct Echelon {
    cols: usize,
    stride: usize,
    basis: Vec<Vec<u64>>,
    pivots: Vec<usize>,
    companions: Vec<Vec<u64>>,
    unit_rows: usize,
}

impl Echelon {
    pub fn new(cols: usize) -> Self {
        Echelon {
            cols,
            stride: words_for(cols),
            basis: Vec::new(),
            pivots: Vec::new(),
            companions: Vec::new(),
            unit_rows: 0,
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.cols
    }

    /// Number of unit vectors `e_i` in the row space.
    ///
    /// In reduced form a unit vector of the row space must itself be a basis
    /// row, so this is the number of weight-one basis rows.
    pub fn unit_count(&self) -> usize {
        self.unit_rows
    }

    /// Columns `i` with `e_i` in the row space, ascending.
    pub fn unit_columns(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .basis
            .iter()
            .zip(&self.pivots)
            .filter(|(row, _)| popcount(row) == 1)
            .map(|(_, &p)| p)
            .collect();
        v.sort_unstable();
        v
    }

    /// Inserts a row; returns `true` if it increased the rank.
    pub fn insert(&mut self, row: &[u64]) -> bool {
        self.insert_impl(row, None)
    }

    /// Inserts a row together with a payload that follows the row operations.
    pub fn insert_with(&mut self, row: &[u64], payload: &[u64]) -> bool {
        self.insert_impl(row, Some(payload))
    }

    fn insert_impl(&mut self, row: &[u64], payload: Option<&[u64]>) -> bool {
        debug_assert_eq!(row.len(), self.stride);
        if self.rank() == self.cols {
            return false;
        }
        let mut r = row.to_vec();
        let mut p = payload.map(|p| p.to_vec());
        for (i, &piv) in self.pivots.iter().enumerate() {
            if bit(&r, piv) {
                xor_into(&mut r, &self.basis[i]);
                if let Some(p) = p.as_mut() {
                    xor_into(p, &self.companions[i]);
                }
            }
        }
        let Some(piv) = lowest_set(&r) else {
            return false;
        };
        for i in 0..self.basis.len() {
            if bit(&self.basis[i], piv) {
                let before = popcount(&self.basis[i]) == 1;
                xor_into(&mut self.basis[i], &r);
                if let Some(p) = p.as_ref() {
                    xor_into(&mut self.companions[i], p);
                }
                let after = popcount(&self.basis[i]) == 1;
                match (before, after) {
                    (false, true) => self.unit_rows += 1,
                    (true, false) => self.unit_rows -= 1,
                    _ => {}
                }
            }
        }
        if popcount(&r) == 1 {
            self.unit_rows += 1;
        }
        self.basis.push(r);
        self.pivots.push(piv);
        if let Some(p) = p {
            self.companions.push(p);
        }
        true
    }

    /// Payload attached to the basis row whose pivot is `col`, if that row
    /// is the unit vector `e_col`.
    pub fn solved_payload(&self, col: usize) -> Option<&[u64]> {
        let i = self.pivots.iter().position(|&p| p == col)?;
        if popcount(&self.basis[i]) != 1 || self.companions.is_empty() {
            return None;
        }
        Some(&self.companions[i])
    }

    pub fn to_matrix(&self) -> Gf2Matrix {
        let mut order: Vec<usize> = (0..self.basis.len()).collect();
        order.sort_by_key(|&i| self.pivots[i]);
        let mut m = Gf2Matrix::zeros(0, self.cols);
        for i in order {
            m.push_row(&self.basis[i]).expect("basis rows have matrix width");
        }
        m
    }
}
