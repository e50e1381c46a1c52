//! Dense GF(2) linear algebra on packed 64-bit rows.
//!
//! Elimination always scans columns left to right and takes the first row with
//! a set bit as pivot, so reduced forms and null-space bases are reproducible.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("null space has dimension {dim}, more than {cap} codewords would be listed")]
    CapacityExceeded { dim: usize, cap: u64 },
    #[error("vector length {got} does not match expected length {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

const WORD: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// Fixed-length bit vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = BitVec::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                v.set(i, true);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// An `rows x cols` matrix over GF(2), row-major with packed rows.
#[derive(Clone, PartialEq, Eq)]
pub struct GF2Matrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl GF2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "GF2Matrix needs at least one row and column");
        let stride = words_for(cols);
        GF2Matrix {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = GF2Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from rows of 0/1 entries. All rows must have equal length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Self {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut m = GF2Matrix::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged row {i}");
            for (j, &b) in r.iter().enumerate() {
                if b & 1 == 1 {
                    m.set(i, j, true);
                }
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

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "entry ({r},{c}) out of range");
        (self.data[r * self.stride + c / WORD] >> (c % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols, "entry ({r},{c}) out of range");
        let mask = 1u64 << (c % WORD);
        let w = &mut self.data[r * self.stride + c / WORD];
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, r: usize, c: usize) {
        assert!(r < self.rows && c < self.cols, "entry ({r},{c}) out of range");
        self.data[r * self.stride + c / WORD] ^= 1u64 << (c % WORD);
    }

    fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row(&self, r: usize) -> BitVec {
        BitVec {
            len: self.cols,
            words: self.row_words(r).to_vec(),
        }
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.row_words(r).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Columns restricted to `cols`, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> GF2Matrix {
        let mut out = GF2Matrix::zeros(self.rows, cols.len().max(1));
        for r in 0..self.rows {
            for (k, &c) in cols.iter().enumerate() {
                if self.get(r, c) {
                    out.set(r, k, true);
                }
            }
        }
        out
    }

    /// Syndrome `A x`.
    pub fn mul_vec(&self, x: &BitVec) -> Result<BitVec, Gf2Error> {
        if x.len() != self.cols {
            return Err(Gf2Error::LengthMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        let mut s = BitVec::zeros(self.rows);
        for r in 0..self.rows {
            let parity = self
                .row_words(r)
                .iter()
                .zip(x.words())
                .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
                & 1;
            if parity == 1 {
                s.set(r, true);
            }
        }
        Ok(s)
    }

    fn xor_rows(&mut self, dst: usize, src: usize, from_word: usize) {
        debug_assert_ne!(dst, src);
        let stride = self.stride;
        let (d, s) = if dst < src {
            let (lo, hi) = self.data.split_at_mut(src * stride);
            (&mut lo[dst * stride..(dst + 1) * stride], &hi[..stride])
        } else {
            let (lo, hi) = self.data.split_at_mut(dst * stride);
            (&mut hi[..stride], &lo[src * stride..(src + 1) * stride])
        };
        for (a, b) in d[from_word..].iter_mut().zip(&s[from_word..]) {
            *a ^= b;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.stride {
            self.data.swap(a * self.stride + w, b * self.stride + w);
        }
    }

    /// In-place Gauss-Jordan elimination; returns pivot columns in row order.
    fn reduce(&mut self, full: bool) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut next = 0;
        for c in 0..self.cols {
            if next == self.rows {
                break;
            }
            let Some(p) = (next..self.rows).find(|&r| self.get(r, c)) else {
                continue;
            };
            self.swap_rows(next, p);
            let w = c / WORD;
            let start = if full { 0 } else { next + 1 };
            for r in start..self.rows {
                if r != next && self.get(r, c) {
                    self.xor_rows(r, next, w);
                }
            }
            pivots.push(c);
            next += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().reduce(false).len()
    }

    /// Reduced row echelon form together with the pivot columns.
    pub fn rref(&self) -> (GF2Matrix, Vec<usize>) {
        let mut m = self.clone();
        let pivots = m.reduce(true);
        (m, pivots)
    }

    pub fn null_space_basis(&self) -> GF2Basis {
        let (r, pivots) = self.rref();
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let free: Vec<usize> = (0..self.cols).filter(|&c| !is_pivot[c]).collect();
        let rows = free
            .iter()
            .map(|&f| {
                let mut v = BitVec::zeros(self.cols);
                v.set(f, true);
                for (t, &p) in pivots.iter().enumerate() {
                    if r.get(t, f) {
                        v.set(p, true);
                    }
                }
                v
            })
            .collect();
        GF2Basis {
            n: self.cols,
            rows,
            pivots,
            free,
        }
    }

    /// Every `x` with `A x = 0`. Refuses when more than `cap` vectors would result.
    pub fn enumerate_codewords(&self, cap: u64) -> Result<Vec<BitVec>, Gf2Error> {
        self.null_space_basis().enumerate(cap)
    }
}

impl fmt::Debug for GF2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "GF2Matrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

/// Basis of the null space of a parity-check matrix (a generator matrix).
#[derive(Clone, Debug)]
pub struct GF2Basis {
    n: usize,
    rows: Vec<BitVec>,
    /// Pivot columns of the reduced parity-check matrix.
    pub pivots: Vec<usize>,
    /// Non-pivot columns; basis row `k` is the unique null vector with a single
    /// one among the free columns, at `free[k]`.
    pub free: Vec<usize>,
}

impl GF2Basis {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[BitVec] {
        &self.rows
    }

    /// The GF(2) combination of basis rows selected by `message`.
    pub fn encode(&self, message: &BitVec) -> Result<BitVec, Gf2Error> {
        if message.len() != self.dim() {
            return Err(Gf2Error::LengthMismatch {
                expected: self.dim(),
                got: message.len(),
            });
        }
        let mut x = BitVec::zeros(self.n);
        for (k, row) in self.rows.iter().enumerate() {
            if message.get(k) {
                x.xor_assign(row);
            }
        }
        Ok(x)
    }

    pub fn enumerate(&self, cap: u64) -> Result<Vec<BitVec>, Gf2Error> {
        let dim = self.dim();
        if dim >= 64 || (1u64 << dim) > cap {
            return Err(Gf2Error::CapacityExceeded { dim, cap });
        }
        let count = 1usize << dim;
        let mut out = Vec::with_capacity(count);
        // Gray-code walk: one row XOR per codeword.
        let mut x = BitVec::zeros(self.n);
        out.push(x.clone());
        for g in 1..count {
            let bit = g.trailing_zeros() as usize;
            x.xor_assign(&self.rows[bit]);
            out.push(x.clone());
        }
        Ok(out)
    }
}
