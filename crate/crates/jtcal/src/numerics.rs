//! Dense complex-matrix kernel shared by every other module.
//!
//! All matrices in this crate are tiny (channel matrices, precoders, and
//! combined ports top out around 8x8), so storage is a plain row-major
//! `Vec<Complex64>` and every operation is a direct loop. Shape mismatches
//! panic; constructors reject non-finite entries so NaN/Inf can never
//! propagate silently through a long Monte Carlo run.

use num_complex::Complex64;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl CMatrix {
    /// Builds a matrix from row-major entries.
    ///
    /// Panics if `entries.len() != rows * cols`, if either dimension is
    /// zero, or if any entry is not finite.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<Complex64>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be nonzero");
        assert_eq!(
            entries.len(),
            rows * cols,
            "entry count {} does not fill a {}x{} matrix",
            entries.len(),
            rows,
            cols
        );
        for (i, z) in entries.iter().enumerate() {
            assert!(
                z.re.is_finite() && z.im.is_finite(),
                "non-finite entry {z} at flat index {i}"
            );
        }
        CMatrix {
            rows,
            cols,
            entries,
        }
    }

    /// Builds a matrix by evaluating `f(row, col)` in row-major order.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self::from_entries(rows, cols, entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_entries(rows, cols, vec![Complex64::new(0.0, 0.0); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        })
    }

    /// Column vector (n x 1) from a list of entries.
    pub fn column_vector(entries: Vec<Complex64>) -> Self {
        let n = entries.len();
        Self::from_entries(n, 1, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i},{j}) out of bounds"
        );
        self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i},{j}) out of bounds"
        );
        assert!(z.re.is_finite() && z.im.is_finite(), "non-finite entry {z}");
        self.entries[i * self.cols + j] = z;
    }

    /// Row-major entry slice.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Matrix product `self * rhs`. Panics on inner-dimension mismatch.
    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows * rhs.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.entries[i * self.cols + k];
                for j in 0..rhs.cols {
                    out[i * rhs.cols + j] += a * rhs.entries[k * rhs.cols + j];
                }
            }
        }
        CMatrix {
            rows: self.rows,
            cols: rhs.cols,
            entries: out,
        }
    }

    /// Plain transpose, no conjugation. This is the reciprocity transpose:
    /// uplink and downlink matrices are transposes of each other.
    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Hermitian adjoint (conjugate transpose).
    pub fn conj_transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    /// Elementwise complex conjugate.
    pub fn conj(&self) -> CMatrix {
        self.map(|z| z.conj())
    }

    /// Frobenius norm: sqrt of the sum of squared entry magnitudes.
    pub fn fro_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Elementwise sum. Panics unless shapes match.
    pub fn add(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "add shape mismatch: {}x{} + {}x{}",
            self.rows,
            self.cols,
            rhs.rows,
            rhs.cols
        );
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Multiplies every entry by a complex scalar.
    pub fn scale(&self, z: Complex64) -> CMatrix {
        self.map(|e| e * z)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&e| f(e)).collect(),
        }
    }

    /// Horizontal concatenation `[self | rhs]`. Panics unless row counts match.
    pub fn hcat(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            self.rows, rhs.rows,
            "hcat row mismatch: {} vs {}",
            self.rows, rhs.rows
        );
        CMatrix::from_fn(self.rows, self.cols + rhs.cols, |i, j| {
            if j < self.cols {
                self.get(i, j)
            } else {
                rhs.get(i, j - self.cols)
            }
        })
    }

    /// Largest entrywise absolute difference against another matrix of the
    /// same shape. Convenient for tolerance checks.
    pub fn max_abs_diff(&self, rhs: &CMatrix) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        self.entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
