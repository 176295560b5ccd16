//! Dense matrices over `Scalar` and the three-layer block type.
//!
//! A `LayeredMatrix` is an element of M_m(M_n(M_k(C))) stored as one dense
//! scalar matrix. The flat layout is normative and bit-exact for all I/O:
//! the row of entry (i in [m], p in [n], r in [k]) is
//! ((i-1)*n + (p-1))*k + (r-1), and columns are indexed the same way.
//! Outer-rectangular (rows x cols outer blocks) and middle-rectangular
//! shapes are allowed; operations check layer compatibility.
//!
//! Float-mode rank and invertibility decisions go through singular values
//! (nalgebra); exact mode uses Gauss-Jordan elimination over Gaussian
//! rationals. Everything here is immutable after construction and safe to
//! share across threads.

use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};
use nalgebra::DMatrix;
use num::complex::Complex64;
use sha2::{Digest, Sha256};

/// Default float invertibility threshold; overridable everywhere.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Hex SHA-256 over the canonical bytes of the given matrices, in order.
/// Stable across runs for both modes; used to key caches and to stamp
/// verdicts with replayable input identities.
pub fn content_digest(parts: &[&LayeredMatrix]) -> String {
    let mut bytes = Vec::new();
    for p in parts {
        p.canonical_bytes(&mut bytes);
    }
    let mut h = Sha256::new();
    h.update(&bytes);
    format!("{:x}", h.finalize())
}

// ---------------------------------------------------------------- Mat

/// Dense row-major scalar matrix, homogeneous in one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    mode: Mode,
    data: Vec<Scalar>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize, mode: Mode) -> Self {
        Mat { rows, cols, mode, data: vec![Scalar::zero(mode); rows * cols] }
    }

    pub fn identity(n: usize, mode: Mode) -> Self {
        let mut m = Mat::zeros(n, n, mode);
        for i in 0..n {
            m.set(i, i, Scalar::one(mode));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mode: Mode, mut f: impl FnMut(usize, usize) -> Scalar) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let s = f(i, j);
                assert_eq!(s.mode(), mode, "entry mode disagrees with matrix mode");
                data.push(s);
            }
        }
        Mat { rows, cols, mode, data }
    }

    /// Rows of scalars; all rows must have equal length and one mode.
    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        let mut mode = None;
        for row in &rows {
            if row.len() != c {
                return Err(Error::dim("ragged rows"));
            }
            for s in row {
                match mode {
                    None => mode = Some(s.mode()),
                    Some(m) if m != s.mode() => {
                        return Err(Error::ModeMismatch("mixed entries in one matrix".into()))
                    }
                    _ => {}
                }
                data.push(s.clone());
            }
        }
        let mode = mode.unwrap_or(Mode::Float);
        Ok(Mat { rows: r, cols: c, mode, data })
    }

    /// Real integer entries, handy in tests.
    pub fn from_i64(rows: &[&[i64]], mode: Mode) -> Self {
        Mat::from_fn(rows.len(), rows[0].len(), mode, |i, j| Scalar::from_int(rows[i][j], mode))
    }

    /// Row-major entry list of the given shape; one mode throughout.
    pub fn from_entries(rows: usize, cols: usize, mode: Mode, data: Vec<Scalar>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} entries for a {rows} x {cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|s| s.mode() != mode) {
            return Err(Error::ModeMismatch("mixed entries in one matrix".into()));
        }
        Ok(Mat { rows, cols, mode, data })
    }

    /// Row-major entry slice.
    pub fn entries(&self) -> &[Scalar] {
        &self.data
    }

    pub fn rows(&self) -> usize { self.rows }
    pub fn cols(&self) -> usize { self.cols }
    pub fn mode(&self) -> Mode { self.mode }
    pub fn is_square(&self) -> bool { self.rows == self.cols }

    pub fn at(&self, i: usize, j: usize) -> &Scalar {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, s: Scalar) {
        assert_eq!(s.mode(), self.mode, "entry mode disagrees with matrix mode");
        self.data[i * self.cols + j] = s;
    }

    pub fn add(&self, rhs: &Mat) -> Result<Mat> {
        self.check_same_shape(rhs)?;
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a.add(b)).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, mode: self.mode, data })
    }

    pub fn sub(&self, rhs: &Mat) -> Result<Mat> {
        self.check_same_shape(rhs)?;
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a.sub(b)).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, mode: self.mode, data })
    }

    pub fn neg(&self) -> Mat {
        let data = self.data.iter().map(|a| a.neg()).collect();
        Mat { rows: self.rows, cols: self.cols, mode: self.mode, data }
    }

    pub fn scale(&self, s: &Scalar) -> Mat {
        assert_eq!(s.mode(), self.mode, "scale factor mode disagrees");
        let data = self.data.iter().map(|a| a.mul(s)).collect();
        Mat { rows: self.rows, cols: self.cols, mode: self.mode, data }
    }

    pub fn mul(&self, rhs: &Mat) -> Result<Mat> {
        if self.mode != rhs.mode {
            return Err(Error::ModeMismatch("product of exact and float matrices".into()));
        }
        if self.cols != rhs.rows {
            return Err(Error::dim(format!(
                "product {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, rhs.cols, self.mode);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.at(i, l);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let t = a.mul(rhs.at(l, j));
                    let cur = out.at(i, j).add(&t);
                    out.set(i, j, cur);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, self.mode, |i, j| self.at(j, i).clone())
    }

    pub fn conj_transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, self.mode, |i, j| self.at(j, i).conj())
    }

    /// Kronecker product, row-major nesting: (A kron B)[(i*p+r),(j*q+t)] = A[i,j]*B[r,t].
    pub fn kron(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.mode, rhs.mode, "mode mismatch in kron");
        Mat::from_fn(self.rows * rhs.rows, self.cols * rhs.cols, self.mode, |i, j| {
            let (ia, ib) = (i / rhs.rows, i % rhs.rows);
            let (ja, jb) = (j / rhs.cols, j % rhs.cols);
            self.at(ia, ja).mul(rhs.at(ib, jb))
        })
    }

    pub fn hcat(&self, rhs: &Mat) -> Result<Mat> {
        if self.rows != rhs.rows || self.mode != rhs.mode {
            return Err(Error::dim("hcat row counts differ"));
        }
        Ok(Mat::from_fn(self.rows, self.cols + rhs.cols, self.mode, |i, j| {
            if j < self.cols { self.at(i, j).clone() } else { rhs.at(i, j - self.cols).clone() }
        }))
    }

    pub fn vcat(&self, rhs: &Mat) -> Result<Mat> {
        if self.cols != rhs.cols || self.mode != rhs.mode {
            return Err(Error::dim("vcat column counts differ"));
        }
        Ok(Mat::from_fn(self.rows + rhs.rows, self.cols, self.mode, |i, j| {
            if i < self.rows { self.at(i, j).clone() } else { rhs.at(i - self.rows, j).clone() }
        }))
    }

    /// Submatrix with rows [r0, r1) and columns [c0, c1).
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Mat {
        assert!(r1 <= self.rows && c1 <= self.cols && r0 <= r1 && c0 <= c1);
        Mat::from_fn(r1 - r0, c1 - c0, self.mode, |i, j| self.at(r0 + i, c0 + j).clone())
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols);
        for i in 0..b.rows {
            for j in 0..b.cols {
                self.set(r0 + i, c0 + j, b.at(i, j).clone());
            }
        }
    }

    /// Deterministic byte encoding of shape, mode, and entries, for digests.
    pub fn canonical_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for s in &self.data {
            s.canonical_bytes(out);
        }
    }

    /// Max modulus over entries. Exact entries are converted approximately,
    /// except that an exactly zero matrix reports exactly 0.0.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|s| if s.is_zero() { 0.0 } else { s.abs() }).fold(0.0, f64::max)
    }

    /// Max modulus of the entrywise difference; exactly 0.0 when equal in
    /// exact mode.
    pub fn max_abs_diff(&self, rhs: &Mat) -> Result<f64> {
        self.check_same_shape(rhs)?;
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| {
                let d = a.sub(b);
                if d.is_zero() { 0.0 } else { d.abs() }
            })
            .fold(0.0, f64::max))
    }

    /// Equality convention used throughout: exact mode compares exactly and
    /// ignores tol; float mode requires max |a-b| <= tol * max(1, |A|, |B|).
    pub fn approx_eq(&self, rhs: &Mat, tol: f64) -> Result<bool> {
        if self.mode != rhs.mode {
            return Err(Error::ModeMismatch("comparing exact with float".into()));
        }
        match self.mode {
            Mode::Exact => {
                self.check_same_shape(rhs)?;
                Ok(self == rhs)
            }
            Mode::Float => {
                let d = self.max_abs_diff(rhs)?;
                Ok(d <= tol * 1f64.max(self.norm_max()).max(rhs.norm_max()))
            }
        }
    }

    /// All entries have modulus <= tol * scale (float); exactly zero (exact).
    pub fn is_zero_within(&self, tol: f64, scale: f64) -> bool {
        match self.mode {
            Mode::Exact => self.data.iter().all(Scalar::is_zero),
            Mode::Float => self.data.iter().all(|s| s.abs() <= tol * scale),
        }
    }

    fn check_same_shape(&self, rhs: &Mat) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::dim(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        if self.mode != rhs.mode {
            return Err(Error::ModeMismatch("exact and float operands".into()));
        }
        Ok(())
    }

    // ------------------------------------------------ elimination kernels

    /// Gauss-Jordan elimination. Exact mode picks the first nonzero pivot;
    /// float mode picks the largest modulus (callers gate invertibility on
    /// singular values first). Returns the inverse when full rank, plus the
    /// reached rank.
    pub fn gauss_jordan_inverse(&self) -> (Option<Mat>, usize) {
        assert!(self.is_square(), "gauss_jordan_inverse needs a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n, self.mode);
        let mut rank = 0;
        for col in 0..n {
            let pivot = match self.mode {
                Mode::Exact => (rank..n).find(|&r| !a.at(r, col).is_zero()),
                Mode::Float => {
                    let best = (rank..n).max_by(|&x, &y| {
                        a.at(x, col).abs().partial_cmp(&a.at(y, col).abs()).unwrap()
                    });
                    best.filter(|&r| a.at(r, col).abs() > 0.0)
                }
            };
            let Some(p) = pivot else { continue };
            a.swap_rows(rank, p);
            inv.swap_rows(rank, p);
            let piv_inv = a.at(rank, col).inv().expect("nonzero pivot");
            a.scale_row(rank, &piv_inv);
            inv.scale_row(rank, &piv_inv);
            for r in 0..n {
                if r == rank || a.at(r, col).is_zero() {
                    continue;
                }
                let factor = a.at(r, col).clone();
                a.axpy_row(r, rank, &factor.neg());
                inv.axpy_row(r, rank, &factor.neg());
            }
            rank += 1;
        }
        if rank == n {
            (Some(inv), rank)
        } else {
            (None, rank)
        }
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    fn scale_row(&mut self, i: usize, s: &Scalar) {
        for c in 0..self.cols {
            let v = self.at(i, c).mul(s);
            self.set(i, c, v);
        }
    }

    /// row[i] += factor * row[j]
    fn axpy_row(&mut self, i: usize, j: usize, factor: &Scalar) {
        for c in 0..self.cols {
            let v = self.at(i, c).add(&self.at(j, c).mul(factor));
            self.set(i, c, v);
        }
    }

    /// Column-space rank. Exact mode: forward elimination. Float mode:
    /// singular values >= tol * max(1, largest one) count.
    pub fn rank(&self, tol: f64) -> usize {
        match self.mode {
            Mode::Exact => self.rank_exact(),
            Mode::Float => {
                let sv = self.singular_values();
                let smax = sv.iter().cloned().fold(0.0, f64::max);
                sv.iter().filter(|&&s| s >= tol * 1f64.max(smax)).count()
            }
        }
    }

    fn rank_exact(&self) -> usize {
        let mut a = self.clone();
        let (rows, cols) = (a.rows, a.cols);
        let mut rank = 0;
        for col in 0..cols {
            let Some(p) = (rank..rows).find(|&r| !a.at(r, col).is_zero()) else { continue };
            a.swap_rows(rank, p);
            let piv_inv = a.at(rank, col).inv().expect("nonzero pivot");
            for r in rank + 1..rows {
                if a.at(r, col).is_zero() {
                    continue;
                }
                let factor = a.at(r, col).mul(&piv_inv).neg();
                a.axpy_row(r, rank, &factor);
            }
            rank += 1;
            if rank == rows {
                break;
            }
        }
        rank
    }

    /// Reduced row echelon form with unit pivots; returns the reduced matrix
    /// and the pivot column indices (strictly increasing). Float mode treats
    /// entries of modulus <= tol * max(1, |A|) as zero.
    pub fn rref(&self, tol: f64) -> (Mat, Vec<usize>) {
        let mut a = self.clone();
        let threshold = match self.mode {
            Mode::Exact => 0.0,
            Mode::Float => tol * 1f64.max(self.norm_max()),
        };
        let is_nonzero = |s: &Scalar| match s.mode() {
            Mode::Exact => !s.is_zero(),
            Mode::Float => s.abs() > threshold,
        };
        let (rows, cols) = (a.rows, a.cols);
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..cols {
            let pivot = match self.mode {
                Mode::Exact => (rank..rows).find(|&r| is_nonzero(a.at(r, col))),
                Mode::Float => (rank..rows)
                    .max_by(|&x, &y| a.at(x, col).abs().partial_cmp(&a.at(y, col).abs()).unwrap())
                    .filter(|&r| is_nonzero(a.at(r, col))),
            };
            let Some(p) = pivot else { continue };
            a.swap_rows(rank, p);
            let piv_inv = a.at(rank, col).inv().expect("nonzero pivot");
            a.scale_row(rank, &piv_inv);
            for r in 0..rows {
                if r != rank && is_nonzero(a.at(r, col)) {
                    let factor = a.at(r, col).neg();
                    a.axpy_row(r, rank, &factor);
                }
            }
            // re-zero the cleared column explicitly so float forms are tidy
            for r in 0..rows {
                if r != rank {
                    a.set(r, col, Scalar::zero(self.mode));
                }
            }
            pivots.push(col);
            rank += 1;
            if rank == rows {
                break;
            }
        }
        (a, pivots)
    }

    /// Reduced column echelon basis of the column space: unit pivots, pivot
    /// rows strictly increasing (leftmost-pivot normalization), pivot rows
    /// cleared in the other columns. Returns (basis columns, pivot rows).
    pub fn column_space_basis(&self, tol: f64) -> (Mat, Vec<usize>) {
        let (r, pivots) = self.transpose().rref(tol);
        let rank = pivots.len();
        // rows 0..rank of r hold the basis as rows; transpose back to columns
        let basis = r.block(0, rank, 0, r.cols()).transpose();
        (basis, pivots)
    }

    // ------------------------------------------------ float-only kernels

    pub fn to_na(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.at(i, j).to_c64())
    }

    pub fn from_na(m: &DMatrix<Complex64>) -> Mat {
        Mat::from_fn(m.nrows(), m.ncols(), Mode::Float, |i, j| Scalar::from_c64(m[(i, j)]))
    }

    /// Singular values (float mode only).
    pub fn singular_values(&self) -> Vec<f64> {
        assert_eq!(self.mode, Mode::Float, "singular values need float mode");
        if self.rows == 0 || self.cols == 0 {
            return Vec::new();
        }
        self.to_na().singular_values().iter().cloned().collect()
    }

    pub fn sv_extremes(&self) -> (f64, f64) {
        let sv = self.singular_values();
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        (smin, smax)
    }
}

// ---------------------------------------------------------- LayeredMatrix

/// Element of M_rows(M_mid(M_k(C))) with possibly rectangular outer and
/// middle shapes. `inner` cells are always k x k.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredMatrix {
    outer_rows: usize,
    outer_cols: usize,
    mid_rows: usize,
    mid_cols: usize,
    inner: usize,
    mat: Mat,
}

/// Outcome of `LayeredMatrix::invert`. Non-invertibility is data here, not an
/// error: `inverse` is present iff `invertible`.
#[derive(Debug, Clone)]
pub struct InvertibilityReport {
    pub invertible: bool,
    /// Float mode only.
    pub smallest_singular_value: Option<f64>,
    /// Exact mode only: size minus rank.
    pub rank_deficiency: Option<usize>,
    pub inverse: Option<LayeredMatrix>,
}

impl LayeredMatrix {
    /// Wrap a scalar matrix with the given layer shape; sizes must agree.
    pub fn new(
        mat: Mat,
        outer_rows: usize,
        outer_cols: usize,
        mid_rows: usize,
        mid_cols: usize,
        inner: usize,
    ) -> Result<Self> {
        if mat.rows() != outer_rows * mid_rows * inner || mat.cols() != outer_cols * mid_cols * inner {
            return Err(Error::dim(format!(
                "scalar {}x{} cannot carry layers ({},{},{})x({},{},{})",
                mat.rows(), mat.cols(), outer_rows, mid_rows, inner, outer_cols, mid_cols, inner
            )));
        }
        Ok(LayeredMatrix { outer_rows, outer_cols, mid_rows, mid_cols, inner, mat })
    }

    /// Square layers (m, n, k).
    pub fn from_square(mat: Mat, m: usize, n: usize, k: usize) -> Result<Self> {
        LayeredMatrix::new(mat, m, m, n, n, k)
    }

    pub fn zeros(or: usize, oc: usize, mr: usize, mc: usize, k: usize, mode: Mode) -> Self {
        LayeredMatrix {
            outer_rows: or,
            outer_cols: oc,
            mid_rows: mr,
            mid_cols: mc,
            inner: k,
            mat: Mat::zeros(or * mr * k, oc * mc * k, mode),
        }
    }

    pub fn identity(m: usize, n: usize, k: usize, mode: Mode) -> Self {
        LayeredMatrix {
            outer_rows: m,
            outer_cols: m,
            mid_rows: n,
            mid_cols: n,
            inner: k,
            mat: Mat::identity(m * n * k, mode),
        }
    }

    pub fn outer_rows(&self) -> usize { self.outer_rows }
    pub fn outer_cols(&self) -> usize { self.outer_cols }
    pub fn mid_rows(&self) -> usize { self.mid_rows }
    pub fn mid_cols(&self) -> usize { self.mid_cols }
    pub fn inner(&self) -> usize { self.inner }
    pub fn mode(&self) -> Mode { self.mat.mode() }
    pub fn mat(&self) -> &Mat { &self.mat }
    pub fn into_mat(self) -> Mat { self.mat }

    pub fn is_square(&self) -> bool {
        self.outer_rows == self.outer_cols && self.mid_rows == self.mid_cols
    }

    /// Outer block count for square shapes (m).
    pub fn m(&self) -> usize { self.outer_rows }
    /// Middle layer size for square shapes (n).
    pub fn n(&self) -> usize { self.mid_rows }
    /// Inner layer size (k).
    pub fn k(&self) -> usize { self.inner }

    fn cell_rows(&self) -> usize { self.mid_rows * self.inner }
    fn cell_cols(&self) -> usize { self.mid_cols * self.inner }

    /// Outer block (i, j), zero-based, as a scalar matrix.
    pub fn outer_block(&self, i: usize, j: usize) -> Mat {
        let (cr, cc) = (self.cell_rows(), self.cell_cols());
        self.mat.block(i * cr, (i + 1) * cr, j * cc, (j + 1) * cc)
    }

    pub fn set_outer_block(&mut self, i: usize, j: usize, b: &Mat) {
        assert_eq!((b.rows(), b.cols()), (self.cell_rows(), self.cell_cols()));
        self.mat.set_block(i * self.cell_rows(), j * self.cell_cols(), b);
    }

    /// Assemble from a grid of outer blocks (all cells (mr*k) x (mc*k)).
    pub fn from_outer_blocks(grid: &[Vec<Mat>], mr: usize, mc: usize, k: usize) -> Result<Self> {
        let or = grid.len();
        let oc = grid.first().map_or(0, |r| r.len());
        if or == 0 || oc == 0 {
            return Err(Error::dim("empty block grid"));
        }
        let mode = grid[0][0].mode();
        let mut out = LayeredMatrix::zeros(or, oc, mr, mc, k, mode);
        for (i, row) in grid.iter().enumerate() {
            if row.len() != oc {
                return Err(Error::dim("ragged block grid"));
            }
            for (j, b) in row.iter().enumerate() {
                if (b.rows(), b.cols()) != (mr * k, mc * k) {
                    return Err(Error::dim("block size disagrees with layers"));
                }
                out.set_outer_block(i, j, b);
            }
        }
        Ok(out)
    }

    /// Outer columns [c0, c1) as a layered matrix.
    pub fn outer_col_range(&self, c0: usize, c1: usize) -> LayeredMatrix {
        let cc = self.cell_cols();
        let mat = self.mat.block(0, self.mat.rows(), c0 * cc, c1 * cc);
        LayeredMatrix {
            outer_rows: self.outer_rows,
            outer_cols: c1 - c0,
            mid_rows: self.mid_rows,
            mid_cols: self.mid_cols,
            inner: self.inner,
            mat,
        }
    }

    pub fn outer_hcat(&self, rhs: &LayeredMatrix) -> Result<LayeredMatrix> {
        if self.outer_rows != rhs.outer_rows
            || self.mid_rows != rhs.mid_rows
            || self.mid_cols != rhs.mid_cols
            || self.inner != rhs.inner
        {
            return Err(Error::dim("outer_hcat layer mismatch"));
        }
        Ok(LayeredMatrix {
            outer_rows: self.outer_rows,
            outer_cols: self.outer_cols + rhs.outer_cols,
            mid_rows: self.mid_rows,
            mid_cols: self.mid_cols,
            inner: self.inner,
            mat: self.mat.hcat(&rhs.mat)?,
        })
    }

    /// Middle-layer block [p0,p1) x [q0,q1) of a 1x1-outer value.
    pub fn mid_block(&self, p0: usize, p1: usize, q0: usize, q1: usize) -> Mat {
        assert_eq!((self.outer_rows, self.outer_cols), (1, 1), "mid_block reads 1x1-outer values");
        let k = self.inner;
        self.mat.block(p0 * k, p1 * k, q0 * k, q1 * k)
    }

    /// Stack two 1x1-outer values along middle rows.
    pub fn mid_vcat(&self, rhs: &LayeredMatrix) -> Result<LayeredMatrix> {
        if (self.outer_rows, self.outer_cols) != (1, 1) || (rhs.outer_rows, rhs.outer_cols) != (1, 1) {
            return Err(Error::dim("mid_vcat needs 1x1-outer values"));
        }
        if self.mid_cols != rhs.mid_cols || self.inner != rhs.inner {
            return Err(Error::dim("mid_vcat layer mismatch"));
        }
        LayeredMatrix::new(
            self.mat.vcat(&rhs.mat)?,
            1,
            1,
            self.mid_rows + rhs.mid_rows,
            self.mid_cols,
            self.inner,
        )
    }

    /// Stack two 1x1-outer values along middle columns.
    pub fn mid_hcat(&self, rhs: &LayeredMatrix) -> Result<LayeredMatrix> {
        if (self.outer_rows, self.outer_cols) != (1, 1) || (rhs.outer_rows, rhs.outer_cols) != (1, 1) {
            return Err(Error::dim("mid_hcat needs 1x1-outer values"));
        }
        if self.mid_rows != rhs.mid_rows || self.inner != rhs.inner {
            return Err(Error::dim("mid_hcat layer mismatch"));
        }
        LayeredMatrix::new(
            self.mat.hcat(&rhs.mat)?,
            1,
            1,
            self.mid_rows,
            self.mid_cols + rhs.mid_cols,
            self.inner,
        )
    }

    pub fn add(&self, rhs: &LayeredMatrix) -> Result<LayeredMatrix> {
        self.check_same_layers(rhs)?;
        Ok(LayeredMatrix { mat: self.mat.add(&rhs.mat)?, ..self.clone() })
    }

    pub fn sub(&self, rhs: &LayeredMatrix) -> Result<LayeredMatrix> {
        self.check_same_layers(rhs)?;
        Ok(LayeredMatrix { mat: self.mat.sub(&rhs.mat)?, ..self.clone() })
    }

    pub fn neg(&self) -> LayeredMatrix {
        LayeredMatrix { mat: self.mat.neg(), ..self.clone() }
    }

    pub fn scale(&self, s: &Scalar) -> LayeredMatrix {
        LayeredMatrix { mat: self.mat.scale(s), ..self.clone() }
    }

    pub fn conj_transpose(&self) -> LayeredMatrix {
        LayeredMatrix {
            outer_rows: self.outer_cols,
            outer_cols: self.outer_rows,
            mid_rows: self.mid_cols,
            mid_cols: self.mid_rows,
            inner: self.inner,
            mat: self.mat.conj_transpose(),
        }
    }

    /// Layered product: inner layers must agree, outer/middle shapes chain.
    pub fn multiply(&self, rhs: &LayeredMatrix) -> Result<LayeredMatrix> {
        if self.inner != rhs.inner {
            return Err(Error::dim(format!("inner layers {} vs {}", self.inner, rhs.inner)));
        }
        if self.outer_cols != rhs.outer_rows || self.mid_cols != rhs.mid_rows {
            return Err(Error::dim(format!(
                "layered product ({},{}) by ({},{})",
                self.outer_cols, self.mid_cols, rhs.outer_rows, rhs.mid_rows
            )));
        }
        Ok(LayeredMatrix {
            outer_rows: self.outer_rows,
            outer_cols: rhs.outer_cols,
            mid_rows: self.mid_rows,
            mid_cols: rhs.mid_cols,
            inner: self.inner,
            mat: self.mat.mul(&rhs.mat)?,
        })
    }

    /// Interleaved direct sum: block (i,j) of the result is the middle-layer
    /// diagonal sum of A_(i,j) and A'_(i,j). Outer shapes and k must agree.
    pub fn interleave(&self, rhs: &LayeredMatrix) -> Result<LayeredMatrix> {
        if self.outer_rows != rhs.outer_rows || self.outer_cols != rhs.outer_cols {
            return Err(Error::dim("interleave outer shape mismatch"));
        }
        if self.inner != rhs.inner {
            return Err(Error::dim("interleave inner layer mismatch"));
        }
        if self.mode() != rhs.mode() {
            return Err(Error::ModeMismatch("interleave of exact and float".into()));
        }
        let (mr, mc) = (self.mid_rows + rhs.mid_rows, self.mid_cols + rhs.mid_cols);
        let k = self.inner;
        let mut out = LayeredMatrix::zeros(self.outer_rows, self.outer_cols, mr, mc, k, self.mode());
        for i in 0..self.outer_rows {
            for j in 0..self.outer_cols {
                let a = self.outer_block(i, j);
                let b = rhs.outer_block(i, j);
                let mut cell = Mat::zeros(mr * k, mc * k, self.mode());
                cell.set_block(0, 0, &a);
                cell.set_block(self.mid_rows * k, self.mid_cols * k, &b);
                out.set_outer_block(i, j, &cell);
            }
        }
        Ok(out)
    }

    pub fn norm_max(&self) -> f64 {
        self.mat.norm_max()
    }

    /// Deterministic byte encoding of layers and entries, for digests.
    pub fn canonical_bytes(&self, out: &mut Vec<u8>) {
        for dim in [self.outer_rows, self.outer_cols, self.mid_rows, self.mid_cols, self.inner] {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        self.mat.canonical_bytes(out);
    }

    pub fn max_abs_diff(&self, rhs: &LayeredMatrix) -> Result<f64> {
        self.check_same_layers(rhs)?;
        self.mat.max_abs_diff(&rhs.mat)
    }

    pub fn approx_eq(&self, rhs: &LayeredMatrix, tol: f64) -> Result<bool> {
        self.check_same_layers(rhs)?;
        self.mat.approx_eq(&rhs.mat, tol)
    }

    fn check_same_layers(&self, rhs: &LayeredMatrix) -> Result<()> {
        if (self.outer_rows, self.outer_cols, self.mid_rows, self.mid_cols, self.inner)
            != (rhs.outer_rows, rhs.outer_cols, rhs.mid_rows, rhs.mid_cols, rhs.inner)
        {
            return Err(Error::dim("layer shapes differ"));
        }
        Ok(())
    }

    /// Invertibility report. Float mode declares invertible iff the smallest
    /// singular value is >= tol * max(1, largest singular value); exact mode
    /// reports the rank deficiency. The inverse, when present, satisfies
    /// A * inverse = I exactly (exact) or within tolerance (float).
    pub fn invert(&self, tol: f64) -> Result<InvertibilityReport> {
        if !self.is_square() || self.mat.rows() != self.mat.cols() {
            return Err(Error::dim("inverting a non-square layered matrix"));
        }
        match self.mode() {
            Mode::Exact => {
                let (inv, rank) = self.mat.gauss_jordan_inverse();
                let n = self.mat.rows();
                Ok(InvertibilityReport {
                    invertible: rank == n,
                    smallest_singular_value: None,
                    rank_deficiency: Some(n - rank),
                    inverse: inv.map(|m| LayeredMatrix { mat: m, ..self.clone() }),
                })
            }
            Mode::Float => {
                let (smin, smax) = self.mat.sv_extremes();
                let invertible = smin >= tol * 1f64.max(smax);
                let inverse = if invertible {
                    let (inv, _) = self.mat.gauss_jordan_inverse();
                    inv.map(|m| LayeredMatrix { mat: m, ..self.clone() })
                } else {
                    None
                };
                Ok(InvertibilityReport {
                    invertible: invertible && inverse.is_some(),
                    smallest_singular_value: Some(smin),
                    rank_deficiency: None,
                    inverse,
                })
            }
        }
    }

    /// Hermitian square root of a PSD matrix (float only). Eigenvalues in
    /// [-tol, 0) are clamped to 0; below -tol is an error. The result S is
    /// Hermitian PSD with S*S = P within 10*tol.
    pub fn hermitian_sqrt(&self, tol: f64) -> Result<LayeredMatrix> {
        if self.mode() == Mode::Exact {
            return Err(Error::ExactModeUnsupported("hermitian_sqrt"));
        }
        if !self.is_square() {
            return Err(Error::dim("hermitian_sqrt needs a square matrix"));
        }
        let scale = 1f64.max(self.norm_max());
        let herm_defect = self.mat.max_abs_diff(&self.mat.conj_transpose())?;
        if herm_defect > tol * scale {
            return Err(Error::NotHermitian);
        }
        // symmetrize so the eigensolver sees an exactly Hermitian input
        let na = self.mat.to_na();
        let sym = (&na + na.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(sym);
        let mut vals = eig.eigenvalues.clone();
        for v in vals.iter_mut() {
            if *v < -tol {
                return Err(Error::NegativeEigenvalue(*v));
            }
            *v = v.max(0.0).sqrt();
        }
        let u = eig.eigenvectors;
        let diag = DMatrix::from_fn(vals.len(), vals.len(), |i, j| {
            if i == j { Complex64::new(vals[i], 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        let s = &u * diag * u.adjoint();
        Ok(LayeredMatrix { mat: Mat::from_na(&s), ..self.clone() })
    }
}

/// Lift an n x n scalar matrix s to the layered element with s (x) I_k on
/// every outer diagonal block: the middle layer is mixed by s, outer and
/// inner layers are untouched.
pub fn scalar_similarity_lift(s: &Mat, m: usize, k: usize, tol: f64) -> Result<LayeredMatrix> {
    if !s.is_square() {
        return Err(Error::dim("similarity factor must be square"));
    }
    let n = s.rows();
    let (inv, _) = match s.mode() {
        Mode::Exact => s.gauss_jordan_inverse(),
        Mode::Float => {
            let tmp = LayeredMatrix::new(s.clone(), 1, 1, n, n, 1)?;
            let rep = tmp.invert(tol)?;
            (rep.inverse.map(LayeredMatrix::into_mat), 0)
        }
    };
    if inv.is_none() {
        return Err(Error::NotInvertible("similarity factor".into()));
    }
    let cell = s.kron(&Mat::identity(k, s.mode()));
    let mut out = LayeredMatrix::zeros(m, m, n, n, k, s.mode());
    for i in 0..m {
        out.set_outer_block(i, i, &cell);
    }
    Ok(out)
}
