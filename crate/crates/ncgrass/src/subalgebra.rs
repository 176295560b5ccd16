//! Unital subalgebras of the k x k inner layer, used to restrict where
//! coefficients are allowed to live. Membership is tested cellwise: a layered
//! matrix belongs to the subalgebra when every inner k x k cell does.

use crate::error::{Error, Result};
use crate::matrix::{LayeredMatrix, Mat};
use crate::scalar::{Mode, Scalar};

#[derive(Debug, Clone)]
pub enum SubalgebraKind {
    /// All of M_k.
    Full,
    /// Scalar multiples of the identity.
    Scalars,
    /// Block-diagonal matrices for an ordered partition of k.
    BlockDiagonal(Vec<usize>),
    /// Span of an explicit list of k x k matrices. The identity must lie in
    /// the span and the span must be closed under products; both are checked
    /// at construction.
    Basis(Vec<Mat>),
}

#[derive(Debug, Clone)]
pub struct SubalgebraSpec {
    kind: SubalgebraKind,
    k: usize,
    tolerance: f64,
}

impl SubalgebraSpec {
    pub fn full(k: usize) -> Self {
        SubalgebraSpec { kind: SubalgebraKind::Full, k, tolerance: crate::matrix::DEFAULT_TOL }
    }

    pub fn scalars(k: usize, tolerance: f64) -> Self {
        SubalgebraSpec { kind: SubalgebraKind::Scalars, k, tolerance }
    }

    pub fn block_diagonal(partition: Vec<usize>, tolerance: f64) -> Result<Self> {
        if partition.is_empty() || partition.iter().any(|&p| p == 0) {
            return Err(Error::Parse("block partition must list positive sizes".into()));
        }
        let k = partition.iter().sum();
        Ok(SubalgebraSpec { kind: SubalgebraKind::BlockDiagonal(partition), k, tolerance })
    }

    /// Span of `basis`; fails unless the identity is in the span and the span
    /// is closed under products (within `tolerance` in float mode).
    pub fn basis(basis: Vec<Mat>, tolerance: f64) -> Result<Self> {
        let Some(first) = basis.first() else {
            return Err(Error::Parse("empty subalgebra basis".into()));
        };
        let k = first.rows();
        let mode = first.mode();
        for b in &basis {
            if b.rows() != k || b.cols() != k {
                return Err(Error::dim("basis matrices must share one square size"));
            }
            if b.mode() != mode {
                return Err(Error::ModeMismatch("basis matrices mix modes".into()));
            }
        }
        let spec = SubalgebraSpec { kind: SubalgebraKind::Basis(basis.clone()), k, tolerance };
        if !spec.cell_contains(&Mat::identity(k, mode))? {
            return Err(Error::Parse("identity not in subalgebra span".into()));
        }
        for a in &basis {
            for b in &basis {
                if !spec.cell_contains(&a.mul(b)?)? {
                    return Err(Error::Parse("subalgebra basis not closed under product".into()));
                }
            }
        }
        Ok(spec)
    }

    pub fn k(&self) -> usize { self.k }
    pub fn tolerance(&self) -> f64 { self.tolerance }
    pub fn kind(&self) -> &SubalgebraKind { &self.kind }

    /// Every inner k x k cell of `x` lies in the subalgebra.
    pub fn contains(&self, x: &LayeredMatrix) -> Result<bool> {
        if x.inner() != self.k {
            return Err(Error::dim(format!("inner layer {} vs subalgebra over M_{}", x.inner(), self.k)));
        }
        let k = self.k;
        let mat = x.mat();
        let (rows, cols) = (mat.rows() / k, mat.cols() / k);
        for p in 0..rows {
            for q in 0..cols {
                let cell = mat.block(p * k, (p + 1) * k, q * k, (q + 1) * k);
                if !self.cell_contains(&cell)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn cell_contains(&self, cell: &Mat) -> Result<bool> {
        let k = self.k;
        let scale = 1f64.max(cell.norm_max());
        let near_zero = |s: &Scalar| match s.mode() {
            Mode::Exact => s.is_zero(),
            Mode::Float => s.abs() <= self.tolerance * scale,
        };
        match &self.kind {
            SubalgebraKind::Full => Ok(true),
            SubalgebraKind::Scalars => {
                for i in 0..k {
                    for j in 0..k {
                        if i != j && !near_zero(cell.at(i, j)) {
                            return Ok(false);
                        }
                    }
                    if i > 0 && !near_zero(&cell.at(i, i).sub(cell.at(0, 0))) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            SubalgebraKind::BlockDiagonal(partition) => {
                // owner[i] = index of the diagonal block holding row/col i
                let mut owner = Vec::with_capacity(k);
                for (b, &sz) in partition.iter().enumerate() {
                    owner.extend(std::iter::repeat(b).take(sz));
                }
                for i in 0..k {
                    for j in 0..k {
                        if owner[i] != owner[j] && !near_zero(cell.at(i, j)) {
                            return Ok(false);
                        }
                    }
                }
                Ok(true)
            }
            SubalgebraKind::Basis(basis) => {
                if cell.mode() != basis[0].mode() {
                    return Err(Error::ModeMismatch(
                        "membership query mode differs from basis mode".into(),
                    ));
                }
                // vectorize: cell in span(basis) iff stacking it next to the
                // basis columns does not raise the rank
                let vec_of = |m: &Mat| {
                    Mat::from_fn(k * k, 1, m.mode(), |i, _| m.at(i / k, i % k).clone())
                };
                let mut stacked = vec_of(&basis[0]);
                for b in &basis[1..] {
                    stacked = stacked.hcat(&vec_of(b))?;
                }
                let with_cell = stacked.hcat(&vec_of(cell))?;
                Ok(stacked.rank(self.tolerance) == with_cell.rank(self.tolerance))
            }
        }
    }
}
