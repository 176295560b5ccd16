//! Flag manifolds: chains of Grassmannian positions sharing one frame.
//!
//! A flag signature is a strictly increasing list d_1 < ... < d_K inside
//! [1, m-1]. A flag point is an invertible frame taken up to the subgroup of
//! H whose bottom-right d_K x d_K outer corner is block lower triangular for
//! the partition (d_K - d_{K-1}, ..., d_2 - d_1, d_1) read from the top.
//! Forgetting all but one level (`flag_project`) lands in the Grassmannian
//! at (d_j; m) with the same frame.

use crate::error::{Error, Result};
use crate::grassmann::GrassPoint;
use crate::matrix::{LayeredMatrix, Mat};
use crate::scalar::Mode;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlagSignature {
    dims: Vec<usize>,
    m: usize,
}

impl FlagSignature {
    pub fn new(dims: Vec<usize>, m: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::SignatureMismatch("empty flag signature".into()));
        }
        for w in dims.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::SignatureMismatch(format!(
                    "dimensions must increase strictly, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if dims[0] == 0 || *dims.last().unwrap() >= m {
            return Err(Error::SignatureMismatch(format!(
                "dimensions must lie in [1, {}], got {:?}",
                m - 1,
                dims
            )));
        }
        Ok(FlagSignature { dims, m })
    }

    pub fn dims(&self) -> &[usize] { &self.dims }
    pub fn m(&self) -> usize { self.m }
    /// Number of levels K.
    pub fn depth(&self) -> usize { self.dims.len() }
    /// Largest dimension d_K.
    pub fn top(&self) -> usize { *self.dims.last().unwrap() }
    /// d_j for 1-based j.
    pub fn dim(&self, j: usize) -> Result<usize> {
        self.dims
            .get(j.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::IndexOutOfRange(format!("flag level {j} of depth {}", self.depth())))
    }

    /// Complementary signature (m - d_K, ..., m - d_1), strictly increasing.
    pub fn dual(&self) -> FlagSignature {
        let dims = self.dims.iter().rev().map(|&d| self.m - d).collect();
        FlagSignature { dims, m: self.m }
    }

    /// Corner partition sizes read from the top:
    /// (d_K - d_{K-1}, ..., d_2 - d_1, d_1).
    fn corner_partition(&self) -> Vec<usize> {
        let k = self.depth();
        let mut sizes = Vec::with_capacity(k);
        for j in (1..=k).rev() {
            let lower = if j >= 2 { self.dims[j - 2] } else { 0 };
            sizes.push(self.dims[j - 1] - lower);
        }
        sizes
    }
}

#[derive(Debug, Clone)]
pub struct FlagPoint {
    sig: FlagSignature,
    rep: LayeredMatrix,
}

impl FlagPoint {
    pub fn new(sig: FlagSignature, rep: LayeredMatrix, tol: f64) -> Result<Self> {
        if !rep.is_square() || rep.outer_rows() != sig.m() {
            return Err(Error::dim(format!(
                "flag frame must be outer {0}x{0} square",
                sig.m()
            )));
        }
        if !rep.invert(tol)?.invertible {
            return Err(Error::NotInvertible("flag frame".into()));
        }
        Ok(FlagPoint { sig, rep })
    }

    pub fn sig(&self) -> &FlagSignature { &self.sig }
    pub fn m(&self) -> usize { self.sig.m() }
    pub fn n(&self) -> usize { self.rep.mid_rows() }
    pub fn k(&self) -> usize { self.rep.inner() }
    pub fn mode(&self) -> Mode { self.rep.mode() }
    pub fn rep(&self) -> &LayeredMatrix { &self.rep }
}

/// True iff the frames differ by a group element: Gamma = rep(psi)^-1
/// rep(phi) must have a zero (m-d_K) x d_K top-right outer block, a block
/// lower triangular bottom-right corner for the signature's partition, and
/// invertible diagonal blocks. Zero tests follow the crate convention
/// (exact, or entrywise <= tol * max(1, |Gamma|)).
pub fn flag_equiv(phi: &FlagPoint, psi: &FlagPoint, tol: f64) -> Result<bool> {
    if phi.sig != psi.sig {
        return Err(Error::SignatureMismatch(format!(
            "{:?} vs {:?}",
            phi.sig.dims(),
            psi.sig.dims()
        )));
    }
    if phi.n() != psi.n() || phi.k() != psi.k() {
        return Err(Error::dim("frames live over different layer sizes"));
    }
    let psi_inv = psi
        .rep
        .invert(tol)?
        .inverse
        .ok_or_else(|| Error::NotInvertible("flag frame".into()))?;
    let gamma = psi_inv.multiply(&phi.rep)?;
    let m = phi.m();
    let dk = phi.sig.top();
    let scale = 1f64.max(gamma.norm_max());
    for i in 0..m - dk {
        for j in m - dk..m {
            if !gamma.outer_block(i, j).is_zero_within(tol, scale) {
                return Ok(false);
            }
        }
    }
    // corner blocks above the partition diagonal must vanish too
    let partition = phi.sig.corner_partition();
    let mut starts = vec![m - dk];
    for s in &partition {
        starts.push(starts.last().unwrap() + s);
    }
    for a in 0..partition.len() {
        for b in a + 1..partition.len() {
            for i in starts[a]..starts[a + 1] {
                for j in starts[b]..starts[b + 1] {
                    if !gamma.outer_block(i, j).is_zero_within(tol, scale) {
                        return Ok(false);
                    }
                }
            }
        }
    }
    // diagonal blocks: the top-left (m - d_K) block and each partition block
    let (n, k) = (phi.n(), phi.k());
    let mut diag_ranges = vec![(0, m - dk)];
    for a in 0..partition.len() {
        diag_ranges.push((starts[a], starts[a + 1]));
    }
    for (lo, hi) in diag_ranges {
        if lo == hi {
            continue;
        }
        let mut diag = LayeredMatrix::zeros(hi - lo, hi - lo, n, n, k, phi.mode());
        for i in lo..hi {
            for j in lo..hi {
                diag.set_outer_block(i - lo, j - lo, &gamma.outer_block(i, j));
            }
        }
        if !diag.invert(tol)?.invertible {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Forget all levels but the j-th (1-based): the Grassmannian class at
/// (d_j; m) of the same frame.
pub fn flag_project(phi: &FlagPoint, j: usize, tol: f64) -> Result<GrassPoint> {
    let dj = phi.sig.dim(j)?;
    GrassPoint::new(dj, phi.m(), phi.rep.clone(), tol)
}

/// Resolve a flag-level differentiation slot: level j (1-based) with
/// u in [m - d_j] and v in [d_j - d_{j-1}] projects both flags to (d_j; m)
/// and lands on the Grassmannian slot (u, d_{j-1} + v).
pub fn flag_dd_slot(
    phi: &FlagPoint,
    phip: &FlagPoint,
    j: usize,
    u: usize,
    v: usize,
    tol: f64,
) -> Result<(GrassPoint, GrassPoint, usize)> {
    if phi.sig != phip.sig {
        return Err(Error::SignatureMismatch(format!(
            "{:?} vs {:?}",
            phi.sig.dims(),
            phip.sig.dims()
        )));
    }
    let dj = phi.sig.dim(j)?;
    let dprev = if j >= 2 { phi.sig.dim(j - 1)? } else { 0 };
    let m = phi.m();
    if u == 0 || u > m - dj || v == 0 || v > dj - dprev {
        return Err(Error::IndexOutOfRange(format!(
            "flag slot (u, v) = ({u}, {v}) at level {j} of {:?}",
            phi.sig.dims()
        )));
    }
    Ok((flag_project(phi, j, tol)?, flag_project(phip, j, tol)?, dprev + v))
}

/// Affine chart of the flag manifold. Coordinates are a lower triangular
/// ragged array xs with xs[i-1][j-1] = X(i, j) for 1 <= j <= i <= K, where
/// X(i, j) has outer shape (d_{i+1} - d_i) x (d_j - d_{j-1}) with d_0 = 0 and
/// d_{K+1} = m. Row blocks from the top have sizes (d_1, d_2 - d_1, ...,
/// m - d_K); column blocks from the left have the reversed sizes. Row block
/// t carries an identity in the t-th column block from the right, and X(i, j)
/// sits in row block i + 1, column block j from the right. With K = 1 this
/// is the Grassmannian chart.
pub fn flag_affine_embed(xs: &[Vec<LayeredMatrix>], sig: &FlagSignature) -> Result<FlagPoint> {
    let kdepth = sig.depth();
    let m = sig.m();
    if xs.len() != kdepth {
        return Err(Error::dim(format!("expected {kdepth} coordinate rows, got {}", xs.len())));
    }
    let Some(first) = xs.first().and_then(|r| r.first()) else {
        return Err(Error::dim("no coordinates given"));
    };
    let (n, k, mode) = (first.mid_rows(), first.inner(), first.mode());

    // block sizes: rows from the top, columns from the right share them
    let mut sizes = Vec::with_capacity(kdepth + 1);
    sizes.push(sig.dims()[0]);
    for i in 1..kdepth {
        sizes.push(sig.dims()[i] - sig.dims()[i - 1]);
    }
    sizes.push(m - sig.top());
    let row_start: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &s| {
            let v = *acc;
            *acc += s;
            Some(v)
        })
        .collect();
    // column block t from the right starts at m - (sizes[0] + ... + sizes[t-1])
    let col_start_from_right = |t: usize| -> usize {
        let total: usize = sizes[..t].iter().sum();
        m - total
    };

    let cell = n * k;
    let mut frame = LayeredMatrix::zeros(m, m, n, n, k, mode);
    let eye = Mat::identity(cell, mode);
    for t in 1..=kdepth + 1 {
        let r0 = row_start[t - 1];
        let c0 = col_start_from_right(t);
        for off in 0..sizes[t - 1] {
            frame.set_outer_block(r0 + off, c0 + off, &eye);
        }
    }
    for i in 1..=kdepth {
        let row = &xs[i - 1];
        if row.len() != i {
            return Err(Error::dim(format!("coordinate row {i} must hold {i} blocks")));
        }
        for j in 1..=i {
            let x = &row[j - 1];
            let want_r = sizes[i]; // d_{i+1} - d_i
            let want_c = sizes[j - 1]; // d_j - d_{j-1}
            if x.outer_rows() != want_r
                || x.outer_cols() != want_c
                || x.mid_rows() != n
                || x.mid_cols() != n
                || x.inner() != k
            {
                return Err(Error::dim(format!(
                    "coordinate ({i}, {j}) must be outer {want_r}x{want_c} over middle {n}, inner {k}"
                )));
            }
            let r0 = row_start[i];
            let c0 = col_start_from_right(j);
            for a in 0..want_r {
                for b in 0..want_c {
                    frame.set_outer_block(r0 + a, c0 + b, &x.outer_block(a, b));
                }
            }
        }
    }
    // unitriangular against the identity anti-diagonal: invertible always
    Ok(FlagPoint { sig: sig.clone(), rep: frame })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{affine_embed, gr_equiv};
    use crate::matrix::DEFAULT_TOL;
    use crate::scalar::Scalar;

    fn lay1(v: i64) -> LayeredMatrix {
        LayeredMatrix::new(Mat::from_i64(&[&[v]], Mode::Exact), 1, 1, 1, 1, 1).unwrap()
    }

    fn flag12(x11: i64, x21: i64, x22: i64) -> FlagPoint {
        let sig = FlagSignature::new(vec![1, 2], 3).unwrap();
        flag_affine_embed(&[vec![lay1(x11)], vec![lay1(x21), lay1(x22)]], &sig).unwrap()
    }

    #[test]
    fn signature_validation() {
        assert!(FlagSignature::new(vec![1, 2], 3).is_ok());
        assert!(FlagSignature::new(vec![2, 1], 3).is_err());
        assert!(FlagSignature::new(vec![1, 1], 3).is_err());
        assert!(FlagSignature::new(vec![0], 3).is_err());
        assert!(FlagSignature::new(vec![3], 3).is_err());
        assert!(FlagSignature::new(vec![], 3).is_err());

        let sig = FlagSignature::new(vec![1, 3], 4).unwrap();
        assert_eq!(sig.dual().dims(), &[1, 3]);
        let sig = FlagSignature::new(vec![1, 2], 4).unwrap();
        assert_eq!(sig.dual().dims(), &[2, 3]);
    }

    #[test]
    fn chart_layout_at_depth_two() {
        // m = 3, d = (1, 2), n = k = 1: frame rows are
        // [0 0 1], [0 1 x11], [1 x22 x21]
        let p = flag12(4, 5, 6);
        let expect = Mat::from_i64(&[&[0, 0, 1], &[0, 1, 4], &[1, 6, 5]], Mode::Exact);
        assert_eq!(p.rep().mat(), &expect);
    }

    #[test]
    fn depth_one_chart_is_the_grassmannian_chart() {
        let sig = FlagSignature::new(vec![1], 2).unwrap();
        let p = flag_affine_embed(&[vec![lay1(7)]], &sig).unwrap();
        let q = affine_embed(&lay1(7), 1, 2).unwrap();
        assert_eq!(p.rep().mat(), q.rep().mat());
    }

    #[test]
    fn equiv_accepts_group_and_rejects_uppers() {
        let p = flag12(4, 5, 6);
        // lower triangular invertible scalar frame acts on the right
        let gamma = LayeredMatrix::from_square(
            Mat::from_i64(&[&[2, 0, 0], &[3, -1, 0], &[7, 4, 5]], Mode::Exact),
            3,
            1,
            1,
        )
        .unwrap();
        let moved = FlagPoint::new(
            p.sig().clone(),
            p.rep().multiply(&gamma).unwrap(),
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(flag_equiv(&p, &moved, DEFAULT_TOL).unwrap());
        assert!(flag_equiv(&moved, &p, DEFAULT_TOL).unwrap());

        // mixing the two flag levels upward leaves the coarse class alone
        // but breaks the flag class
        let upper = LayeredMatrix::from_square(
            Mat::from_i64(&[&[1, 0, 0], &[0, 1, 1], &[0, 0, 1]], Mode::Exact),
            3,
            1,
            1,
        )
        .unwrap();
        let mixed = FlagPoint::new(
            p.sig().clone(),
            p.rep().multiply(&upper).unwrap(),
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(!flag_equiv(&p, &mixed, DEFAULT_TOL).unwrap());
        let coarse_p = flag_project(&p, 2, DEFAULT_TOL).unwrap();
        let coarse_m = flag_project(&mixed, 2, DEFAULT_TOL).unwrap();
        assert!(gr_equiv(&coarse_p, &coarse_m, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn equiv_separates_distinct_charts() {
        assert!(!flag_equiv(&flag12(4, 5, 6), &flag12(3, 5, 6), DEFAULT_TOL).unwrap());
        assert!(!flag_equiv(&flag12(4, 5, 6), &flag12(4, 5, 7), DEFAULT_TOL).unwrap());
        assert!(flag_equiv(&flag12(4, 5, 6), &flag12(4, 5, 6), DEFAULT_TOL).unwrap());
    }

    #[test]
    fn projections_of_equivalent_flags_are_equivalent() {
        let p = flag12(4, 5, 6);
        let gamma = LayeredMatrix::from_square(
            Mat::from_i64(&[&[1, 0, 0], &[2, 3, 0], &[-1, 1, 2]], Mode::Exact),
            3,
            1,
            1,
        )
        .unwrap();
        let q = FlagPoint::new(
            p.sig().clone(),
            p.rep().multiply(&gamma).unwrap(),
            DEFAULT_TOL,
        )
        .unwrap();
        for j in 1..=2 {
            let a = flag_project(&p, j, DEFAULT_TOL).unwrap();
            let b = flag_project(&q, j, DEFAULT_TOL).unwrap();
            assert_eq!(a.d(), j);
            assert!(gr_equiv(&a, &b, DEFAULT_TOL).unwrap());
        }
        assert!(flag_project(&p, 3, DEFAULT_TOL).is_err());
    }

    #[test]
    fn uneven_signature_chart_shapes() {
        // m = 4, d = (1, 3): row blocks (1, 2, 1) from the top, X(1,1) is
        // outer 2x1, X(2,1) is 1x1, X(2,2) is 1x2
        let sig = FlagSignature::new(vec![1, 3], 4).unwrap();
        let x11 = LayeredMatrix::new(
            Mat::from_fn(2, 1, Mode::Exact, |i, _| Scalar::from_int([2, 3][i], Mode::Exact)),
            2,
            1,
            1,
            1,
            1,
        )
        .unwrap();
        let x21 = lay1(5);
        let x22 = LayeredMatrix::new(
            Mat::from_fn(1, 2, Mode::Exact, |_, j| Scalar::from_int([6, 7][j], Mode::Exact)),
            1,
            2,
            1,
            1,
            1,
        )
        .unwrap();
        let p = flag_affine_embed(&[vec![x11], vec![x21, x22]], &sig).unwrap();
        let expect = Mat::from_i64(
            &[
                &[0, 0, 0, 1],
                &[0, 1, 0, 2],
                &[0, 0, 1, 3],
                &[1, 6, 7, 5],
            ],
            Mode::Exact,
        );
        assert_eq!(p.rep().mat(), &expect);
        assert_eq!(flag_project(&p, 1, DEFAULT_TOL).unwrap().d(), 1);
        assert_eq!(flag_project(&p, 2, DEFAULT_TOL).unwrap().d(), 3);
    }
}
