//! Seeded generators for classes, coefficients, and pairings.
//!
//! Every generator draws from one ChaCha8 stream so that a (seed, call
//! sequence) pair reproduces its outputs bit for bit. Exact-mode entries
//! are small integers to keep rational arithmetic flat; float entries are
//! complex with parts in (-1, 1).

use crate::error::{Error, Result};
use crate::flag::{FlagPoint, FlagSignature};
use crate::grassmann::{affine_embed, GrassPoint};
use crate::matrix::{LayeredMatrix, Mat};
use crate::resolvent::{is_transversal, ProjectivePoint};
use crate::scalar::{Mode, Scalar};
use crate::subalgebra::SubalgebraSpec;
use num::complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Weyl-increment constant for deriving independent per-case seeds.
pub const SEED_STRIDE: u64 = 0x9E3779B97F4A7C15;

/// Seed of case i under a master seed; cases are mutually independent and
/// individually replayable.
pub fn case_seed(master: u64, i: u64) -> u64 {
    master ^ i.wrapping_mul(SEED_STRIDE)
}

pub struct Sampler {
    rng: ChaCha8Rng,
    mode: Mode,
}

impl Sampler {
    pub fn new(seed: u64, mode: Mode) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), mode }
    }

    pub fn for_case(master: u64, i: u64, mode: Mode) -> Self {
        Sampler::new(case_seed(master, i), mode)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Uniform choice in 1..=hi.
    pub fn size(&mut self, hi: usize) -> usize {
        self.rng.random_range(1..=hi)
    }

    /// Uniform index in 0..n.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn scalar(&mut self) -> Scalar {
        match self.mode {
            Mode::Exact => Scalar::from_int(self.rng.random_range(-2..=2), Mode::Exact),
            Mode::Float => Scalar::from_c64(Complex64::new(
                self.rng.random_range(-1.0..1.0),
                self.rng.random_range(-1.0..1.0),
            )),
        }
    }

    pub fn mat(&mut self, rows: usize, cols: usize) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.scalar());
        }
        Mat::from_entries(rows, cols, self.mode, data).unwrap()
    }

    /// Random invertible square matrix; rejection with a diagonal boost as
    /// the deterministic fallback.
    pub fn invertible_mat(&mut self, n: usize, tol: f64) -> Mat {
        for _ in 0..64 {
            let m = self.mat(n, n);
            let lay = LayeredMatrix::new(m.clone(), 1, 1, n, n, 1).unwrap();
            if lay.invert(tol).map(|r| r.invertible).unwrap_or(false) {
                return m;
            }
        }
        let mut m = self.mat(n, n);
        let boost = Scalar::from_int(3, self.mode);
        for i in 0..n {
            m.set(i, i, m.at(i, i).add(&boost));
        }
        m
    }

    /// 1x1-outer coefficient with the given middle shape.
    pub fn middle(&mut self, n: usize, ncols: usize, k: usize) -> LayeredMatrix {
        LayeredMatrix::new(self.mat(n * k, ncols * k), 1, 1, n, ncols, k).unwrap()
    }

    /// Affine coordinate: (m - d) x d outer, square middle of side n.
    pub fn coordinate(&mut self, d: usize, m: usize, n: usize, k: usize) -> LayeredMatrix {
        LayeredMatrix::new(self.mat((m - d) * n * k, d * n * k), m - d, d, n, n, k).unwrap()
    }

    /// Random invertible representative: m x m outer, n middle, k inner.
    pub fn invertible_rep(&mut self, m: usize, n: usize, k: usize, tol: f64) -> LayeredMatrix {
        let side = m * n * k;
        let scalar_mat = self.invertible_mat(side, tol);
        LayeredMatrix::from_square(scalar_mat, m, n, k).unwrap()
    }

    pub fn grass_point(&mut self, d: usize, m: usize, n: usize, k: usize, tol: f64) -> GrassPoint {
        loop {
            let rep = self.invertible_rep(m, n, k, tol);
            if let Ok(p) = GrassPoint::new(d, m, rep, tol) {
                return p;
            }
        }
    }

    pub fn affine_point(&mut self, d: usize, m: usize, n: usize, k: usize) -> GrassPoint {
        let x = self.coordinate(d, m, n, k);
        affine_embed(&x, d, m).unwrap()
    }

    /// Element of the structure group at (d; m): lower block triangular in
    /// the (m - d, d) outer split with invertible diagonal blocks.
    pub fn group_element(&mut self, d: usize, m: usize, n: usize, k: usize, tol: f64) -> LayeredMatrix {
        let cell = n * k;
        let split = (m - d) * cell;
        let side = m * cell;
        let mut g = Mat::zeros(side, side, self.mode);
        g.set_block(0, 0, &self.invertible_mat(split, tol));
        g.set_block(split, split, &self.invertible_mat(side - split, tol));
        g.set_block(split, 0, &self.mat(side - split, split));
        LayeredMatrix::from_square(g, m, n, k).unwrap()
    }

    /// Element of the flag structure group: additionally block lower
    /// triangular inside the trailing d_K x d_K corner, with the corner
    /// partition read from the top as (d_K - d_{K-1}, ..., d_2 - d_1, d_1).
    pub fn flag_group_element(
        &mut self,
        sig: &FlagSignature,
        n: usize,
        k: usize,
        tol: f64,
    ) -> LayeredMatrix {
        let m = sig.m();
        let dims = sig.dims();
        let top = *dims.last().unwrap();
        let cell = n * k;
        let split = (m - top) * cell;
        let side = m * cell;
        let mut g = Mat::zeros(side, side, self.mode);
        g.set_block(0, 0, &self.invertible_mat(split, tol));
        g.set_block(split, 0, &self.mat(side - split, split));
        // corner partition sizes from the top
        let mut sizes = Vec::with_capacity(dims.len());
        for w in dims.windows(2).rev() {
            sizes.push(w[1] - w[0]);
        }
        sizes.push(dims[0]);
        let mut r0 = split;
        for (bi, &rows) in sizes.iter().enumerate() {
            let block_rows = rows * cell;
            g.set_block(r0, r0, &self.invertible_mat(block_rows, tol));
            // strictly lower blocks within the corner
            let mut c0 = split;
            for &cols in &sizes[..bi] {
                g.set_block(r0, c0, &self.mat(block_rows, cols * cell));
                c0 += cols * cell;
            }
            r0 += block_rows;
        }
        LayeredMatrix::from_square(g, m, n, k).unwrap()
    }

    pub fn flag_point(&mut self, sig: &FlagSignature, n: usize, k: usize, tol: f64) -> FlagPoint {
        loop {
            let rep = self.invertible_rep(sig.m(), n, k, tol);
            if let Ok(p) = FlagPoint::new(sig.clone(), rep, tol) {
                return p;
            }
        }
    }

    /// Level-1 class at the position complementary to (d; m), for pairing
    /// with classes at (d; m).
    pub fn projective_point(&mut self, d: usize, m: usize, k: usize, tol: f64) -> ProjectivePoint {
        ProjectivePoint::new(self.grass_point(m - d, m, 1, k, tol)).unwrap()
    }

    /// Level-n class at (d; m) transversal to pi; rejection-sampled, erring
    /// after the attempt budget instead of looping forever.
    pub fn point_in_resolvent_set(
        &mut self,
        pi: &ProjectivePoint,
        n: usize,
        tol: f64,
    ) -> Result<GrassPoint> {
        let d = pi.pairs_with_d();
        let m = pi.m();
        let k = pi.k();
        let spec = SubalgebraSpec::full(k);
        for _ in 0..200 {
            let sigma = self.grass_point(d, m, n, k, tol);
            if is_transversal(pi, &sigma, &spec, tol)? {
                return Ok(sigma);
            }
        }
        Err(Error::NotTransversal)
    }

    /// Float contraction with largest singular value below the given bound.
    pub fn pure_contraction(&mut self, k: usize, bound: f64) -> Mat {
        assert_eq!(self.mode, Mode::Float, "contractions are float-mode objects");
        let raw = self.mat(k, k);
        let (_, smax) = raw.sv_extremes();
        let target = self.rng.random_range(0.1..bound);
        raw.scale(&Scalar::from_c64(Complex64::new(
            if smax > 0.0 { target / smax } else { 0.0 },
            0.0,
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flag::flag_equiv;
    use crate::grassmann::gr_equiv;
    use crate::matrix::DEFAULT_TOL;

    #[test]
    fn same_seed_reproduces_the_stream() {
        let mut a = Sampler::new(7, Mode::Exact);
        let mut b = Sampler::new(7, Mode::Exact);
        for _ in 0..5 {
            assert_eq!(a.mat(3, 3), b.mat(3, 3));
        }
        assert_ne!(case_seed(7, 1), case_seed(7, 2));
    }

    #[test]
    fn group_elements_preserve_classes() {
        let mut s = Sampler::new(11, Mode::Exact);
        let p = s.grass_point(1, 3, 2, 1, DEFAULT_TOL);
        let g = s.group_element(1, 3, 2, 1, DEFAULT_TOL);
        let moved = GrassPoint::new(1, 3, p.rep().multiply(&g).unwrap(), DEFAULT_TOL).unwrap();
        assert!(gr_equiv(&p, &moved, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn flag_group_elements_preserve_flags() {
        let mut s = Sampler::new(13, Mode::Exact);
        let sig = FlagSignature::new(vec![1, 2], 3).unwrap();
        let p = s.flag_point(&sig, 1, 1, DEFAULT_TOL);
        let g = s.flag_group_element(&sig, 1, 1, DEFAULT_TOL);
        let moved = FlagPoint::new(sig, p.rep().multiply(&g).unwrap(), DEFAULT_TOL).unwrap();
        assert!(flag_equiv(&p, &moved, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn resolvent_set_sampling_lands_in_the_set() {
        let mut s = Sampler::new(17, Mode::Exact);
        let pi = s.projective_point(1, 3, 1, DEFAULT_TOL);
        let sigma = s.point_in_resolvent_set(&pi, 2, DEFAULT_TOL).unwrap();
        assert!(is_transversal(&pi, &sigma, &SubalgebraSpec::full(1), DEFAULT_TOL).unwrap());
    }

    #[test]
    fn contractions_are_pure() {
        let mut s = Sampler::new(19, Mode::Float);
        for k in 1..=3 {
            let a = s.pure_contraction(k, 0.9);
            let (_, smax) = a.sv_extremes();
            assert!(smax < 0.9 + 1e-12);
        }
    }
}
