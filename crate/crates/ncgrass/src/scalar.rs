//! Scalar arithmetic in two modes: exact Gaussian rationals (pairs of
//! arbitrary-precision rationals) and double-precision complex numbers.
//!
//! Exact arithmetic is closed and lossless under +, -, *, / (nonzero
//! divisor). Float comparisons never test bits; callers go through an
//! explicit tolerance. A matrix is homogeneous in one mode, so mixed-mode
//! scalar arithmetic is a programming error and panics.

use num::bigint::BigInt;
use num::complex::Complex64;
use num::rational::BigRational;
use num::traits::{ToPrimitive, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Exact,
    Float,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Float => "float",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gaussian rational: re + i*im with rational real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRat {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussRat { re, im }
    }

    pub fn from_int(re: i64) -> Self {
        GaussRat::new(BigRational::from_integer(BigInt::from(re)), BigRational::zero())
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        GaussRat::new(
            BigRational::new(BigInt::from(num), BigInt::from(den)),
            BigRational::zero(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        GaussRat::new(self.re.clone(), -self.im.clone())
    }

    /// |z|^2 = re^2 + im^2, exact.
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm_sqr();
        Some(GaussRat::new(&self.re / &n, -&self.im / &n))
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Exact(GaussRat),
    Float(Complex64),
}

impl Scalar {
    pub fn mode(&self) -> Mode {
        match self {
            Scalar::Exact(_) => Mode::Exact,
            Scalar::Float(_) => Mode::Float,
        }
    }

    pub fn zero(mode: Mode) -> Self {
        match mode {
            Mode::Exact => Scalar::Exact(GaussRat::from_int(0)),
            Mode::Float => Scalar::Float(Complex64::new(0.0, 0.0)),
        }
    }

    pub fn one(mode: Mode) -> Self {
        match mode {
            Mode::Exact => Scalar::Exact(GaussRat::from_int(1)),
            Mode::Float => Scalar::Float(Complex64::new(1.0, 0.0)),
        }
    }

    pub fn from_int(v: i64, mode: Mode) -> Self {
        match mode {
            Mode::Exact => Scalar::Exact(GaussRat::from_int(v)),
            Mode::Float => Scalar::Float(Complex64::new(v as f64, 0.0)),
        }
    }

    /// num/den as a real scalar; exact in exact mode, rounded once in float.
    pub fn from_ratio(num: i64, den: i64, mode: Mode) -> Self {
        match mode {
            Mode::Exact => Scalar::Exact(GaussRat::from_ratio(num, den)),
            Mode::Float => Scalar::Float(Complex64::new(num as f64 / den as f64, 0.0)),
        }
    }

    pub fn from_c64(z: Complex64) -> Self {
        Scalar::Float(z)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(g) => g.is_zero(),
            Scalar::Float(z) => z.re == 0.0 && z.im == 0.0,
        }
    }

    /// Modulus as f64. Exact values are converted approximately; use only for
    /// pivot ordering and report output, never for exact-mode decisions.
    pub fn abs(&self) -> f64 {
        match self {
            Scalar::Exact(g) => g.to_c64().norm(),
            Scalar::Float(z) => z.norm(),
        }
    }

    pub fn to_c64(&self) -> Complex64 {
        match self {
            Scalar::Exact(g) => g.to_c64(),
            Scalar::Float(z) => *z,
        }
    }

    /// Deterministic byte encoding for digests: exact values by their
    /// canonical fraction strings, float values by IEEE bit patterns.
    pub fn canonical_bytes(&self, out: &mut Vec<u8>) {
        match self {
            Scalar::Exact(g) => {
                out.push(b'e');
                out.extend_from_slice(rational_string(&g.re).as_bytes());
                out.push(b',');
                out.extend_from_slice(rational_string(&g.im).as_bytes());
                out.push(b';');
            }
            Scalar::Float(z) => {
                out.push(b'f');
                out.extend_from_slice(&z.re.to_bits().to_le_bytes());
                out.extend_from_slice(&z.im.to_bits().to_le_bytes());
            }
        }
    }

    pub fn conj(&self) -> Self {
        match self {
            Scalar::Exact(g) => Scalar::Exact(g.conj()),
            Scalar::Float(z) => Scalar::Float(z.conj()),
        }
    }

    pub fn inv(&self) -> Option<Self> {
        match self {
            Scalar::Exact(g) => g.inv().map(Scalar::Exact),
            Scalar::Float(z) => {
                if z.re == 0.0 && z.im == 0.0 {
                    None
                } else {
                    Some(Scalar::Float(z.inv()))
                }
            }
        }
    }

    pub fn add(&self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => {
                Scalar::Exact(GaussRat::new(&a.re + &b.re, &a.im + &b.im))
            }
            (Scalar::Float(a), Scalar::Float(b)) => Scalar::Float(a + b),
            _ => panic!("mode mismatch in scalar arithmetic"),
        }
    }

    pub fn sub(&self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => {
                Scalar::Exact(GaussRat::new(&a.re - &b.re, &a.im - &b.im))
            }
            (Scalar::Float(a), Scalar::Float(b)) => Scalar::Float(a - b),
            _ => panic!("mode mismatch in scalar arithmetic"),
        }
    }

    pub fn mul(&self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(GaussRat::new(
                &a.re * &b.re - &a.im * &b.im,
                &a.re * &b.im + &a.im * &b.re,
            )),
            (Scalar::Float(a), Scalar::Float(b)) => Scalar::Float(a * b),
            _ => panic!("mode mismatch in scalar arithmetic"),
        }
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Exact(a) => Scalar::Exact(GaussRat::new(-a.re.clone(), -a.im.clone())),
            Scalar::Float(z) => Scalar::Float(-z),
        }
    }

    /// self / rhs; None when rhs is zero.
    pub fn div(&self, rhs: &Scalar) -> Option<Scalar> {
        rhs.inv().map(|r| self.mul(&r))
    }
}

impl std::fmt::Display for Scalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scalar::Exact(g) => write!(f, "{}+{}i", g.re, g.im),
            Scalar::Float(z) => write!(f, "{}+{}i", z.re, z.im),
        }
    }
}

/// Parse the exact-mode component encoding: "p" or "p/q" with BigInt parts.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            Some(BigRational::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().ok()?;
            Some(BigRational::from_integer(p))
        }
    }
}

/// Emit a rational as "p/q" (always with the denominator, reduced, q > 0).
pub fn rational_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_field_ops_are_lossless() {
        let a = Scalar::Exact(GaussRat::new(
            BigRational::new(BigInt::from(1), BigInt::from(3)),
            BigRational::new(BigInt::from(2), BigInt::from(7)),
        ));
        let b = Scalar::Exact(GaussRat::from_ratio(-5, 11));
        let prod = a.mul(&b);
        let back = prod.div(&b).unwrap();
        assert_eq!(back, a);
        let s = a.add(&b);
        assert_eq!(s.sub(&b), a);
    }

    #[test]
    fn gaussian_inverse() {
        // (1+2i)^-1 = (1-2i)/5
        let z = Scalar::Exact(GaussRat::new(
            BigRational::from_integer(BigInt::from(1)),
            BigRational::from_integer(BigInt::from(2)),
        ));
        let w = z.inv().unwrap();
        assert_eq!(z.mul(&w), Scalar::one(Mode::Exact));
        assert!(Scalar::zero(Mode::Exact).inv().is_none());
    }

    #[test]
    fn rational_string_round_trip() {
        for s in ["3/4", "-2/5", "7", "-7", "0"] {
            let r = parse_rational(s).unwrap();
            let emitted = rational_string(&r);
            assert_eq!(parse_rational(&emitted ).unwrap(), r);
            assert!(emitted.contains('/'));
        }
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational("x").is_none());
    }

    #[test]
    fn float_ops_match_complex() {
        let a = Scalar::Float(Complex64::new(1.5, -2.0));
        let b = Scalar::Float(Complex64::new(-0.25, 3.0));
        assert_eq!(a.mul(&b).to_c64(), Complex64::new(1.5, -2.0) * Complex64::new(-0.25, 3.0));
        assert_eq!(a.conj().to_c64(), Complex64::new(1.5, 2.0));
    }

    #[test]
    #[should_panic(expected = "mode mismatch")]
    fn mixed_mode_panics() {
        let a = Scalar::one(Mode::Exact);
        let b = Scalar::one(Mode::Float);
        let _ = a.add(&b);
    }
}
