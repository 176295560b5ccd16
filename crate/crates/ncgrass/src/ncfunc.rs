//! Functions of Grassmannian classes and their difference-differential
//! calculus.
//!
//! A handle bundles an evaluator (class to 1x1-outer value), a domain
//! predicate, the position (d; m), and the inner sizes of source and target
//! coefficients. The structural laws a graded function must satisfy, direct
//! sums, similarity, intertwining, are checked by residual; the first-order
//! operator `dd_apply` reads the off-diagonal block of the value at a pinch,
//! rescaling the coefficient down a ladder until the pinch enters the domain.

use crate::error::{Error, Result};
use crate::flag::flag_dd_slot;
use crate::grassmann::{pinch, shift_act, similarity, GrassPoint};
use crate::matrix::{content_digest, scalar_similarity_lift, LayeredMatrix, Mat};
use crate::scalar::{Mode, Scalar};
use crate::subalgebra::SubalgebraSpec;
use std::sync::Arc;

pub type Evaluator = Arc<dyn Fn(&GrassPoint) -> Result<LayeredMatrix> + Send + Sync>;
pub type DomainTest = Arc<dyn Fn(&GrassPoint) -> Result<bool> + Send + Sync>;

/// Membership test for a set of classes, together with the claim that the
/// set is closed under interleaved direct sums. The claim is what the
/// calculus relies on; property tests sample it.
#[derive(Clone)]
pub struct DomainPredicate {
    test: DomainTest,
    closed_under_direct_sum: bool,
}

impl DomainPredicate {
    pub fn new(test: DomainTest, closed_under_direct_sum: bool) -> Self {
        DomainPredicate { test, closed_under_direct_sum }
    }

    pub fn contains(&self, sigma: &GrassPoint) -> Result<bool> {
        (self.test)(sigma)
    }

    pub fn claims_closure_under_direct_sum(&self) -> bool {
        self.closed_under_direct_sum
    }
}

/// A function of classes at one position (d; m), with coefficients read from
/// M_{k_source} and values written over M_{k_target}.
#[derive(Clone)]
pub struct NcFunctionHandle {
    d: usize,
    m: usize,
    k_source: usize,
    k_target: usize,
    evaluator: Evaluator,
    domain: DomainPredicate,
    source_spec: SubalgebraSpec,
    extended: bool,
}

impl NcFunctionHandle {
    pub fn new(
        d: usize,
        m: usize,
        k_source: usize,
        k_target: usize,
        domain: DomainPredicate,
        evaluator: Evaluator,
    ) -> Result<Self> {
        if d == 0 || d >= m {
            return Err(Error::IndexOutOfRange(format!("position (d; m) = ({d}; {m})")));
        }
        Ok(NcFunctionHandle {
            d,
            m,
            k_source,
            k_target,
            evaluator,
            domain,
            source_spec: SubalgebraSpec::full(k_source),
            extended: false,
        })
    }

    /// Restrict admissible first-order coefficients to a subalgebra.
    pub fn with_source_spec(mut self, spec: SubalgebraSpec) -> Result<Self> {
        if spec.k() != self.k_source {
            return Err(Error::dim("source subalgebra inner size differs"));
        }
        self.source_spec = spec;
        Ok(self)
    }

    pub fn d(&self) -> usize { self.d }
    pub fn m(&self) -> usize { self.m }
    pub fn k_source(&self) -> usize { self.k_source }
    pub fn k_target(&self) -> usize { self.k_target }
    pub fn source_spec(&self) -> &SubalgebraSpec { &self.source_spec }
    pub fn is_extended(&self) -> bool { self.extended }
    pub fn domain(&self) -> &DomainPredicate { &self.domain }

    pub fn in_domain(&self, sigma: &GrassPoint) -> Result<bool> {
        if sigma.d() != self.d || sigma.m() != self.m || sigma.k() != self.k_source {
            return Ok(false);
        }
        self.domain.contains(sigma)
    }

    /// Evaluate on the stored domain. An extended handle answers on the
    /// original domain and asks for a witness elsewhere.
    pub fn evaluate(&self, sigma: &GrassPoint) -> Result<LayeredMatrix> {
        if self.in_domain(sigma)? {
            let value = (self.evaluator)(sigma)?;
            self.check_value_shape(sigma, &value)?;
            return Ok(value);
        }
        if self.extended {
            Err(Error::WitnessRequired)
        } else {
            Err(Error::DomainError("class outside the stored domain".into()))
        }
    }

    /// Evaluate the envelope extension at tau, certified by a similarity
    /// witness: s moves sigma (inside the original domain) onto tau's class,
    /// and the value is s f(sigma) s^-1 at the target inner size.
    pub fn evaluate_with_witness(
        &self,
        tau: &GrassPoint,
        s: &Mat,
        sigma: &GrassPoint,
        tol: f64,
    ) -> Result<LayeredMatrix> {
        if !self.extended {
            return self.evaluate(tau);
        }
        if !self.in_domain(sigma)? {
            return Err(Error::DomainError("witness class outside the stored domain".into()));
        }
        let moved = similarity(s, sigma, tol)?;
        if !crate::grassmann::gr_equiv(&moved, tau, tol)? {
            return Err(Error::DomainError("witness does not reach the class".into()));
        }
        let value = (self.evaluator)(sigma)?;
        self.check_value_shape(sigma, &value)?;
        conjugate_value(&value, s, self.k_target, tol)
    }

    fn check_value_shape(&self, sigma: &GrassPoint, value: &LayeredMatrix) -> Result<()> {
        let n = sigma.n();
        if (value.outer_rows(), value.outer_cols()) != (1, 1)
            || value.mid_rows() != n
            || value.mid_cols() != n
            || value.inner() != self.k_target
        {
            return Err(Error::StructureError(format!(
                "value must be 1x1 outer, middle {n}x{n}, inner {}",
                self.k_target
            )));
        }
        Ok(())
    }
}

/// (s (x) I_k) V (s^-1 (x) I_k) for a 1x1-outer value V over middle size n.
fn conjugate_value(value: &LayeredMatrix, s: &Mat, k: usize, tol: f64) -> Result<LayeredMatrix> {
    let lift = scalar_similarity_lift(s, 1, k, tol)?;
    let inv = lift
        .invert(tol)?
        .inverse
        .ok_or_else(|| Error::NotInvertible("similarity factor".into()))?;
    lift.multiply(value)?.multiply(&inv)
}

/// Return the envelope extension: same evaluator and domain, but evaluation
/// outside the original domain demands a similarity witness. On the original
/// domain the extension restricts to the handle itself.
pub fn envelope_extend(f: &NcFunctionHandle) -> NcFunctionHandle {
    let mut g = f.clone();
    g.extended = true;
    g
}

// ----------------------------------------------------------------- checks

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    /// The hypothesis of the law failed, so the law says nothing here.
    Vacuous,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Vacuous => "vacuous",
        }
    }
}

/// Record of one structural check, digest-identified for replay.
#[derive(Debug, Clone)]
pub struct CheckVerdict {
    pub check: &'static str,
    pub inputs_digest: String,
    pub verdict: Verdict,
    pub residual: Option<f64>,
    pub seed: Option<u64>,
}

fn digest(parts: &[&LayeredMatrix]) -> String {
    content_digest(parts)
}

fn residual_verdict(check: &'static str, digest: String, residual: f64, tol: f64, scale: f64) -> CheckVerdict {
    let pass = residual <= tol * 1f64.max(scale);
    CheckVerdict {
        check,
        inputs_digest: digest,
        verdict: if pass { Verdict::Holds } else { Verdict::Violated },
        residual: Some(residual),
        seed: None,
    }
}

/// f(sigma (+) sigma') must equal f(sigma) interleaved with f(sigma').
pub fn check_direct_sum(
    f: &NcFunctionHandle,
    sigma: &GrassPoint,
    sigmap: &GrassPoint,
    tol: f64,
) -> Result<CheckVerdict> {
    let sum = crate::grassmann::direct_sum(sigma, sigmap)?;
    let lhs = f.evaluate(&sum)?;
    let rhs = f.evaluate(sigma)?.interleave(&f.evaluate(sigmap)?)?;
    let residual = lhs.max_abs_diff(&rhs)?;
    let scale = lhs.norm_max().max(rhs.norm_max());
    Ok(residual_verdict(
        "direct-sum",
        digest(&[sigma.rep(), sigmap.rep()]),
        residual,
        tol,
        scale,
    ))
}

/// f(s sigma) must equal (s (x) I) f(sigma) (s^-1 (x) I).
pub fn check_similarity(
    f: &NcFunctionHandle,
    sigma: &GrassPoint,
    s: &Mat,
    tol: f64,
) -> Result<CheckVerdict> {
    let moved = similarity(s, sigma, tol)?;
    let dig = {
        let lifted = scalar_similarity_lift(s, 1, sigma.k(), tol)?;
        digest(&[sigma.rep(), &lifted])
    };
    if !f.in_domain(&moved)? {
        return Ok(CheckVerdict {
            check: "similarity",
            inputs_digest: dig,
            verdict: Verdict::Vacuous,
            residual: None,
            seed: None,
        });
    }
    let lhs = f.evaluate(&moved)?;
    let rhs = conjugate_value(&f.evaluate(sigma)?, s, f.k_target(), tol)?;
    let residual = lhs.max_abs_diff(&rhs)?;
    let scale = lhs.norm_max().max(rhs.norm_max());
    Ok(residual_verdict("similarity", dig, residual, tol, scale))
}

/// Intertwining: when the unitriangular mixing of sigma (+) sigma' by the
/// scalar matrix t (middle sizes n x n') fixes the class, the values must
/// intertwine: f(sigma) (t (x) I) = (t (x) I) f(sigma'). A failed hypothesis
/// yields a vacuous verdict.
pub fn check_intertwining(
    f: &NcFunctionHandle,
    sigma: &GrassPoint,
    sigmap: &GrassPoint,
    t: &Mat,
    tol: f64,
) -> Result<CheckVerdict> {
    let (n, np) = (sigma.n(), sigmap.n());
    if t.rows() != n || t.cols() != np {
        return Err(Error::dim(format!("mixing matrix must be {n}x{np}")));
    }
    let sum = crate::grassmann::direct_sum(sigma, sigmap)?;
    let mut s = Mat::identity(n + np, t.mode());
    s.set_block(0, n, t);
    let moved = similarity(&s, &sum, tol)?;
    let dig = {
        let tl = LayeredMatrix::new(t.clone(), 1, 1, n, np, 1);
        match tl {
            Ok(tl) => digest(&[sigma.rep(), sigmap.rep(), &tl]),
            Err(_) => digest(&[sigma.rep(), sigmap.rep()]),
        }
    };
    if !crate::grassmann::gr_equiv(&moved, &sum, tol)? {
        return Ok(CheckVerdict {
            check: "intertwining",
            inputs_digest: dig,
            verdict: Verdict::Vacuous,
            residual: None,
            seed: None,
        });
    }
    let t_lift = t.kron(&Mat::identity(f.k_target(), t.mode()));
    let t_layer = LayeredMatrix::new(t_lift, 1, 1, n, np, f.k_target())?;
    let lhs = f.evaluate(sigma)?.multiply(&t_layer)?;
    let rhs = t_layer.multiply(&f.evaluate(sigmap)?)?;
    let residual = lhs.max_abs_diff(&rhs)?;
    let scale = lhs.norm_max().max(rhs.norm_max());
    Ok(residual_verdict("intertwining", dig, residual, tol, scale))
}

// ------------------------------------------------------------- dd operator

/// Ladder of positive scaling factors tried by `dd_apply`, largest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalingPolicy {
    ladder: Vec<(i64, i64)>,
}

impl ScalingPolicy {
    /// 1, 1/2, ..., 1/2^20.
    pub fn default_float() -> Self {
        ScalingPolicy { ladder: (0..=20).map(|i| (1, 1i64 << i)).collect() }
    }

    /// Exact arithmetic needs no shrinking by default.
    pub fn default_exact() -> Self {
        ScalingPolicy { ladder: vec![(1, 1)] }
    }

    pub fn default_for(mode: Mode) -> Self {
        match mode {
            Mode::Exact => Self::default_exact(),
            Mode::Float => Self::default_float(),
        }
    }

    /// Only the unscaled coefficient.
    pub fn unit() -> Self {
        ScalingPolicy { ladder: vec![(1, 1)] }
    }

    pub fn from_ratios(ladder: Vec<(i64, i64)>) -> Result<Self> {
        if ladder.is_empty() || ladder.iter().any(|&(p, q)| p <= 0 || q <= 0) {
            return Err(Error::Parse("scaling ladder must list positive ratios".into()));
        }
        Ok(ScalingPolicy { ladder })
    }

    pub fn ratios(&self) -> &[(i64, i64)] { &self.ladder }
}

/// Value of the first-order operator together with the scale that admitted
/// the pinch.
#[derive(Debug, Clone)]
pub struct DdValue {
    pub value: LayeredMatrix,
    pub scale_used: (i64, i64),
}

/// First-order difference operator of f at the class pair (sigma, sigma')
/// along the outer slot (u in [m-d], v in [d], 1-based), applied to the
/// middle-rectangular coefficient x.
///
/// Walks the policy ladder for the first factor r with the pinch of
/// (sigma, sigma') by r*x inside the domain, evaluates there, checks that
/// the value has the triangular shape [[f(sigma), H], [0, f(sigma')]], and
/// returns H/r. The answer does not depend on the admitted r; the structure
/// check failing is a `StructureError`, an empty ladder walk an
/// `AdmissibilityError`.
pub fn dd_apply(
    f: &NcFunctionHandle,
    sigma: &GrassPoint,
    sigmap: &GrassPoint,
    u: usize,
    v: usize,
    x: &LayeredMatrix,
    policy: &ScalingPolicy,
    tol: f64,
) -> Result<DdValue> {
    if !f.in_domain(sigma)? || !f.in_domain(sigmap)? {
        return Err(Error::DomainError("base classes outside the stored domain".into()));
    }
    if !f.source_spec().contains(x)? {
        return Err(Error::NotInSubalgebra);
    }
    let mode = sigma.mode();
    let (n, np) = (sigma.n(), sigmap.n());
    let fs = f.evaluate(sigma)?;
    let fsp = f.evaluate(sigmap)?;
    for &(p, q) in policy.ratios() {
        let r = Scalar::from_ratio(p, q, mode);
        let scaled = x.scale(&r);
        let pinched = pinch(sigma, sigmap, u, v, &scaled)?;
        if !f.in_domain(&pinched)? {
            continue;
        }
        let big = f.evaluate(&pinched)?;
        let scale = 1f64.max(big.norm_max()).max(fs.norm_max()).max(fsp.norm_max());
        let near = |a: &Mat, b: &Mat| -> Result<bool> {
            Ok(match mode {
                Mode::Exact => a == b,
                Mode::Float => a.max_abs_diff(b)? <= tol * scale,
            })
        };
        let top_left = big.mid_block(0, n, 0, n);
        let bottom_right = big.mid_block(n, n + np, n, n + np);
        let bottom_left = big.mid_block(n, n + np, 0, n);
        if !bottom_left.is_zero_within(tol, scale)
            || !near(&top_left, fs.mat())?
            || !near(&bottom_right, fsp.mat())?
        {
            return Err(Error::StructureError(
                "pinch value is not triangular over the two base values".into(),
            ));
        }
        let h = big.mid_block(0, n, n, n + np);
        let r_inv = Scalar::from_ratio(q, p, mode);
        let value = LayeredMatrix::new(h, 1, 1, n, np, f.k_target())?.scale(&r_inv);
        return Ok(DdValue { value, scale_used: (p, q) });
    }
    Err(Error::AdmissibilityError)
}

/// Flag version of `dd_apply`: differentiate at level j (1-based) along the
/// slot (u in [m - d_j], v in [d_j - d_{j-1}]), which is the Grassmannian
/// slot (u, d_{j-1} + v) of the projections.
#[allow(clippy::too_many_arguments)]
pub fn dd_flag_apply(
    f: &NcFunctionHandle,
    phi: &crate::flag::FlagPoint,
    phip: &crate::flag::FlagPoint,
    j: usize,
    u: usize,
    v: usize,
    x: &LayeredMatrix,
    policy: &ScalingPolicy,
    tol: f64,
) -> Result<DdValue> {
    let (sigma, sigmap, vg) = flag_dd_slot(phi, phip, j, u, v, tol)?;
    dd_apply(f, &sigma, &sigmap, u, vg, x, policy, tol)
}

/// First-order difference law at a single class: shifting sigma by the
/// coefficient x planted at the outer slot (u, v) must change the value by
/// exactly the first-order operator at the (unscaled) pinch. Only r = 1 is
/// admissible here; a pinch outside the domain is a `DomainError`.
pub fn first_order_difference_check(
    f: &NcFunctionHandle,
    sigma: &GrassPoint,
    u: usize,
    v: usize,
    x: &LayeredMatrix,
    policy: &ScalingPolicy,
    tol: f64,
) -> Result<CheckVerdict> {
    let _ = policy; // accepted for signature parity; the law fixes r = 1
    let (d, m, n, k) = (sigma.d(), sigma.m(), sigma.n(), sigma.k());
    if x.mid_rows() != n || x.mid_cols() != n || x.inner() != k {
        return Err(Error::dim(format!("coefficient must be middle {n}x{n}, inner {k}")));
    }
    if u == 0 || u > m - d || v == 0 || v > d {
        return Err(Error::IndexOutOfRange(format!("slot (u, v) = ({u}, {v})")));
    }
    let mut y = LayeredMatrix::zeros(m - d, d, n, n, k, sigma.mode());
    y.set_outer_block(u - 1, v - 1, &x.mat().clone());
    let shifted = shift_act(sigma, &y)?;
    if !f.in_domain(&shifted)? {
        return Err(Error::DomainError("shifted class outside the stored domain".into()));
    }
    let dd = match dd_apply(f, sigma, &shifted, u, v, x, &ScalingPolicy::unit(), tol) {
        Ok(v) => v,
        Err(Error::AdmissibilityError) => {
            return Err(Error::DomainError("unscaled pinch outside the stored domain".into()))
        }
        Err(e) => return Err(e),
    };
    let lhs = f.evaluate(sigma)?.sub(&f.evaluate(&shifted)?)?;
    let residual = lhs.max_abs_diff(&dd.value)?;
    let scale = lhs.norm_max().max(dd.value.norm_max());
    Ok(residual_verdict(
        "first-order",
        digest(&[sigma.rep(), x]),
        residual,
        tol,
        scale,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{affine_embed, affine_extract, direct_sum};
    use crate::matrix::DEFAULT_TOL;

    /// Inverse of the affine coordinate: the model function used across the
    /// calculus tests. Domain: the chart is reached and the coordinate is
    /// invertible; optionally the coordinate norm stays under a bound.
    fn chart_inverse(d: usize, m: usize, k: usize, bound: Option<f64>) -> NcFunctionHandle {
        let tol = DEFAULT_TOL;
        let dom: DomainTest = Arc::new(move |p: &GrassPoint| {
            let Some(x) = affine_extract(p, tol)? else { return Ok(false) };
            if p.d() != p.m() - p.d() {
                return Ok(false);
            }
            // square outer coordinate: flatten to one invertible block
            let sq = LayeredMatrix::new(
                x.mat().clone(),
                1,
                1,
                x.outer_rows() * x.mid_rows(),
                x.outer_cols() * x.mid_cols(),
                x.inner(),
            )?;
            if let Some(b) = bound {
                if x.norm_max() > b {
                    return Ok(false);
                }
            }
            Ok(sq.invert(tol)?.invertible)
        });
        let eval: Evaluator = Arc::new(move |p: &GrassPoint| {
            let x = affine_extract(p, tol)?
                .ok_or_else(|| Error::DomainError("chart missed".into()))?;
            let n = p.n() * (p.m() - p.d());
            let sq = LayeredMatrix::new(x.mat().clone(), 1, 1, n, n, p.k())?;
            let inv = sq
                .invert(tol)?
                .inverse
                .ok_or_else(|| Error::NotInvertible("coordinate".into()))?;
            LayeredMatrix::new(inv.into_mat(), 1, 1, p.n(), p.n(), p.k())
        });
        NcFunctionHandle::new(d, m, k, k, DomainPredicate::new(dom, true), eval).unwrap()
    }

    fn coord(v: i64) -> LayeredMatrix {
        LayeredMatrix::new(Mat::from_i64(&[&[v]], Mode::Exact), 1, 1, 1, 1, 1).unwrap()
    }

    fn coord_q(p: i64, q: i64) -> LayeredMatrix {
        LayeredMatrix::new(
            Mat::from_fn(1, 1, Mode::Exact, |_, _| Scalar::from_ratio(p, q, Mode::Exact)),
            1,
            1,
            1,
            1,
            1,
        )
        .unwrap()
    }

    fn embed1(v: i64) -> GrassPoint {
        affine_embed(&coord(v), 1, 2).unwrap()
    }

    #[test]
    fn evaluate_inverts_the_chart_coordinate() {
        let f = chart_inverse(1, 2, 1, None);
        let got = f.evaluate(&embed1(2)).unwrap();
        assert_eq!(got.mat(), coord_q(1, 2).mat());
        assert!(matches!(f.evaluate(&embed1(0)), Err(Error::DomainError(_))));
    }

    #[test]
    fn direct_sum_law_holds_exactly() {
        let f = chart_inverse(1, 2, 1, None);
        let v = check_direct_sum(&f, &embed1(2), &embed1(5), DEFAULT_TOL).unwrap();
        assert_eq!(v.verdict, Verdict::Holds);
        assert_eq!(v.residual, Some(0.0));
        assert_eq!(v.check, "direct-sum");
        assert_eq!(v.inputs_digest.len(), 64);
    }

    #[test]
    fn similarity_law_holds_exactly() {
        // middle size 2: sigma = embed of an invertible 2x2 coordinate
        let x = LayeredMatrix::new(Mat::from_i64(&[&[1, 2], &[0, 3]], Mode::Exact), 1, 1, 2, 2, 1)
            .unwrap();
        let sigma = affine_embed(&x, 1, 2).unwrap();
        let f = chart_inverse(1, 2, 1, None);
        let s = Mat::from_i64(&[&[1, 1], &[0, 1]], Mode::Exact);
        let v = check_similarity(&f, &sigma, &s, DEFAULT_TOL).unwrap();
        assert_eq!(v.verdict, Verdict::Holds);
        assert_eq!(v.residual, Some(0.0));
    }

    #[test]
    fn intertwining_with_inclusion_witness() {
        let f = chart_inverse(1, 2, 1, None);
        let sigma = embed1(2);
        let sigmap = embed1(5);
        let sum = direct_sum(&sigma, &sigmap).unwrap();

        // t = [1; 0] intertwines the sum with its first summand
        let t = Mat::from_i64(&[&[1], &[0]], Mode::Exact);
        let v = check_intertwining(&f, &sum, &sigma, &t, DEFAULT_TOL).unwrap();
        assert_eq!(v.verdict, Verdict::Holds);
        assert_eq!(v.residual, Some(0.0));

        // a generic mixing of two distinct classes fails the hypothesis
        let t2 = Mat::from_i64(&[&[1]], Mode::Exact);
        let v2 = check_intertwining(&f, &sigma, &sigmap, &t2, DEFAULT_TOL).unwrap();
        assert_eq!(v2.verdict, Verdict::Vacuous);

        // mixing a class with itself always satisfies the hypothesis
        let v3 = check_intertwining(&f, &sigma, &sigma, &t2, DEFAULT_TOL).unwrap();
        assert_eq!(v3.verdict, Verdict::Holds);
    }

    #[test]
    fn dd_reads_the_off_diagonal_block() {
        // f = chart inverse at (1; 2): dd at (embed 1, embed 2) with x = 1
        // pinches to the coordinate [[1, 1], [0, 2]] whose inverse has
        // off-diagonal -1/2
        let f = chart_inverse(1, 2, 1, None);
        let dd = dd_apply(
            &f,
            &embed1(1),
            &embed1(2),
            1,
            1,
            &coord(1),
            &ScalingPolicy::default_exact(),
            DEFAULT_TOL,
        )
        .unwrap();
        assert_eq!(dd.value.mat(), coord_q(-1, 2).mat());
        assert_eq!(dd.scale_used, (1, 1));
    }

    #[test]
    fn dd_is_additive_and_homogeneous_in_x() {
        let f = chart_inverse(1, 2, 1, None);
        let (s, sp) = (embed1(1), embed1(3));
        let pol = ScalingPolicy::default_exact();
        let d1 = dd_apply(&f, &s, &sp, 1, 1, &coord(2), &pol, DEFAULT_TOL).unwrap();
        let d2 = dd_apply(&f, &s, &sp, 1, 1, &coord(5), &pol, DEFAULT_TOL).unwrap();
        let dsum = dd_apply(&f, &s, &sp, 1, 1, &coord(7), &pol, DEFAULT_TOL).unwrap();
        assert_eq!(d1.value.add(&d2.value).unwrap().mat(), dsum.value.mat());

        let dscaled = dd_apply(&f, &s, &sp, 1, 1, &coord(6), &pol, DEFAULT_TOL).unwrap();
        assert_eq!(
            d1.value.scale(&Scalar::from_int(3, Mode::Exact)).mat(),
            dscaled.value.mat()
        );
    }

    #[test]
    fn dd_ladder_rescales_out_of_domain_pinches() {
        // norm-bounded domain: |coordinate| <= 10; the unscaled pinch with
        // x = 100 falls outside, the ladder walks down until it fits, and
        // the rescaled answer matches the exact value -x / 16
        let f = chart_inverse(1, 2, 1, Some(10.0));
        let sigma = affine_embed(
            &LayeredMatrix::new(Mat::from_i64(&[&[4]], Mode::Float), 1, 1, 1, 1, 1).unwrap(),
            1,
            2,
        )
        .unwrap();
        let x = LayeredMatrix::new(Mat::from_i64(&[&[100]], Mode::Float), 1, 1, 1, 1, 1).unwrap();
        let dd = dd_apply(
            &f,
            &sigma,
            &sigma,
            1,
            1,
            &x,
            &ScalingPolicy::default_float(),
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(dd.scale_used.1 > 1, "expected a proper rescale, got {:?}", dd.scale_used);
        let expect =
            LayeredMatrix::new(Mat::from_i64(&[&[-100]], Mode::Float), 1, 1, 1, 1, 1)
                .unwrap()
                .scale(&Scalar::from_ratio(1, 16, Mode::Float));
        assert!(dd.value.approx_eq(&expect, 1e-9).unwrap());

        // two different admitted rungs agree
        let lo = dd_apply(
            &f,
            &sigma,
            &sigma,
            1,
            1,
            &x,
            &ScalingPolicy::from_ratios(vec![(1, 64)]).unwrap(),
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(lo.value.approx_eq(&dd.value, 1e-9).unwrap());

        // an exhausted ladder is an admissibility error
        let err = dd_apply(
            &f,
            &sigma,
            &sigma,
            1,
            1,
            &x,
            &ScalingPolicy::unit(),
            DEFAULT_TOL,
        );
        assert!(matches!(err, Err(Error::AdmissibilityError)));
    }

    #[test]
    fn dd_rejects_coefficients_outside_the_source_subalgebra() {
        let f = chart_inverse(1, 2, 2, None)
            .with_source_spec(SubalgebraSpec::scalars(2, DEFAULT_TOL))
            .unwrap();
        let x2 = LayeredMatrix::new(Mat::from_i64(&[&[1, 0], &[0, 2]], Mode::Exact), 1, 1, 1, 1, 2)
            .unwrap();
        let sigma = affine_embed(
            &LayeredMatrix::new(Mat::from_i64(&[&[3, 0], &[0, 3]], Mode::Exact), 1, 1, 1, 1, 2)
                .unwrap(),
            1,
            2,
        )
        .unwrap();
        let err = dd_apply(
            &f,
            &sigma,
            &sigma,
            1,
            1,
            &x2,
            &ScalingPolicy::default_exact(),
            DEFAULT_TOL,
        );
        assert!(matches!(err, Err(Error::NotInSubalgebra)));
    }

    #[test]
    fn first_order_difference_is_exact_on_the_model() {
        // f(embed b) = 1/b: f(1) - f(1/2) = -1 and the operator agrees
        let f = chart_inverse(1, 2, 1, None);
        let v = first_order_difference_check(
            &f,
            &embed1(1),
            1,
            1,
            &coord_q(1, 2),
            &ScalingPolicy::default_exact(),
            DEFAULT_TOL,
        )
        .unwrap();
        assert_eq!(v.verdict, Verdict::Holds);
        assert_eq!(v.residual, Some(0.0));

        // shifting by the full coordinate lands on the chart origin, where
        // the shifted class leaves the domain
        let err = first_order_difference_check(
            &f,
            &embed1(1),
            1,
            1,
            &coord(1),
            &ScalingPolicy::default_exact(),
            DEFAULT_TOL,
        );
        assert!(matches!(err, Err(Error::DomainError(_))));
    }

    #[test]
    fn envelope_extension_demands_and_uses_witnesses() {
        // domain bounded by norm 2; tau = s sigma sits outside it
        let f = envelope_extend(&chart_inverse(1, 2, 1, Some(2.0)));
        let x = LayeredMatrix::new(Mat::from_i64(&[&[1, 0], &[0, 2]], Mode::Exact), 1, 1, 2, 2, 1)
            .unwrap();
        let sigma = affine_embed(&x, 1, 2).unwrap();
        let s = Mat::from_i64(&[&[1, 3], &[0, 1]], Mode::Exact);
        let tau = similarity(&s, &sigma, DEFAULT_TOL).unwrap();

        // inside the original domain the extension evaluates directly
        assert!(f.evaluate(&sigma).is_ok());
        assert!(matches!(f.evaluate(&tau), Err(Error::WitnessRequired)));

        let got = f.evaluate_with_witness(&tau, &s, &sigma, DEFAULT_TOL).unwrap();
        // s x^-1 s^-1 = [[1, -3/2], [0, 1/2]]
        let expect = Mat::from_rows(vec![
            vec![Scalar::from_int(1, Mode::Exact), Scalar::from_ratio(-3, 2, Mode::Exact)],
            vec![Scalar::from_int(0, Mode::Exact), Scalar::from_ratio(1, 2, Mode::Exact)],
        ])
        .unwrap();
        assert_eq!(got.mat(), &expect);

        // a witness outside the domain, or one that misses tau, is refused
        let far = affine_embed(
            &LayeredMatrix::new(Mat::from_i64(&[&[9, 0], &[0, 9]], Mode::Exact), 1, 1, 2, 2, 1)
                .unwrap(),
            1,
            2,
        )
        .unwrap();
        assert!(matches!(
            f.evaluate_with_witness(&tau, &s, &far, DEFAULT_TOL),
            Err(Error::DomainError(_))
        ));
        let wrong_s = Mat::from_i64(&[&[1, 0], &[0, 1]], Mode::Exact);
        assert!(matches!(
            f.evaluate_with_witness(&tau, &wrong_s, &sigma, DEFAULT_TOL),
            Err(Error::DomainError(_))
        ));
    }
}
