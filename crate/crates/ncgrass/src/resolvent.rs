//! Grassmannian resolvents.
//!
//! A projective point pi is a level-1 class at the position (m-d; m)
//! complementary to the classes sigma at (d; m) it will be paired with. The
//! pairing splices the well-defined trailing columns of both: the r-matrix
//! takes pi's last m-d outer columns (amplified to sigma's level) followed
//! by sigma's last d outer columns. Invertibility of the r-matrix
//! (transversality) does not depend on the chosen representatives, and on
//! the transversal set the resolvent reads d x 1 outer slices of the
//! r-matrix inverse against sigma's trailing columns.

use crate::error::{Error, Result};
use crate::flag::{flag_project, FlagPoint};
use crate::grassmann::{affine_embed, GrassPoint};
use crate::matrix::{content_digest, LayeredMatrix, Mat};
use crate::ncfunc::{dd_apply, DomainPredicate, NcFunctionHandle, ScalingPolicy};
use crate::scalar::{Mode, Scalar};
use crate::subalgebra::SubalgebraSpec;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Level-1 class at position (d_pi; m): the fixed coefficient side of a
/// resolvent pairing. Its classes pair with level-n classes at (m - d_pi; m).
#[derive(Debug, Clone)]
pub struct ProjectivePoint {
    point: GrassPoint,
}

impl ProjectivePoint {
    pub fn new(point: GrassPoint) -> Result<Self> {
        if point.n() != 1 {
            return Err(Error::dim(format!(
                "projective points are level-1 classes, got middle size {}",
                point.n()
            )));
        }
        Ok(ProjectivePoint { point })
    }

    pub fn from_rep(d: usize, m: usize, rep: LayeredMatrix, tol: f64) -> Result<Self> {
        ProjectivePoint::new(GrassPoint::new(d, m, rep, tol)?)
    }

    pub fn point(&self) -> &GrassPoint { &self.point }
    pub fn d(&self) -> usize { self.point.d() }
    pub fn m(&self) -> usize { self.point.m() }
    pub fn k(&self) -> usize { self.point.k() }
    pub fn mode(&self) -> Mode { self.point.mode() }

    /// Position (d; m) of the classes this point pairs with.
    pub fn pairs_with_d(&self) -> usize {
        self.m() - self.d()
    }

    /// Interleave n copies: the level-n class with I_n (x) a_{i,j} blocks.
    pub fn amplify(&self, n: usize) -> Result<GrassPoint> {
        if n == 0 {
            return Err(Error::dim("amplification level must be positive"));
        }
        let mut out = self.point.clone();
        for _ in 1..n {
            out = crate::grassmann::direct_sum(&out, &self.point)?;
        }
        Ok(out)
    }
}

/// Splice of trailing columns: pi_amp's outer columns d+1..m followed by
/// sigma's outer columns m-d+1..m, where d = sigma's position. Both inputs
/// share (m, n, k); pi_amp sits at (m-d; m).
pub fn r_matrix(pi_amp: &GrassPoint, sigma: &GrassPoint) -> Result<LayeredMatrix> {
    let (d, m) = (sigma.d(), sigma.m());
    if pi_amp.m() != m || pi_amp.d() != m - d {
        return Err(Error::dim(format!(
            "expected the pairing position ({}; {m}), got ({}; {})",
            m - d,
            pi_amp.d(),
            pi_amp.m()
        )));
    }
    if pi_amp.n() != sigma.n() || pi_amp.k() != sigma.k() {
        return Err(Error::dim("layer sizes differ across the pairing"));
    }
    let left = pi_amp.rep().outer_col_range(d, m);
    let right = sigma.rep().outer_col_range(m - d, m);
    left.outer_hcat(&right)
}

/// Transversality: the r-matrix of (pi amplified to sigma's level, sigma) is
/// invertible. Representative-independent. The subalgebra argument fixes the
/// coefficient algebra of the ambient pairing; invertibility itself is
/// decided in the full matrix algebra.
pub fn is_transversal(
    pi: &ProjectivePoint,
    sigma: &GrassPoint,
    spec: &SubalgebraSpec,
    tol: f64,
) -> Result<bool> {
    if spec.k() != sigma.k() {
        return Err(Error::dim("subalgebra inner size differs from the pairing"));
    }
    let amp = pi.amplify(sigma.n())?;
    let r = r_matrix(&amp, sigma)?;
    Ok(r.invert(tol)?.invertible)
}

/// Membership in the level-n resolvent set relative to a subalgebra: the
/// stored representative must have all inner cells in the subalgebra (a
/// `NotInSubalgebra` error otherwise), and the pairing must be transversal.
pub fn in_resolvent_set(
    pi: &ProjectivePoint,
    sigma: &GrassPoint,
    spec: &SubalgebraSpec,
    tol: f64,
) -> Result<bool> {
    if !spec.contains(sigma.rep())? {
        return Err(Error::NotInSubalgebra);
    }
    is_transversal(pi, sigma, spec, tol)
}

/// Resolvent value at one slot (v in [d], u in [m-d], 1-based), together
/// with the inverse slice it came from. The invariant `value = (sigma's
/// outer row v of its trailing d columns) * zeta` is re-checkable from the
/// stored parts.
#[derive(Debug, Clone)]
pub struct ResolventValue {
    pub value: LayeredMatrix,
    pub v: usize,
    pub u: usize,
    /// d x 1 outer slice of the r-matrix inverse: rows m-d+1..m, outer
    /// column d+u.
    pub zeta: LayeredMatrix,
}

/// All resolvent slots of one pairing, from a single r-matrix inversion.
pub struct ResolventTable {
    d: usize,
    m: usize,
    n: usize,
    k: usize,
    r_inv: LayeredMatrix,
    sigma_rep: LayeredMatrix,
}

impl ResolventTable {
    pub fn build(pi: &ProjectivePoint, sigma: &GrassPoint, tol: f64) -> Result<Self> {
        let amp = pi.amplify(sigma.n())?;
        let r = r_matrix(&amp, sigma)?;
        let r_inv = r.invert(tol)?.inverse.ok_or(Error::NotTransversal)?;
        Ok(ResolventTable {
            d: sigma.d(),
            m: sigma.m(),
            n: sigma.n(),
            k: sigma.k(),
            r_inv,
            sigma_rep: sigma.rep().clone(),
        })
    }

    pub fn zeta(&self, u: usize) -> Result<LayeredMatrix> {
        let (d, m) = (self.d, self.m);
        if u == 0 || u > m - d {
            return Err(Error::IndexOutOfRange(format!("u = {u} with m - d = {}", m - d)));
        }
        let cell = self.n * self.k;
        let mat = self.r_inv.mat().block(
            (m - d) * cell,
            m * cell,
            (d + u - 1) * cell,
            (d + u) * cell,
        );
        LayeredMatrix::new(mat, d, 1, self.n, self.n, self.k)
    }

    pub fn value(&self, v: usize, u: usize) -> Result<ResolventValue> {
        let (d, m) = (self.d, self.m);
        if v == 0 || v > d {
            return Err(Error::IndexOutOfRange(format!("v = {v} with d = {d}")));
        }
        let zeta = self.zeta(u)?;
        let cell = self.n * self.k;
        let row = self.sigma_rep.mat().block(
            (v - 1) * cell,
            v * cell,
            (m - d) * cell,
            m * cell,
        );
        let row = LayeredMatrix::new(row, 1, d, self.n, self.n, self.k)?;
        let value = row.multiply(&zeta)?;
        Ok(ResolventValue { value, v, u, zeta })
    }
}

/// Resolvent of the pairing (pi, sigma) at the slot (v, u). Errors with
/// `NotTransversal` off the resolvent set. The value does not depend on the
/// representatives of either class.
pub fn grass_resolvent(
    pi: &ProjectivePoint,
    sigma: &GrassPoint,
    v: usize,
    u: usize,
    tol: f64,
) -> Result<ResolventValue> {
    ResolventTable::build(pi, sigma, tol)?.value(v, u)
}

/// Memoized r-matrix inversions for one fixed pi, keyed by the paired
/// class's representative digest. Slot sweeps and repeated first-order
/// evaluations hit the same tables instead of re-eliminating; results are
/// identical to the uncached paths.
#[derive(Clone)]
pub struct ResolventCache {
    pi: ProjectivePoint,
    tol: f64,
    tables: Arc<Mutex<HashMap<String, Option<Arc<ResolventTable>>>>>,
}

impl ResolventCache {
    pub fn new(pi: ProjectivePoint, tol: f64) -> Self {
        ResolventCache { pi, tol, tables: Arc::new(Mutex::new(HashMap::new())) }
    }

    pub fn pi(&self) -> &ProjectivePoint {
        &self.pi
    }

    /// Table of the pairing with sigma; None when not transversal. Both
    /// outcomes are memoized.
    pub fn table(&self, sigma: &GrassPoint) -> Result<Option<Arc<ResolventTable>>> {
        let key = content_digest(&[sigma.rep()]);
        if let Some(hit) = self.tables.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let built = match ResolventTable::build(&self.pi, sigma, self.tol) {
            Ok(t) => Some(Arc::new(t)),
            Err(Error::NotTransversal) => None,
            Err(e) => return Err(e),
        };
        self.tables.lock().unwrap().insert(key, built.clone());
        Ok(built)
    }

    pub fn value(&self, sigma: &GrassPoint, v: usize, u: usize) -> Result<ResolventValue> {
        self.table(sigma)?.ok_or(Error::NotTransversal)?.value(v, u)
    }

    /// The (v, u) slot as a function handle whose domain and evaluator both
    /// go through this cache.
    pub fn function(&self, v: usize, u: usize) -> Result<NcFunctionHandle> {
        let d = self.pi.pairs_with_d();
        let m = self.pi.m();
        if v == 0 || v > d || u == 0 || u > m - d {
            return Err(Error::IndexOutOfRange(format!(
                "slot (v, u) = ({v}, {u}) at position ({d}; {m})"
            )));
        }
        let k = self.pi.k();
        let dom = self.clone();
        let domain = DomainPredicate::new(
            Arc::new(move |sigma: &GrassPoint| Ok(dom.table(sigma)?.is_some())),
            true,
        );
        let eval = self.clone();
        let evaluator = Arc::new(move |sigma: &GrassPoint| Ok(eval.value(sigma, v, u)?.value));
        NcFunctionHandle::new(d, m, k, k, domain, evaluator)
    }
}

/// `resolvent_equation_residual` against shared tables: identical result,
/// one r-matrix elimination per distinct class or pinch instead of one per
/// slot.
#[allow(clippy::too_many_arguments)]
pub fn resolvent_equation_residual_cached(
    cache: &ResolventCache,
    sigma: &GrassPoint,
    sigmap: &GrassPoint,
    s: usize,
    t: usize,
    v: usize,
    u: usize,
    x: &LayeredMatrix,
    policy: &ScalingPolicy,
    tol: f64,
) -> Result<f64> {
    let d = cache.pi().pairs_with_d();
    let m = cache.pi().m();
    for (name, idx, bound) in [("s", s, m - d), ("t", t, d), ("v", v, d), ("u", u, m - d)] {
        if idx == 0 || idx > bound {
            return Err(Error::IndexOutOfRange(format!(
                "{name} = {idx} outside [1, {bound}] at position ({d}; {m})"
            )));
        }
    }
    let f = cache.function(v, u)?;
    let dd = dd_apply(&f, sigma, sigmap, s, t, x, policy, tol)?;
    let left = cache.value(sigma, v, s)?.value;
    let right = cache.value(sigmap, t, u)?.value;
    let product = left.multiply(&x.multiply(&right)?)?;
    dd.value.add(&product)?.max_abs_diff(&LayeredMatrix::zeros(
        1,
        1,
        sigma.n(),
        sigmap.n(),
        sigma.k(),
        sigma.mode(),
    ))
}

/// The resolvent slot (v, u) of pi as a function of classes at (d; m) =
/// (m - d_pi; m), with the full resolvent set as domain. Resolvent sets are
/// closed under interleaved direct sums.
pub fn resolvent_function(pi: &ProjectivePoint, v: usize, u: usize, tol: f64) -> Result<NcFunctionHandle> {
    let d = pi.pairs_with_d();
    let m = pi.m();
    if v == 0 || v > d || u == 0 || u > m - d {
        return Err(Error::IndexOutOfRange(format!(
            "slot (v, u) = ({v}, {u}) at position ({d}; {m})"
        )));
    }
    let k = pi.k();
    let spec = SubalgebraSpec::full(k);
    let dom_pi = pi.clone();
    let dom_spec = spec.clone();
    let domain = DomainPredicate::new(
        Arc::new(move |sigma: &GrassPoint| in_resolvent_set(&dom_pi, sigma, &dom_spec, tol)),
        true,
    );
    let eval_pi = pi.clone();
    let evaluator = Arc::new(move |sigma: &GrassPoint| {
        Ok(grass_resolvent(&eval_pi, sigma, v, u, tol)?.value)
    });
    NcFunctionHandle::new(d, m, k, k, domain, evaluator)
}

/// Residual of the resolvent equation at one slot combination: the
/// first-order operator of the (v, u) resolvent at (sigma, sigma') along
/// (s, t), applied to x, must equal minus the product of the (v, s) value at
/// sigma, x, and the (t, u) value at sigma'. Returns the max-norm residual
/// (exactly 0.0 when the law holds in exact mode).
#[allow(clippy::too_many_arguments)]
pub fn resolvent_equation_residual(
    pi: &ProjectivePoint,
    sigma: &GrassPoint,
    sigmap: &GrassPoint,
    s: usize,
    t: usize,
    v: usize,
    u: usize,
    x: &LayeredMatrix,
    policy: &ScalingPolicy,
    tol: f64,
) -> Result<f64> {
    let d = pi.pairs_with_d();
    let m = pi.m();
    for (name, idx, bound) in [("s", s, m - d), ("t", t, d), ("v", v, d), ("u", u, m - d)] {
        if idx == 0 || idx > bound {
            return Err(Error::IndexOutOfRange(format!(
                "{name} = {idx} outside [1, {bound}] at position ({d}; {m})"
            )));
        }
    }
    let f = resolvent_function(pi, v, u, tol)?;
    let dd = dd_apply(&f, sigma, sigmap, s, t, x, policy, tol)?;
    let left = grass_resolvent(pi, sigma, v, s, tol)?.value;
    let right = grass_resolvent(pi, sigmap, t, u, tol)?.value;
    let product = left.multiply(&x.multiply(&right)?)?;
    dd.value.add(&product)?.max_abs_diff(&LayeredMatrix::zeros(
        1,
        1,
        sigma.n(),
        sigmap.n(),
        sigma.k(),
        sigma.mode(),
    ))
}

// ------------------------------------------------------------------ flags

/// Membership of a flag class in the resolvent set of a flag of projective
/// points: pi carries the complementary signature (m - d_K, ..., m - d_1)
/// at level 1, and every level of the pair must be transversal. Level j of
/// phi pairs with level K+1-j of pi.
pub fn flag_resolvent_set(
    pi: &FlagPoint,
    phi: &FlagPoint,
    spec: &SubalgebraSpec,
    tol: f64,
) -> Result<bool> {
    if pi.sig() != &phi.sig().dual() {
        return Err(Error::SignatureMismatch(format!(
            "pairing needs signature {:?}, got {:?}",
            phi.sig().dual().dims(),
            pi.sig().dims()
        )));
    }
    let kdepth = phi.sig().depth();
    for j in 1..=kdepth {
        let pi_j = ProjectivePoint::new(flag_project(pi, kdepth + 1 - j, tol)?)?;
        let sigma_j = flag_project(phi, j, tol)?;
        if !in_resolvent_set(&pi_j, &sigma_j, spec, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Resolvent of the flag pairing at level j (1-based), slot v in
/// [d_j - d_{j-1}], u in [m - d_j]: the Grassmannian resolvent of the
/// projections at the slot (d_{j-1} + v, u).
pub fn flag_resolvent(
    pi: &FlagPoint,
    phi: &FlagPoint,
    j: usize,
    v: usize,
    u: usize,
    tol: f64,
) -> Result<ResolventValue> {
    if pi.sig() != &phi.sig().dual() {
        return Err(Error::SignatureMismatch(format!(
            "pairing needs signature {:?}, got {:?}",
            phi.sig().dual().dims(),
            pi.sig().dims()
        )));
    }
    let kdepth = phi.sig().depth();
    let dj = phi.sig().dim(j)?;
    let dprev = if j >= 2 { phi.sig().dim(j - 1)? } else { 0 };
    let m = phi.m();
    if v == 0 || v > dj - dprev || u == 0 || u > m - dj {
        return Err(Error::IndexOutOfRange(format!(
            "flag slot (v, u) = ({v}, {u}) at level {j} of {:?}",
            phi.sig().dims()
        )));
    }
    let pi_j = ProjectivePoint::new(flag_project(pi, kdepth + 1 - j, tol)?)?;
    let sigma_j = flag_project(phi, j, tol)?;
    grass_resolvent(&pi_j, &sigma_j, dprev + v, u, tol)
}

/// Residual of the level-j resolvent equation for a flag pairing: the
/// first-order operator of the level-j slot (v, u) along (s, t) must equal
/// minus the product of the (v, s) value at phi and the (t, u) value at
/// phi'. Indices are level-local: s, u in [m - d_j], t, v in
/// [d_j - d_{j-1}]. Unfolds to the Grassmannian equation of the
/// projections.
#[allow(clippy::too_many_arguments)]
pub fn flag_resolvent_equation_residual(
    pi: &FlagPoint,
    phi: &FlagPoint,
    phip: &FlagPoint,
    j: usize,
    s: usize,
    t: usize,
    v: usize,
    u: usize,
    x: &LayeredMatrix,
    policy: &ScalingPolicy,
    tol: f64,
) -> Result<f64> {
    let kdepth = phi.sig().depth();
    let dj = phi.sig().dim(j)?;
    let dprev = if j >= 2 { phi.sig().dim(j - 1)? } else { 0 };
    let m = phi.m();
    for (name, idx, bound) in [
        ("s", s, m - dj),
        ("t", t, dj - dprev),
        ("v", v, dj - dprev),
        ("u", u, m - dj),
    ] {
        if idx == 0 || idx > bound {
            return Err(Error::IndexOutOfRange(format!(
                "{name} = {idx} outside [1, {bound}] at level {j}"
            )));
        }
    }
    let pi_j = ProjectivePoint::new(flag_project(pi, kdepth + 1 - j, tol)?)?;
    let sigma = flag_project(phi, j, tol)?;
    let sigmap = flag_project(phip, j, tol)?;
    resolvent_equation_residual(
        &pi_j,
        &sigma,
        &sigmap,
        s,
        dprev + t,
        dprev + v,
        u,
        x,
        policy,
        tol,
    )
}

// -------------------------------------------------------- partial converse

/// Report of `partial_converse_check`; residuals are exactly 0.0 when every
/// law holds in exact mode.
#[derive(Debug, Clone)]
pub struct ConverseReport {
    pub max_dd_residual: f64,
    pub max_constancy_residual: f64,
    pub max_agreement_residual: f64,
    pub pairs_checked: usize,
    pub pass: bool,
}

/// I_n (x) c on the inner layer, as a 1x1-outer level-n value.
pub(crate) fn lift_inner(c: &Mat, n: usize) -> Result<LayeredMatrix> {
    let k = c.rows();
    LayeredMatrix::new(Mat::identity(n, c.mode()).kron(c), 1, 1, n, n, k)
}

/// Given coefficients a, b in M_k with b invertible, the map
/// f(beta) = lift(b) (beta lift(b) - lift(a))^-1 on level-n points beta is
/// the resolvent of the projective class with representative
/// [[0, b], [I_k, a]] at (1; 2), and c(beta) = lift(b^-1) f(beta) satisfies
/// c(beta)^-1 - beta lift(b) = constant per level (the lift of the value at
/// beta0). The check verifies, over the given samples:
/// (i) the first-order law of f against pinches with deterministic
///     coefficients, on consecutive sample pairs of equal level,
/// (ii) constancy of c(beta)^-1 - beta lift(b) against the level-1 anchor
///      beta0,
/// (iii) agreement of f with the Grassmannian resolvent of that class.
pub fn partial_converse_check(
    a: &Mat,
    b: &Mat,
    samples: &[LayeredMatrix],
    beta0: &LayeredMatrix,
    tol: f64,
) -> Result<ConverseReport> {
    let k = a.rows();
    if !a.is_square() || !b.is_square() || b.rows() != k {
        return Err(Error::dim("coefficients must be square of one inner size"));
    }
    if a.mode() != b.mode() {
        return Err(Error::ModeMismatch("coefficients mix modes".into()));
    }
    let mode = a.mode();
    if (beta0.outer_rows(), beta0.outer_cols(), beta0.mid_rows(), beta0.mid_cols()) != (1, 1, 1, 1)
        || beta0.inner() != k
    {
        return Err(Error::dim("anchor must be a level-1 value over the same inner size"));
    }
    let b_layer1 = lift_inner(b, 1)?;
    if !b_layer1.invert(tol)?.invertible {
        return Err(Error::NotInvertible("second coefficient".into()));
    }

    // pi = class of [[0, b], [I_k, a]] at (1; 2), level 1
    let mut pi_rep = Mat::zeros(2 * k, 2 * k, mode);
    pi_rep.set_block(0, k, b);
    pi_rep.set_block(k, 0, &Mat::identity(k, mode));
    pi_rep.set_block(k, k, a);
    let pi = ProjectivePoint::from_rep(1, 2, LayeredMatrix::new(pi_rep, 2, 2, 1, 1, k)?, tol)?;

    let f_of = |beta: &LayeredMatrix| -> Result<LayeredMatrix> {
        let n = beta.mid_rows();
        let lb = lift_inner(b, n)?;
        let la = lift_inner(a, n)?;
        let core = beta.multiply(&lb)?.sub(&la)?;
        let inv = core
            .invert(tol)?
            .inverse
            .ok_or_else(|| Error::NotInvertible("resolvent core".into()))?;
        lb.multiply(&inv)
    };

    // anchor constant at level 1: c(beta0)^-1 - beta0 lift(b)
    let c0 = {
        let f0 = f_of(beta0)?;
        let c = lift_inner(b, 1)?
            .invert(tol)?
            .inverse
            .unwrap()
            .multiply(&f0)?;
        let cinv = c
            .invert(tol)?
            .inverse
            .ok_or_else(|| Error::NotInvertible("anchor value".into()))?;
        cinv.sub(&beta0.multiply(&lift_inner(b, 1)?)?)?
    };

    let mut report = ConverseReport {
        max_dd_residual: 0.0,
        max_constancy_residual: 0.0,
        max_agreement_residual: 0.0,
        pairs_checked: 0,
        pass: true,
    };

    for beta in samples {
        if (beta.outer_rows(), beta.outer_cols()) != (1, 1)
            || beta.mid_rows() != beta.mid_cols()
            || beta.inner() != k
        {
            return Err(Error::dim("samples must be square level-n values"));
        }
        let n = beta.mid_rows();
        let fb = f_of(beta)?;

        // (ii) constancy against the lifted anchor
        let c = lift_inner(b, n)?
            .invert(tol)?
            .inverse
            .unwrap()
            .multiply(&fb)?;
        let cinv = c
            .invert(tol)?
            .inverse
            .ok_or_else(|| Error::NotInvertible("sample value".into()))?;
        let konst = cinv.sub(&beta.multiply(&lift_inner(b, n)?)?)?;
        let lifted_anchor = {
            // I_n (x) c0 over the inner layer: interleave n copies
            let mut acc = c0.clone();
            for _ in 1..n {
                acc = acc.interleave(&c0)?;
            }
            acc
        };
        let rc = konst.max_abs_diff(&lifted_anchor)?;
        report.max_constancy_residual = report.max_constancy_residual.max(rc);

        // (iii) agreement with the Grassmannian resolvent of pi
        let sigma = affine_embed(beta, 1, 2)?;
        let rv = grass_resolvent(&pi, &sigma, 1, 1, tol)?;
        let ra = rv.value.max_abs_diff(&fb)?;
        report.max_agreement_residual = report.max_agreement_residual.max(ra);
    }

    // (i) first-order law on consecutive equal-level pairs, with a
    // deterministic patterned coefficient
    for pair in samples.windows(2) {
        let (b1, b2) = (&pair[0], &pair[1]);
        if b1.mid_rows() != b2.mid_rows() {
            continue;
        }
        let n = b1.mid_rows();
        let x = LayeredMatrix::new(
            Mat::from_fn(n * k, n * k, mode, |i, j| {
                Scalar::from_int(((i + 2 * j) % 3) as i64 - 1, mode)
            }),
            1,
            1,
            n,
            n,
            k,
        )?;
        let s1 = affine_embed(b1, 1, 2)?;
        let s2 = affine_embed(b2, 1, 2)?;
        let rd = resolvent_equation_residual(
            &pi,
            &s1,
            &s2,
            1,
            1,
            1,
            1,
            &x,
            &ScalingPolicy::default_for(mode),
            tol,
        )?;
        report.max_dd_residual = report.max_dd_residual.max(rd);
        report.pairs_checked += 1;
    }

    let gate = match mode {
        Mode::Exact => 0.0,
        Mode::Float => tol,
    };
    report.pass = report.max_dd_residual <= gate
        && report.max_constancy_residual <= gate
        && report.max_agreement_residual <= gate;
    Ok(report)
}
