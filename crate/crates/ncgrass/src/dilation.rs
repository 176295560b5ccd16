//! Contractions, graph transforms, and the Halmos dilation.
//!
//! Everything here runs in float mode: the constructions take Hermitian
//! square roots, which exact Gaussian-rational arithmetic does not close
//! over. A pure contraction a (largest singular value strictly below 1)
//! has defect operators s = (1 - a*a)^{1/2} and s* = (1 - aa*)^{1/2}, a
//! graph transform t = a s^{-1}, and a unitary dilation
//! [[-a*, s], [s*, a]] whose class at (1; 2) pairs with level-n points
//! exactly where beta lift(s) - lift(a) is invertible.

use crate::error::{Error, Result};
use crate::grassmann::affine_embed;
use crate::matrix::{LayeredMatrix, Mat};
use crate::resolvent::{grass_resolvent, in_resolvent_set, lift_inner, ProjectivePoint};
use crate::scalar::Mode;
use crate::subalgebra::SubalgebraSpec;

fn require_float(mode: Mode, what: &'static str) -> Result<()> {
    match mode {
        Mode::Float => Ok(()),
        Mode::Exact => Err(Error::ExactModeUnsupported(what)),
    }
}

/// Hermitian square root of a scalar k x k matrix, via the layered kernel.
fn mat_sqrt(m: &Mat, tol: f64) -> Result<Mat> {
    let k = m.rows();
    let lay = LayeredMatrix::new(m.clone(), 1, 1, 1, 1, k)?;
    Ok(lay.hermitian_sqrt(tol)?.into_mat())
}

fn mat_inverse(m: &Mat, tol: f64, what: &str) -> Result<Mat> {
    let k = m.rows();
    let lay = LayeredMatrix::new(m.clone(), 1, 1, 1, 1, k)?;
    let rep = lay.invert(tol)?;
    rep.inverse
        .map(LayeredMatrix::into_mat)
        .ok_or_else(|| Error::NotInvertible(what.into()))
}

/// Largest singular value strictly below 1 - tol.
pub fn is_pure_contraction(a: &Mat, tol: f64) -> Result<bool> {
    require_float(a.mode(), "contraction test")?;
    if !a.is_square() {
        return Err(Error::dim("contractions must be square"));
    }
    let (_, smax) = a.sv_extremes();
    Ok(smax < 1.0 - tol)
}

/// Graph transform of a pure contraction, with its defect operator. The
/// stored pair satisfies t * defect = a within the construction tolerance.
#[derive(Debug, Clone)]
pub struct ClosedOperatorModel {
    t: Mat,
    defect: Mat,
    source: Mat,
}

impl ClosedOperatorModel {
    pub fn from_contraction(a: &Mat, tol: f64) -> Result<Self> {
        require_float(a.mode(), "graph transform")?;
        if !a.is_square() {
            return Err(Error::dim("contractions must be square"));
        }
        let (_, smax) = a.sv_extremes();
        if smax >= 1.0 - tol {
            return Err(Error::NotPureContraction(smax));
        }
        let k = a.rows();
        let gram = Mat::identity(k, a.mode()).sub(&a.conj_transpose().mul(a)?)?;
        let defect = mat_sqrt(&gram, tol)?;
        let t = a.mul(&mat_inverse(&defect, tol, "defect operator")?)?;
        let back = t.mul(&defect)?;
        let drift = back.max_abs_diff(a)?;
        if drift > tol * 1.0_f64.max(a.norm_max()) {
            return Err(Error::StructureError(format!(
                "graph transform drifted by {drift:.3e}"
            )));
        }
        Ok(ClosedOperatorModel { t, defect, source: a.clone() })
    }

    pub fn t(&self) -> &Mat { &self.t }

    /// (1 - a*a)^{1/2}.
    pub fn defect(&self) -> &Mat { &self.defect }

    pub fn source(&self) -> &Mat { &self.source }

    /// Inverse transform t (1 + t*t)^{-1/2}; recovers the contraction.
    pub fn contraction(&self, tol: f64) -> Result<Mat> {
        let k = self.t.rows();
        let gram = Mat::identity(k, self.t.mode()).add(&self.t.conj_transpose().mul(&self.t)?)?;
        let root = mat_sqrt(&gram, tol)?;
        self.t.mul(&mat_inverse(&root, tol, "graph gram root")?)
    }
}

/// Graph transform t = a (1 - a*a)^{-1/2} of a pure contraction.
pub fn graph_transform(a: &Mat, tol: f64) -> Result<ClosedOperatorModel> {
    ClosedOperatorModel::from_contraction(a, tol)
}

/// Unitary dilation of a pure contraction, as a level-1 class at (1; 2).
#[derive(Debug, Clone)]
pub struct HalmosDilation {
    pub point: ProjectivePoint,
    pub unitary: Mat,
    /// Max-norm defect of U*U - I; at most 1e-10 by construction.
    pub unitarity_defect: f64,
}

/// Build [[-a*, (1-a*a)^{1/2}], [(1-aa*)^{1/2}, a]] and verify it is
/// unitary to within 1e-10 before wrapping it as a class.
pub fn halmos_dilation(a: &Mat, tol: f64) -> Result<HalmosDilation> {
    require_float(a.mode(), "unitary dilation")?;
    if !a.is_square() {
        return Err(Error::dim("contractions must be square"));
    }
    let (_, smax) = a.sv_extremes();
    if smax >= 1.0 - tol {
        return Err(Error::NotPureContraction(smax));
    }
    let k = a.rows();
    let eye = Mat::identity(k, a.mode());
    let s = mat_sqrt(&eye.sub(&a.conj_transpose().mul(a)?)?, tol)?;
    let s_star = mat_sqrt(&eye.sub(&a.mul(&a.conj_transpose())?)?, tol)?;
    let mut u = Mat::zeros(2 * k, 2 * k, a.mode());
    u.set_block(0, 0, &a.conj_transpose().neg());
    u.set_block(0, k, &s);
    u.set_block(k, 0, &s_star);
    u.set_block(k, k, a);
    let defect = u.conj_transpose().mul(&u)?.max_abs_diff(&Mat::identity(2 * k, a.mode()))?;
    if defect > 1e-10 {
        return Err(Error::StructureError(format!(
            "dilation unitarity defect {defect:.3e}"
        )));
    }
    let point = ProjectivePoint::from_rep(1, 2, LayeredMatrix::new(u.clone(), 2, 2, 1, 1, k)?, tol)?;
    Ok(HalmosDilation { point, unitary: u, unitarity_defect: defect })
}

/// Outcome of checking one (a, beta) pair of the correspondence between
/// the dilation's resolvent set and invertibility of beta lift(s) - lift(a).
#[derive(Debug, Clone)]
pub struct CorrespondenceReport {
    /// embed(beta) lies in the resolvent set of the dilation class.
    pub in_set: bool,
    /// beta lift(s) - lift(a) is invertible.
    pub core_invertible: bool,
    pub agree: bool,
    /// The core's relative smallest singular value sits in [tol, 10 tol]:
    /// the two predicates may legitimately differ here, so mismatches in
    /// this zone are flagged rather than counted as failures.
    pub near_singular: bool,
    /// Max-norm gap between the resolvent value and lift(s) core^{-1}.
    pub value_residual: Option<f64>,
    /// Max-norm gap of (beta - lift(t)) value - I.
    pub inverse_residual: Option<f64>,
}

/// Check, for one pure contraction and one level-n point beta, that the
/// dilation class pairs transversally with embed(beta) exactly when
/// beta lift(s) - lift(a) is invertible, and that on the set the resolvent
/// value equals lift(s) (beta lift(s) - lift(a))^{-1} and inverts
/// beta - lift(t).
pub fn resolvent_correspondence_check(
    a: &Mat,
    beta: &LayeredMatrix,
    tol: f64,
) -> Result<CorrespondenceReport> {
    require_float(a.mode(), "resolvent correspondence")?;
    let k = a.rows();
    if (beta.outer_rows(), beta.outer_cols()) != (1, 1)
        || beta.mid_rows() != beta.mid_cols()
        || beta.inner() != k
    {
        return Err(Error::dim("beta must be a square level-n value over the contraction's size"));
    }
    let model = graph_transform(a, tol)?;
    let dilation = halmos_dilation(a, tol)?;
    let n = beta.mid_rows();

    let s_lift = lift_inner(model.defect(), n)?;
    let a_lift = lift_inner(a, n)?;
    let core = beta.multiply(&s_lift)?.sub(&a_lift)?;
    let core_report = core.invert(tol)?;

    let sigma = affine_embed(beta, 1, 2)?;
    let spec = SubalgebraSpec::full(k);
    let in_set = in_resolvent_set(&dilation.point, &sigma, &spec, tol)?;

    let (smin, smax) = core.mat().sv_extremes();
    let rel = smin / 1.0_f64.max(smax);
    let near_singular = rel >= tol && rel <= 10.0 * tol;

    let mut report = CorrespondenceReport {
        in_set,
        core_invertible: core_report.invertible,
        agree: in_set == core_report.invertible,
        near_singular,
        value_residual: None,
        inverse_residual: None,
    };
    if in_set && core_report.invertible {
        let value = grass_resolvent(&dilation.point, &sigma, 1, 1, tol)?.value;
        let expect = s_lift.multiply(&core_report.inverse.unwrap())?;
        report.value_residual = Some(value.max_abs_diff(&expect)?);
        let t_lift = lift_inner(model.t(), n)?;
        let recovered = beta.sub(&t_lift)?.multiply(&value)?;
        let eye = LayeredMatrix::identity(1, n, k, a.mode());
        report.inverse_residual = Some(recovered.max_abs_diff(&eye)?);
    }
    Ok(report)
}
