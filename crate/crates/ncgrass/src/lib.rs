//! Linear algebra for noncommutative Grassmannians and flag manifolds.
//!
//! Points are invertible three-layer block matrices up to a lower-block-
//! triangular equivalence; the crate provides the quotient tests, canonical
//! forms, difference-differential operators of nc functions on these
//! quotients, Grassmannian resolvents, and the contraction/dilation bridge,
//! in exact (Gaussian rational) and float (complex double) arithmetic.

pub mod dilation;
pub mod error;
pub mod flag;
pub mod grassmann;
pub mod harness;
pub mod json;
pub mod matrix;
pub mod ncfunc;
pub mod resolvent;
pub mod sample;
pub mod scalar;
pub mod subalgebra;

pub use dilation::{graph_transform, halmos_dilation, is_pure_contraction, resolvent_correspondence_check, ClosedOperatorModel, CorrespondenceReport, HalmosDilation};
pub use error::{Error, Result};
pub use flag::{FlagPoint, FlagSignature};
pub use grassmann::GrassPoint;
pub use harness::{equiv_oracle, run_suite, RunConfig, VerdictReport, SUITES};
pub use ncfunc::{check_direct_sum, check_intertwining, check_similarity, dd_apply, dd_flag_apply, envelope_extend, first_order_difference_check, CheckVerdict, DdValue, DomainPredicate, NcFunctionHandle, ScalingPolicy, Verdict};
pub use matrix::{scalar_similarity_lift, InvertibilityReport, LayeredMatrix, Mat, DEFAULT_TOL};
pub use resolvent::{flag_resolvent, flag_resolvent_equation_residual, flag_resolvent_set, grass_resolvent, in_resolvent_set, is_transversal, partial_converse_check, r_matrix, resolvent_equation_residual, resolvent_equation_residual_cached, resolvent_function, ConverseReport, ResolventCache, ProjectivePoint, ResolventTable, ResolventValue};
pub use scalar::{GaussRat, Mode, Scalar};
pub use subalgebra::{SubalgebraKind, SubalgebraSpec};
