//! Randomized verification suites with replayable failures.
//!
//! Each suite runs `cases` independent cases; case i draws every input
//! from a ChaCha8 stream seeded by `case_seed(master, i)`, so a failure
//! blob's seed and sizes replay that case bit for bit. Runs are
//! sequential and reports are byte-identical for a fixed configuration.
//!
//! Law gates are pinned per mode: identities must hold exactly (0.0) in
//! exact mode and to 1e-9 in float mode; the dilation suite uses 1e-8 for
//! value residuals, 1e-10 for unitarity, and 1e-9 for the graph-transform
//! round trip.

use crate::dilation::{graph_transform, halmos_dilation, resolvent_correspondence_check};
use crate::error::{Error, Result};
use crate::flag::{flag_affine_embed, FlagSignature};
use crate::grassmann::{
    affine_embed, direct_sum, gr_canonicalize, gr_equiv, pinch, similarity, GrassPoint,
};
use crate::json::matrix_to_json;
use crate::matrix::{LayeredMatrix, Mat, DEFAULT_TOL};
use crate::ncfunc::{
    check_intertwining, dd_apply, envelope_extend, first_order_difference_check, DomainPredicate,
    NcFunctionHandle, ScalingPolicy, Verdict,
};
use crate::resolvent::{
    flag_resolvent_equation_residual, flag_resolvent_set, grass_resolvent, in_resolvent_set,
    lift_inner, partial_converse_check, r_matrix, resolvent_equation_residual_cached,
    ProjectivePoint, ResolventCache,
};
use crate::sample::{case_seed, Sampler};
use crate::scalar::{Mode, Scalar};
use crate::subalgebra::SubalgebraSpec;
use serde_json::{json, Value};
use std::sync::Arc;

/// Suite names accepted by `run_suite`.
pub const SUITES: &[&str] = &[
    "reseq",
    "intertwining",
    "firstorder",
    "equiv-oracle",
    "resolvent-set",
    "dd-laws",
    "dilation",
    "converse",
    "flag",
    "negative",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub tol: f64,
    pub seed: u64,
    pub cases: usize,
    pub max_m: usize,
    pub max_n: usize,
    pub max_k: usize,
}

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        RunConfig { mode, tol: DEFAULT_TOL, seed: 0, cases: 50, max_m: 4, max_n: 3, max_k: 2 }
    }
}

/// Aggregated outcome of one suite run.
#[derive(Debug, Clone)]
pub struct VerdictReport {
    pub suite: String,
    pub cases: usize,
    pub passed: usize,
    pub max_residual: f64,
    pub failures: Vec<Value>,
}

impl VerdictReport {
    fn new(suite: &str) -> Self {
        VerdictReport {
            suite: suite.to_string(),
            cases: 0,
            passed: 0,
            max_residual: 0.0,
            failures: Vec::new(),
        }
    }

    fn record_pass(&mut self, residual: f64) {
        self.cases += 1;
        self.passed += 1;
        if residual.is_finite() {
            self.max_residual = self.max_residual.max(residual);
        }
    }

    fn record_fail(&mut self, residual: f64, blob: Value) {
        self.cases += 1;
        if residual.is_finite() {
            self.max_residual = self.max_residual.max(residual);
        }
        self.failures.push(blob);
    }

    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.passed == self.cases
    }

    pub fn to_json(&self) -> Value {
        json!({
            "suite": self.suite,
            "cases": self.cases,
            "passed": self.passed,
            "max_residual": self.max_residual,
            "failures": self.failures,
        })
    }
}

pub fn run_suite(name: &str, config: &RunConfig) -> Result<VerdictReport> {
    match name {
        "reseq" => suite_reseq(config),
        "intertwining" => suite_intertwining(config),
        "firstorder" => suite_firstorder(config),
        "equiv-oracle" => suite_equiv_oracle(config),
        "resolvent-set" => suite_resolvent_set(config),
        "dd-laws" => suite_dd_laws(config),
        "dilation" => suite_dilation(config),
        "converse" => suite_converse(config),
        "flag" => suite_flag(config),
        "negative" => suite_negative(config),
        other => Err(Error::UnknownSuite(other.to_string())),
    }
}

/// Identities hold exactly in exact mode, to 1e-9 in float mode.
fn law_gate(mode: Mode) -> f64 {
    match mode {
        Mode::Exact => 0.0,
        Mode::Float => 1e-9,
    }
}

fn positions(max_m: usize) -> Vec<(usize, usize)> {
    [(1, 2), (1, 3), (2, 3), (2, 4)]
        .into_iter()
        .filter(|&(_, m)| m <= max_m)
        .collect()
}

fn blob(case: usize, seed: u64, kind: &str, detail: Value) -> Value {
    json!({"case": case, "seed": seed, "kind": kind, "detail": detail})
}

/// Rank test independent of the group-quotient implementation: two classes
/// at one position coincide iff stacking their trailing column blocks does
/// not grow the column space beyond its full rank d*n*k.
pub fn equiv_oracle(a: &GrassPoint, b: &GrassPoint, tol: f64) -> Result<bool> {
    if (a.d(), a.m(), a.n(), a.k()) != (b.d(), b.m(), b.n(), b.k()) {
        return Err(Error::dim("oracle needs matching positions and layer sizes"));
    }
    let (d, m, cell) = (a.d(), a.m(), a.n() * a.k());
    let va = a.rep().mat().block(0, m * cell, (m - d) * cell, m * cell);
    let vb = b.rep().mat().block(0, m * cell, (m - d) * cell, m * cell);
    Ok(va.hcat(&vb)?.rank(tol) == d * cell)
}

/// Level-n class engineered off the resolvent set of pi: its trailing
/// outer column duplicates one of the amplified pi's trailing columns, so
/// the spliced r-matrix is singular by construction.
fn off_set_point(
    smp: &mut Sampler,
    pi: &ProjectivePoint,
    n: usize,
    tol: f64,
) -> Result<GrassPoint> {
    let d = pi.pairs_with_d();
    let m = pi.m();
    let k = pi.k();
    let cell = n * k;
    let amp = pi.amplify(n)?;
    let col = amp.rep().mat().block(0, m * cell, d * cell, (d + 1) * cell);
    for _ in 0..200 {
        let mut rep = smp.invertible_rep(m, n, k, tol).into_mat();
        rep.set_block(0, (m - 1) * cell, &col);
        let lay = LayeredMatrix::from_square(rep, m, n, k)?;
        if let Ok(p) = GrassPoint::new(d, m, lay, tol) {
            return Ok(p);
        }
    }
    Err(Error::NotInvertible("off-set sampling exhausted its attempts".into()))
}

// ------------------------------------------------------------------ reseq

fn suite_reseq(cfg: &RunConfig) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("reseq");
    let gate = law_gate(cfg.mode);
    let pos = positions(cfg.max_m);
    let policy = ScalingPolicy::default_for(cfg.mode);
    for i in 0..cfg.cases {
        let seed = case_seed(cfg.seed, i as u64);
        let mut smp = Sampler::new(seed, cfg.mode);
        let (d, m) = pos[i % pos.len()];
        let k = smp.size(cfg.max_k);
        let n = smp.size(cfg.max_n);
        let np = smp.size(cfg.max_n);
        let pi = smp.projective_point(d, m, k, cfg.tol);
        let (sigma, sigmap) = match (
            smp.point_in_resolvent_set(&pi, n, cfg.tol),
            smp.point_in_resolvent_set(&pi, np, cfg.tol),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                report.record_fail(f64::NAN, blob(i, seed, "sampling", json!(e.to_string())));
                continue;
            }
        };
        let x = smp.middle(n, np, k);
        let cache = ResolventCache::new(pi.clone(), cfg.tol);
        let mut worst = 0.0f64;
        let mut err: Option<String> = None;
        'slots: for s in 1..=(m - d) {
            for t in 1..=d {
                for v in 1..=d {
                    for u in 1..=(m - d) {
                        match resolvent_equation_residual_cached(
                            &cache, &sigma, &sigmap, s, t, v, u, &x, &policy, cfg.tol,
                        ) {
                            Ok(r) => worst = worst.max(r),
                            Err(e) => {
                                err = Some(format!("slot ({s},{t},{v},{u}): {e}"));
                                break 'slots;
                            }
                        }
                    }
                }
            }
        }
        if err.is_none() && worst <= gate {
            report.record_pass(worst);
        } else {
            report.record_fail(
                worst,
                blob(
                    i,
                    seed,
                    "reseq",
                    json!({
                        "position": [d, m],
                        "levels": [n, np],
                        "k": k,
                        "pi": matrix_to_json(pi.point().rep()),
                        "sigma": matrix_to_json(sigma.rep()),
                        "sigmap": matrix_to_json(sigmap.rep()),
                        "x": matrix_to_json(&x),
                        "residual": worst,
                        "error": err,
                    }),
                ),
            );
        }
    }
    Ok(report)
}

// ----------------------------------------------------------- intertwining

fn suite_intertwining(cfg: &RunConfig) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("intertwining");
    let pos = positions(cfg.max_m);
    for i in 0..cfg.cases {
        let seed = case_seed(cfg.seed, i as u64);
        let mut smp = Sampler::new(seed, cfg.mode);
        let (d, m) = pos[i % pos.len()];
        let k = smp.size(cfg.max_k);
        let n = smp.size(cfg.max_n);
        let np = smp.size(cfg.max_n);
        let pi = smp.projective_point(d, m, k, cfg.tol);
        let cache = ResolventCache::new(pi.clone(), cfg.tol);
        let v = smp.size(d);
        let u = smp.size(m - d);
        let f = cache.function(v, u)?;
        let (sigma, sigmap) = match (
            smp.point_in_resolvent_set(&pi, n, cfg.tol),
            smp.point_in_resolvent_set(&pi, np, cfg.tol),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                report.record_fail(f64::NAN, blob(i, seed, "sampling", json!(e.to_string())));
                continue;
            }
        };
        let outcome = match i % 5 {
            0 => {
                // inclusion of the first summand
                let sum = direct_sum(&sigma, &sigmap)?;
                let t = Mat::from_fn(n + np, n, cfg.mode, |r, c| {
                    Scalar::from_int(i64::from(r == c), cfg.mode)
                });
                check_intertwining(&f, &sum, &sigma, &t, cfg.tol)
            }
            1 => {
                // inclusion of the second summand
                let sum = direct_sum(&sigma, &sigmap)?;
                let t = Mat::from_fn(n + np, np, cfg.mode, |r, c| {
                    Scalar::from_int(i64::from(r == c + n), cfg.mode)
                });
                check_intertwining(&f, &sum, &sigmap, &t, cfg.tol)
            }
            2 => {
                // similarity witness: sigma against s sigma via s^-1
                let s = smp.invertible_mat(n, cfg.tol);
                let moved = similarity(&s, &sigma, cfg.tol)?;
                let s_inv = LayeredMatrix::new(s, 1, 1, n, n, 1)?
                    .invert(cfg.tol)?
                    .inverse
                    .ok_or_else(|| Error::NotInvertible("similarity factor".into()))?
                    .into_mat();
                check_intertwining(&f, &sigma, &moved, &s_inv, cfg.tol)
            }
            _ => {
                // random mixing, usually a failed hypothesis
                let t = smp.mat(n, np);
                check_intertwining(&f, &sigma, &sigmap, &t, cfg.tol)
            }
        };
        match outcome {
            Ok(cv) => match cv.verdict {
                Verdict::Violated => report.record_fail(
                    cv.residual.unwrap_or(f64::NAN),
                    blob(
                        i,
                        seed,
                        "intertwining",
                        json!({
                            "position": [d, m],
                            "k": k,
                            "witness_kind": i % 5,
                            "digest": cv.inputs_digest,
                            "residual": cv.residual,
                        }),
                    ),
                ),
                _ => report.record_pass(cv.residual.unwrap_or(0.0)),
            },
            Err(e) => report.record_fail(f64::NAN, blob(i, seed, "error", json!(e.to_string()))),
        }
    }
    Ok(report)
}

// ------------------------------------------------------------- firstorder

fn suite_firstorder(cfg: &RunConfig) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("firstorder");
    let gate = law_gate(cfg.mode);
    let pos = positions(cfg.max_m);
    let policy = ScalingPolicy::default_for(cfg.mode);
    for i in 0..cfg.cases {
        let seed = case_seed(cfg.seed, i as u64);
        let mut smp = Sampler::new(seed, cfg.mode);
        let (d, m) = pos[i % pos.len()];
        let k = smp.size(cfg.max_k);
        let n = smp.size(cfg.max_n);
        let pi = smp.projective_point(d, m, k, cfg.tol);
        let cache = ResolventCache::new(pi.clone(), cfg.tol);
        let f = match cache.function(smp.size(d), smp.size(m - d)) {
            Ok(f) => f,
            Err(e) => {
                report.record_fail(f64::NAN, blob(i, seed, "error", json!(e.to_string())));
                continue;
            }
        };
        let sigma = match smp.point_in_resolvent_set(&pi, n, cfg.tol) {
            Ok(s) => s,
            Err(e) => {
                report.record_fail(f64::NAN, blob(i, seed, "sampling", json!(e.to_string())));
                continue;
            }
        };
        let mut worst = 0.0f64;
        let mut err: Option<String> = None;
        'slots: for up in 1..=(m - d) {
            for vp in 1..=d {
                // shrink the shift if it happens to leave the domain
                let mut x = smp.middle(n, n, k);
                let mut done = false;
                for _ in 0..6 {
                    match first_order_difference_check(&f, &sigma, up, vp, &x, &policy, cfg.tol) {
                        Ok(cv) => {
                            worst = worst.max(cv.residual.unwrap_or(0.0));
                            done = true;
                            break;
                        }
                        Err(Error::DomainError(_)) => {
                            x = x.scale(&Scalar::from_ratio(1, 2, cfg.mode));
                        }
                        Err(e) => {
                            err = Some(format!("slot ({up},{vp}): {e}"));
                            break 'slots;
                        }
                    }
                }
                if !done && err.is_none() {
                    err = Some(format!("slot ({up},{vp}): no admissible shift found"));
                    break 'slots;
                }
            }
        }
        if err.is_none() && worst <= gate {
            report.record_pass(worst);
        } else {
            report.record_fail(
                worst,
                blob(
                    i,
                    seed,
                    "firstorder",
                    json!({
                        "position": [d, m],
                        "level": n,
                        "k": k,
                        "pi": matrix_to_json(pi.point().rep()),
                        "sigma": matrix_to_json(sigma.rep()),
                        "residual": worst,
                        "error": err,
                    }),
                ),
            );
        }
    }
    Ok(report)
}

// ------------------------------------------------------------ equiv-oracle

fn suite_equiv_oracle(cfg: &RunConfig) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("equiv-oracle");
    let pos = positions(cfg.max_m);
    for i in 0..cfg.cases {
        let seed = case_seed(cfg.seed, i as u64);
        let mut smp = Sampler::new(seed, cfg.mode);
        let (d, m) = pos[i % pos.len()];
        let k = smp.size(cfg.max_k);
        let n = smp.size(cfg.max_n);
        let kind = i % 3;
        let outcome = (|| -> Result<(GrassPoint, GrassPoint, Option<bool>)> {
            match kind {
                0 => {
                    // same class, different representative
                    let sigma = smp.grass_point(d, m, n, k, cfg.tol);
                    let g = smp.group_element(d, m, n, k, cfg.tol);
                    let tau =
                        GrassPoint::new(d, m, sigma.rep().multiply(&g)?, cfg.tol)?;
                    Ok((sigma, tau, Some(true)))
                }
                1 => {
                    // distinct chart coordinates parametrize injectively
                    let x = smp.coordinate(d, m, n, k);
                    let y = loop {
                        let y = smp.coordinate(d, m, n, k);
                        if y.mat() != x.mat() {
                            break y;
                        }
                    };
                    Ok((affine_embed(&x, d, m)?, affine_embed(&y, d, m)?, Some(false)))
                }
                _ => {
                    let sigma = smp.grass_point(d, m, n, k, cfg.tol);
                    let tau = smp.grass_point(d, m, n, k, cfg.tol);
                    Ok((sigma, tau, None))
                }
            }
        })();
        let (sigma, tau, expect) = match outcome {
            Ok(v) => v,
            Err(e) => {
                report.record_fail(f64::NAN, blob(i, seed, "error", json!(e.to_string())));
                continue;
            }
        };
        let verdicts = (|| -> Result<(bool, bool, Option<bool>)> {
            let quotient = gr_equiv(&sigma, &tau, cfg.tol)?;
            let oracle = equiv_oracle(&sigma, &tau, cfg.tol)?;
            // canonical forms vote too, where the form is exact
            let canon = if cfg.mode == Mode::Exact {
                let cs = gr_canonicalize(&sigma, cfg.tol)?;
                let ct = gr_canonicalize(&tau, cfg.tol)?;
                Some(cs.rep().mat() == ct.rep().mat())
            } else {
                None
            };
            Ok((quotient, oracle, canon))
        })();
        match verdicts {
            Ok((quotient, oracle, canon)) => {
                let consistent = quotient == oracle
                    && canon.map_or(true, |c| c == quotient)
                    && expect.map_or(true, |e| e == quotient);
                if consistent {
                    report.record_pass(0.0);
                } else {
                    report.record_fail(
                        f64::NAN,
                        blob(
                            i,
                            seed,
                            "equiv-disagreement",
                            json!({
                                "position": [d, m],
                                "level": n,
                                "k": k,
                                "engineered": expect,
                                "quotient": quotient,
                                "oracle": oracle,
                                "canonical": canon,
                                "sigma": matrix_to_json(sigma.rep()),
                                "tau": matrix_to_json(tau.rep()),
                            }),
                        ),
                    );
                }
            }
            Err(e) => report.record_fail(f64::NAN, blob(i, seed, "error", json!(e.to_string()))),
        }
    }
    Ok(report)
}

// ---------------------------------------------------------- resolvent-set

fn suite_resolvent_set(cfg: &RunConfig) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("resolvent-set");
    let pos = positions(cfg.max_m);
    for i in 0..cfg.cases {
        let seed = case_seed(cfg.seed, i as u64);
        let mut smp = Sampler::new(seed, cfg.mode);
        let (d, m) = pos[i % pos.len()];
        let k = smp.size(cfg.max_k);
        let n = smp.size(cfg.max_n);
        let np = smp.size(cfg.max_n);
        let pi = smp.projective_point(d, m, k, cfg.tol);
        let spec = SubalgebraSpec::full(k);
        let case = (|| -> Result<Option<Value>> {
            let a = smp.point_in_resolvent_set(&pi, n, cfg.tol)?;
            // alternate: both inside, or plant one engineered outside
            let b = if i % 2 == 0 {
                smp.point_in_resolvent_set(&pi, np, cfg.tol)?
            } else {
                off_set_point(&mut smp, &pi, np, cfg.tol)?
            };
            let in_a = in_resolvent_set(&pi, &a, &spec, cfg.tol)?;
            let in_b = in_resolvent_set(&pi, &b, &spec, cfg.tol)?;
            if !in_a || in_b != (i % 2 == 0) {
                return Ok(Some(json!({
                    "within": "engineered membership",
                    "in_a": in_a,
                    "in_b": in_b,
                })));
            }
            let (first, second) = if i % 4 == 3 { (&b, &a) } else { (&a, &b) };
            let sum = direct_sum(first, second)?;
            let in_sum = in_resolvent_set(&pi, &sum, &spec, cfg.tol)?;
            if in_sum != (in_a && in_b) {
                return Ok(Some(json!({
                    "within": "direct-sum biconditional",
                    "in_a": in_a,
                    "in_b": in_b,
                    "in_sum": in_sum,
                    "pi": matrix_to_json(pi.point().rep()),
                    "a": matrix_to_json(first.rep()),
                    "b": matrix_to_json(second.rep()),
                })));
            }
            // membership is a class property: similarity cannot change it
            let s = smp.invertible_mat(np, cfg.tol);
            let moved = similarity(&s, &b, cfg.tol)?;
            let in_moved = in_resolvent_set(&pi, &moved, &spec, cfg.tol)?;
            if in_moved != in_b {
                return Ok(Some(json!({
                    "within": "similarity invariance",
                    "in_b": in_b,
                    "in_moved": in_moved,
                    "pi": matrix_to_json(pi.point().rep()),
                    "b": matrix_to_json(b.rep()),
                })));
            }
            Ok(None)
        })();
        match case {
            Ok(None) => report.record_pass(0.0),
            Ok(Some(detail)) => {
                report.record_fail(f64::NAN, blob(i, seed, "resolvent-set", detail))
            }
            Err(e) => report.record_fail(f64::NAN, blob(i, seed, "error", json!(e.to_string()))),
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------- dd-laws

fn suite_dd_laws(cfg: &RunConfig) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("dd-laws");
    let gate = law_gate(cfg.mode);
    let pos = positions(cfg.max_m);
    let policy = ScalingPolicy::default_for(cfg.mode);
    for i in 0..cfg.cases {
        let seed = case_seed(cfg.seed, i as u64);
        let mut smp = Sampler::new(seed, cfg.mode);
        let (d, m) = pos[i % pos.len()];
        let k = smp.size(cfg.max_k);
        let n = smp.size(2);
        let np = smp.size(2);
        let nq = smp.size(2);
        let pi = smp.projective_point(d, m, k, cfg.tol);
        let cache = ResolventCache::new(pi.clone(), cfg.tol);
        let up = smp.size(m - d);
        let vp = smp.size(d);
        let case = (|| -> Result<f64> {
            let f = cache.function(smp.size(d), smp.size(m - d))?;
            let sigma = smp.point_in_resolvent_set(&pi, n, cfg.tol)?;
            let sigmap = smp.point_in_resolvent_set(&pi, np, cfg.tol)?;
            let sigmaq = smp.point_in_resolvent_set(&pi, nq, cfg.tol)?;
            let mut worst = 0.0f64;

            // additivity in the coefficient
            let x = smp.middle(n, np, k);
            let y = smp.middle(n, np, k);
            let both = dd_apply(&f, &sigma, &sigmap, up, vp, &x.add(&y)?, &policy, cfg.tol)?;
            let xv = dd_apply(&f, &sigma, &sigmap, up, vp, &x, &policy, cfg.tol)?;
            let yv = dd_apply(&f, &sigma, &sigmap, up, vp, &y, &policy, cfg.tol)?;
            worst = worst.max(both.value.max_abs_diff(&xv.value.add(&yv.value)?)?);

            // scalar homogeneity
            let c = loop {
                let c = smp.scalar();
                if !c.is_zero() {
                    break c;
                }
            };
            let scaled = dd_apply(&f, &sigma, &sigmap, up, vp, &x.scale(&c), &policy, cfg.tol)?;
            worst = worst.max(scaled.value.max_abs_diff(&xv.value.scale(&c))?);

            // direct sum in the first argument
            let x0 = smp.middle(n, nq, k);
            let y0 = smp.middle(np, nq, k);
            let sum = direct_sum(&sigma, &sigmap)?;
            let stacked =
                dd_apply(&f, &sum, &sigmaq, up, vp, &x0.mid_vcat(&y0)?, &policy, cfg.tol)?;
            let top = dd_apply(&f, &sigma, &sigmaq, up, vp, &x0, &policy, cfg.tol)?;
            let bottom = dd_apply(&f, &sigmap, &sigmaq, up, vp, &y0, &policy, cfg.tol)?;
            worst =
                worst.max(stacked.value.max_abs_diff(&top.value.mid_vcat(&bottom.value)?)?);

            // direct sum in the second argument
            let x1 = smp.middle(n, np, k);
            let y1 = smp.middle(n, nq, k);
            let sump = direct_sum(&sigmap, &sigmaq)?;
            let joined =
                dd_apply(&f, &sigma, &sump, up, vp, &x1.mid_hcat(&y1)?, &policy, cfg.tol)?;
            let left = dd_apply(&f, &sigma, &sigmap, up, vp, &x1, &policy, cfg.tol)?;
            let right = dd_apply(&f, &sigma, &sigmaq, up, vp, &y1, &policy, cfg.tol)?;
            worst =
                worst.max(joined.value.max_abs_diff(&left.value.mid_hcat(&right.value)?)?);

            // similarity covariance
            let s0 = smp.invertible_mat(n, cfg.tol);
            let s1 = smp.invertible_mat(np, cfg.tol);
            let moved0 = similarity(&s0, &sigma, cfg.tol)?;
            let moved1 = similarity(&s1, &sigmap, cfg.tol)?;
            let lift = |s: &Mat| -> Result<LayeredMatrix> {
                let side = s.rows();
                LayeredMatrix::new(s.kron(&Mat::identity(k, cfg.mode)), 1, 1, side, side, k)
            };
            let s0_inv = LayeredMatrix::new(s0.clone(), 1, 1, n, n, 1)?
                .invert(cfg.tol)?
                .inverse
                .ok_or_else(|| Error::NotInvertible("first similarity factor".into()))?
                .into_mat();
            let s1_inv = LayeredMatrix::new(s1.clone(), 1, 1, np, np, 1)?
                .invert(cfg.tol)?
                .inverse
                .ok_or_else(|| Error::NotInvertible("second similarity factor".into()))?
                .into_mat();
            let x_conj = lift(&s0_inv)?.multiply(&x)?.multiply(&lift(&s1)?)?;
            let lhs = dd_apply(&f, &moved0, &moved1, up, vp, &x, &policy, cfg.tol)?;
            let rhs = lift(&s0)?
                .multiply(&dd_apply(&f, &sigma, &sigmap, up, vp, &x_conj, &policy, cfg.tol)?.value)?
                .multiply(&lift(&s1_inv)?)?;
            worst = worst.max(lhs.value.max_abs_diff(&rhs)?);

            Ok(worst)
        })();
        match case {
            Ok(worst) if worst <= gate => report.record_pass(worst),
            Ok(worst) => report.record_fail(
                worst,
                blob(
                    i,
                    seed,
                    "dd-laws",
                    json!({
                        "position": [d, m],
                        "k": k,
                        "pi": matrix_to_json(pi.point().rep()),
                        "residual": worst,
                    }),
                ),
            ),
            Err(e) => report.record_fail(f64::NAN, blob(i, seed, "error", json!(e.to_string()))),
        }
    }
    Ok(report)
}

// --------------------------------------------------------------- dilation

fn suite_dilation(cfg: &RunConfig) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("dilation");
    let mut near_singular = 0usize;
    for i in 0..cfg.cases {
        let seed = case_seed(cfg.seed, i as u64);
        // square roots force float arithmetic regardless of the run mode
        let mut smp = Sampler::new(seed, Mode::Float);
        let k = smp.size(3);
        let n = smp.size(2);
        let a = smp.pure_contraction(k, 0.95);
        let beta = smp.middle(n, n, k);
        let case = (|| -> Result<(bool, f64, Value)> {
            let hal = halmos_dilation(&a, cfg.tol)?;
            let model = graph_transform(&a, cfg.tol)?;
            let round_trip = model.contraction(cfg.tol)?.max_abs_diff(&a)?;
            let rep = resolvent_correspondence_check(&a, &beta, cfg.tol)?;
            if rep.near_singular {
                near_singular += 1;
            }
            let residual = rep
                .value_residual
                .unwrap_or(0.0)
                .max(rep.inverse_residual.unwrap_or(0.0));
            let ok = (rep.agree || rep.near_singular)
                && residual <= 1e-8
                && hal.unitarity_defect <= 1e-10
                && round_trip <= 1e-9;
            let detail = json!({
                "k": k,
                "level": n,
                "agree": rep.agree,
                "near_singular": rep.near_singular,
                "in_set": rep.in_set,
                "core_invertible": rep.core_invertible,
                "value_residual": rep.value_residual,
                "inverse_residual": rep.inverse_residual,
                "unitarity_defect": hal.unitarity_defect,
                "round_trip": round_trip,
                "a": mat_json(&a)?,
                "beta": matrix_to_json(&beta),
            });
            Ok((ok, residual, detail))
        })();
        match case {
            Ok((true, residual, _)) => report.record_pass(residual),
            Ok((false, residual, detail)) => {
                report.record_fail(residual, blob(i, seed, "dilation", detail))
            }
            Err(e) => report.record_fail(f64::NAN, blob(i, seed, "error", json!(e.to_string()))),
        }
    }
    // the flagged zone must stay rare: under 2% of cases
    if near_singular * 50 > cfg.cases {
        let detail = json!({"near_singular": near_singular, "cases": cfg.cases});
        report.failures.push(blob(cfg.cases, cfg.seed, "near-singular-budget", detail));
    }
    Ok(report)
}

fn mat_json(m: &Mat) -> Result<Value> {
    crate::json::mat_to_json(m)
}

// --------------------------------------------------------------- converse

fn suite_converse(cfg: &RunConfig) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("converse");
    for i in 0..cfg.cases {
        let seed = case_seed(cfg.seed, i as u64);
        // the construction is rational throughout, so run it exactly
        let mut smp = Sampler::new(seed, Mode::Exact);
        let k = smp.size(cfg.max_k.min(2));
        let case = (|| -> Result<(bool, f64, Value)> {
            let a = smp.mat(k, k);
            let b = smp.invertible_mat(k, cfg.tol);
            let admissible = |beta: &LayeredMatrix| -> Result<bool> {
                let n = beta.mid_rows();
                let core = beta.multiply(&lift_inner(&b, n)?)?.sub(&lift_inner(&a, n)?)?;
                Ok(core.invert(cfg.tol)?.invertible)
            };
            let mut draw = |n: usize| -> Result<LayeredMatrix> {
                for _ in 0..100 {
                    let beta = smp.middle(n, n, k);
                    if admissible(&beta)? {
                        return Ok(beta);
                    }
                }
                Err(Error::NotInvertible("no admissible sample found".into()))
            };
            let beta0 = draw(1)?;
            let mut samples = Vec::with_capacity(8);
            for idx in 0..8 {
                samples.push(draw(1 + idx % 2)?);
            }
            let rep = partial_converse_check(&a, &b, &samples, &beta0, cfg.tol)?;
            let residual = rep
                .max_dd_residual
                .max(rep.max_constancy_residual)
                .max(rep.max_agreement_residual);
            let detail = json!({
                "k": k,
                "a": mat_json(&a)?,
                "b": mat_json(&b)?,
                "pairs_checked": rep.pairs_checked,
                "dd_residual": rep.max_dd_residual,
                "constancy_residual": rep.max_constancy_residual,
                "agreement_residual": rep.max_agreement_residual,
            });
            Ok((rep.pass && residual == 0.0, residual, detail))
        })();
        match case {
            Ok((true, residual, _)) => report.record_pass(residual),
            Ok((false, residual, detail)) => {
                report.record_fail(residual, blob(i, seed, "converse", detail))
            }
            Err(e) => report.record_fail(f64::NAN, blob(i, seed, "error", json!(e.to_string()))),
        }
    }
    Ok(report)
}

// ------------------------------------------------------------------- flag

fn suite_flag(cfg: &RunConfig) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("flag");
    let gate = law_gate(cfg.mode);
    let sigs: Vec<(Vec<usize>, usize)> = [(vec![1, 2], 3), (vec![1, 3], 4)]
        .into_iter()
        .filter(|&(_, m)| m <= cfg.max_m)
        .collect();
    let policy = ScalingPolicy::default_for(cfg.mode);
    for i in 0..cfg.cases {
        let seed = case_seed(cfg.seed, i as u64);
        let mut smp = Sampler::new(seed, cfg.mode);
        let (dims, m) = sigs[i % sigs.len()].clone();
        let sig = FlagSignature::new(dims, m)?;
        let k = smp.size(cfg.max_k);
        let n = smp.size(2);
        let spec = SubalgebraSpec::full(k);
        let case = (|| -> Result<(f64, Value)> {
            let depth = sig.depth();
            let (pi, phi, phip) = 'found: {
                for _ in 0..40 {
                    let pi = smp.flag_point(&sig.dual(), 1, k, cfg.tol);
                    let mut pair = Vec::new();
                    for _ in 0..60 {
                        let cand = smp.flag_point(&sig, n, k, cfg.tol);
                        if flag_resolvent_set(&pi, &cand, &spec, cfg.tol)? {
                            pair.push(cand);
                            if pair.len() == 2 {
                                break;
                            }
                        }
                    }
                    if pair.len() == 2 {
                        let phip = pair.pop().unwrap();
                        let phi = pair.pop().unwrap();
                        break 'found (pi, phi, phip);
                    }
                }
                return Err(Error::NotTransversal);
            };
            let j = 1 + (i / sigs.len()) % depth;
            let dj = sig.dim(j)?;
            let dprev = if j >= 2 { sig.dim(j - 1)? } else { 0 };
            let x = smp.middle(n, n, k);
            let mut worst = 0.0f64;
            for s in 1..=(m - dj) {
                for t in 1..=(dj - dprev) {
                    for v in 1..=(dj - dprev) {
                        for u in 1..=(m - dj) {
                            let r = flag_resolvent_equation_residual(
                                &pi, &phi, &phip, j, s, t, v, u, &x, &policy, cfg.tol,
                            )?;
                            worst = worst.max(r);
                        }
                    }
                }
            }
            let detail = json!({
                "signature": sig.dims(),
                "m": m,
                "level": j,
                "k": k,
                "n": n,
                "pi": matrix_to_json(pi.rep()),
                "phi": matrix_to_json(phi.rep()),
                "phip": matrix_to_json(phip.rep()),
                "x": matrix_to_json(&x),
                "residual": worst,
            });
            Ok((worst, detail))
        })();
        match case {
            Ok((worst, _)) if worst <= gate => report.record_pass(worst),
            Ok((worst, detail)) => report.record_fail(worst, blob(i, seed, "flag", detail)),
            Err(e) => report.record_fail(f64::NAN, blob(i, seed, "error", json!(e.to_string()))),
        }
    }
    Ok(report)
}

// --------------------------------------------------------------- negative

/// Controls that must fire: each closure returns Ok(()) when the expected
/// rejection happened and a description when it failed to.
fn suite_negative(cfg: &RunConfig) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("negative");
    type Control = (&'static str, fn(&mut Sampler, f64) -> std::result::Result<(), String>);
    let controls: &[Control] = &[
        ("distinct-charts-inequivalent", |smp, tol| {
            let (d, m, n, k) = (1 + smp.index(2), 3, smp.size(2), smp.size(2));
            let x = smp.coordinate(d, m, n, k);
            let y = loop {
                let y = smp.coordinate(d, m, n, k);
                if y.mat() != x.mat() {
                    break y;
                }
            };
            let a = affine_embed(&x, d, m).map_err(|e| e.to_string())?;
            let b = affine_embed(&y, d, m).map_err(|e| e.to_string())?;
            match gr_equiv(&a, &b, tol) {
                Ok(false) => Ok(()),
                other => Err(format!("expected inequivalence, got {other:?}")),
            }
        }),
        ("resolvent-off-set", |smp, tol| {
            let v = smp.scalar();
            let x = LayeredMatrix::new(
                Mat::from_fn(1, 1, v.mode(), |_, _| v.clone()),
                1,
                1,
                1,
                1,
                1,
            )
            .unwrap();
            let sigma = affine_embed(&x, 1, 2).map_err(|e| e.to_string())?;
            let pi = ProjectivePoint::new(sigma.clone()).map_err(|e| e.to_string())?;
            match grass_resolvent(&pi, &sigma, 1, 1, tol) {
                Err(Error::NotTransversal) => Ok(()),
                other => Err(format!("expected NotTransversal, got {other:?}")),
            }
        }),
        ("subalgebra-gate", |smp, tol| {
            let mut cell = Mat::identity(2, smp.mode());
            cell.set(0, 1, Scalar::from_int(1, smp.mode()));
            let x = LayeredMatrix::new(cell, 1, 1, 1, 1, 2).unwrap();
            let sigma = affine_embed(&x, 1, 2).map_err(|e| e.to_string())?;
            let pi_rep = {
                let mut r = Mat::zeros(4, 4, smp.mode());
                r.set_block(0, 2, &Mat::identity(2, smp.mode()));
                r.set_block(2, 0, &Mat::identity(2, smp.mode()));
                LayeredMatrix::new(r, 2, 2, 1, 1, 2).unwrap()
            };
            let pi = ProjectivePoint::from_rep(1, 2, pi_rep, tol).map_err(|e| e.to_string())?;
            let spec = SubalgebraSpec::scalars(2, tol);
            match in_resolvent_set(&pi, &sigma, &spec, tol) {
                Err(Error::NotInSubalgebra) => Ok(()),
                other => Err(format!("expected NotInSubalgebra, got {other:?}")),
            }
        }),
        ("tampered-evaluator", |smp, tol| {
            let mode = smp.mode();
            let one = |v: i64| {
                LayeredMatrix::new(Mat::from_i64(&[&[v]], mode), 1, 1, 1, 1, 1).unwrap()
            };
            let pi = ProjectivePoint::new(affine_embed(&one(0), 1, 2).unwrap()).unwrap();
            let cache = ResolventCache::new(pi.clone(), tol);
            let dom = cache.clone();
            let domain = DomainPredicate::new(
                Arc::new(move |s: &GrassPoint| Ok(dom.table(s)?.is_some())),
                true,
            );
            let evl = cache.clone();
            let broken = NcFunctionHandle::new(
                1,
                2,
                1,
                1,
                domain,
                Arc::new(move |s: &GrassPoint| {
                    let mut v = evl.value(s, 1, 1)?.value;
                    if s.n() % 2 == 0 {
                        // corrupt even levels so the triangular shape breaks
                        v = v.add(&LayeredMatrix::identity(1, s.n(), 1, v.mode()))?;
                    }
                    Ok(v)
                }),
            )
            .map_err(|e| e.to_string())?;
            let sigma = affine_embed(&one(1), 1, 2).unwrap();
            let sigmap = affine_embed(&one(2), 1, 2).unwrap();
            match dd_apply(
                &broken,
                &sigma,
                &sigmap,
                1,
                1,
                &one(1),
                &ScalingPolicy::default_for(mode),
                tol,
            ) {
                Err(Error::StructureError(_)) => Ok(()),
                other => Err(format!("expected StructureError, got {other:?}")),
            }
        }),
        ("pinch-slot-range", |smp, _tol| {
            let mode = smp.mode();
            let one = |v: i64| {
                LayeredMatrix::new(Mat::from_i64(&[&[v]], mode), 1, 1, 1, 1, 1).unwrap()
            };
            let sigma = affine_embed(&one(1), 1, 2).unwrap();
            let sigmap = affine_embed(&one(2), 1, 2).unwrap();
            match pinch(&sigma, &sigmap, 2, 1, &one(1)) {
                Err(Error::IndexOutOfRange(_)) => Ok(()),
                other => Err(format!("expected IndexOutOfRange, got {other:?}")),
            }
        }),
        ("first-order-domain", |smp, tol| {
            let mode = smp.mode();
            let one = |v: i64| {
                LayeredMatrix::new(Mat::from_i64(&[&[v]], mode), 1, 1, 1, 1, 1).unwrap()
            };
            // shifting beta = 3 by x = 2 lands exactly on the pole a = 1
            let pi = ProjectivePoint::new(affine_embed(&one(1), 1, 2).unwrap()).unwrap();
            let cache = ResolventCache::new(pi, tol);
            let f = cache.function(1, 1).map_err(|e| e.to_string())?;
            let sigma = affine_embed(&one(3), 1, 2).unwrap();
            match first_order_difference_check(
                &f,
                &sigma,
                1,
                1,
                &one(2),
                &ScalingPolicy::default_for(mode),
                tol,
            ) {
                Err(Error::DomainError(_)) => Ok(()),
                other => Err(format!("expected DomainError, got {other:?}")),
            }
        }),
        ("ladder-exhausted", |smp, tol| {
            let mode = smp.mode();
            let one = |v: i64| {
                LayeredMatrix::new(Mat::from_i64(&[&[v]], mode), 1, 1, 1, 1, 1).unwrap()
            };
            let pi = ProjectivePoint::new(affine_embed(&one(0), 1, 2).unwrap()).unwrap();
            let cache = ResolventCache::new(pi, tol);
            let dom = cache.clone();
            // domain narrowed by a hard norm cap the pinch must overflow
            let domain = DomainPredicate::new(
                Arc::new(move |s: &GrassPoint| {
                    Ok(dom.table(s)?.is_some() && s.rep().norm_max() <= 8.0)
                }),
                true,
            );
            let evl = cache.clone();
            let f = NcFunctionHandle::new(
                1,
                2,
                1,
                1,
                domain,
                Arc::new(move |s: &GrassPoint| Ok(evl.value(s, 1, 1)?.value)),
            )
            .map_err(|e| e.to_string())?;
            let sigma = affine_embed(&one(1), 1, 2).unwrap();
            let sigmap = affine_embed(&one(2), 1, 2).unwrap();
            match dd_apply(
                &f,
                &sigma,
                &sigmap,
                1,
                1,
                &one(1000),
                &ScalingPolicy::unit(),
                tol,
            ) {
                Err(Error::AdmissibilityError) => Ok(()),
                other => Err(format!("expected AdmissibilityError, got {other:?}")),
            }
        }),
        ("dilation-non-contraction", |_smp, tol| {
            let a = Mat::from_fn(1, 1, Mode::Float, |_, _| {
                Scalar::from_c64(num::complex::Complex64::new(1.5, 0.0))
            });
            match halmos_dilation(&a, tol) {
                Err(Error::NotPureContraction(_)) => Ok(()),
                other => Err(format!("expected NotPureContraction, got {other:?}")),
            }
        }),
        ("dilation-exact-mode", |_smp, tol| {
            let a = Mat::from_i64(&[&[0]], Mode::Exact);
            match crate::dilation::is_pure_contraction(&a, tol) {
                Err(Error::ExactModeUnsupported(_)) => Ok(()),
                other => Err(format!("expected ExactModeUnsupported, got {other:?}")),
            }
        }),
        ("json-malformed", |_smp, _tol| {
            let v = json!({"m": 1, "n": 1, "k": 1, "mode": "float"});
            match crate::json::matrix_from_json(&v) {
                Err(Error::Parse(_)) => Ok(()),
                other => Err(format!("expected Parse error, got {other:?}")),
            }
        }),
        ("signature-not-increasing", |_smp, _tol| {
            match FlagSignature::new(vec![2, 2], 3) {
                Err(Error::SignatureMismatch(_)) => Ok(()),
                other => Err(format!("expected SignatureMismatch, got {other:?}")),
            }
        }),
        ("basis-not-closed", |smp, tol| {
            let mode = smp.mode();
            let e12 = Mat::from_i64(&[&[0, 1], &[0, 0]], mode);
            let e21 = Mat::from_i64(&[&[0, 0], &[1, 0]], mode);
            let eye = Mat::identity(2, mode);
            match SubalgebraSpec::basis(vec![eye, e12, e21], tol) {
                Err(Error::Parse(_)) => Ok(()),
                other => Err(format!("expected Parse error, got {other:?}")),
            }
        }),
        ("envelope-witness-required", |smp, tol| {
            let mode = smp.mode();
            let one = |v: i64| {
                LayeredMatrix::new(Mat::from_i64(&[&[v]], mode), 1, 1, 1, 1, 1).unwrap()
            };
            let pi = ProjectivePoint::new(affine_embed(&one(0), 1, 2).unwrap()).unwrap();
            let cache = ResolventCache::new(pi, tol);
            let f = cache.function(1, 1).map_err(|e| e.to_string())?;
            let pole = affine_embed(&one(0), 1, 2).unwrap();
            match f.evaluate(&pole) {
                Err(Error::DomainError(_)) => {}
                other => return Err(format!("expected DomainError, got {other:?}")),
            }
            match envelope_extend(&f).evaluate(&pole) {
                Err(Error::WitnessRequired) => Ok(()),
                other => Err(format!("expected WitnessRequired, got {other:?}")),
            }
        }),
        ("pairing-position-mismatch", |smp, tol| {
            let a = smp.grass_point(1, 3, 1, 1, tol);
            let b = smp.grass_point(1, 3, 1, 1, tol);
            match r_matrix(&a, &b) {
                Err(Error::DimensionMismatch(_)) => Ok(()),
                other => Err(format!("expected DimensionMismatch, got {other:?}")),
            }
        }),
        ("singular-representative", |smp, tol| {
            let rep = LayeredMatrix::zeros(2, 2, 1, 1, 1, smp.mode());
            match GrassPoint::new(1, 2, rep, tol) {
                Err(Error::NotInvertible(_)) => Ok(()),
                other => Err(format!("expected NotInvertible, got {other:?}")),
            }
        }),
        ("flag-chart-shape", |smp, _tol| {
            let sig = FlagSignature::new(vec![1, 2], 3).unwrap();
            let wrong = smp.middle(1, 1, 1);
            // a depth-2 chart needs three coefficients, not one
            match flag_affine_embed(&[vec![wrong]], &sig) {
                Err(_) => Ok(()),
                other => Err(format!("expected a shape rejection, got {other:?}")),
            }
        }),
    ];
    let rounds = cfg.cases.div_ceil(controls.len());
    for round in 0..rounds {
        for (ci, (name, control)) in controls.iter().enumerate() {
            let case = round * controls.len() + ci;
            if case >= cfg.cases.max(controls.len()) {
                break;
            }
            let seed = case_seed(cfg.seed, case as u64);
            let mut smp = Sampler::new(seed, cfg.mode);
            match control(&mut smp, cfg.tol) {
                Ok(()) => report.record_pass(0.0),
                Err(msg) => report.record_fail(
                    f64::NAN,
                    blob(case, seed, "control-misfire", json!({"control": name, "detail": msg})),
                ),
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: Mode, cases: usize, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::new(mode);
        cfg.cases = cases;
        cfg.seed = seed;
        cfg
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(matches!(
            run_suite("nope", &RunConfig::new(Mode::Exact)),
            Err(Error::UnknownSuite(_))
        ));
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = small(Mode::Exact, 6, 42);
        let a = run_suite("equiv-oracle", &cfg).unwrap();
        let b = run_suite("equiv-oracle", &cfg).unwrap();
        assert_eq!(a.to_json().to_string(), b.to_json().to_string());
        assert!(a.all_passed(), "{}", a.to_json());
    }

    #[test]
    fn every_suite_runs_clean_on_a_small_exact_budget() {
        for suite in SUITES {
            let cases = if *suite == "negative" { 16 } else { 4 };
            let report = run_suite(suite, &small(Mode::Exact, cases, 7)).unwrap();
            assert!(report.all_passed(), "suite {suite}: {}", report.to_json());
        }
    }

    #[test]
    fn every_suite_runs_clean_on_a_small_float_budget() {
        for suite in SUITES {
            let cases = if *suite == "negative" { 16 } else { 4 };
            let report = run_suite(suite, &small(Mode::Float, cases, 9)).unwrap();
            assert!(report.all_passed(), "suite {suite}: {}", report.to_json());
        }
    }

    #[test]
    fn oracle_matches_quotient_on_engineered_pairs() {
        let mut smp = Sampler::new(5, Mode::Exact);
        let sigma = smp.grass_point(1, 3, 2, 1, DEFAULT_TOL);
        let g = smp.group_element(1, 3, 2, 1, DEFAULT_TOL);
        let tau = GrassPoint::new(1, 3, sigma.rep().multiply(&g).unwrap(), DEFAULT_TOL).unwrap();
        assert!(equiv_oracle(&sigma, &tau, DEFAULT_TOL).unwrap());
        let other = smp.grass_point(1, 3, 2, 1, DEFAULT_TOL);
        assert_eq!(
            equiv_oracle(&sigma, &other, DEFAULT_TOL).unwrap(),
            gr_equiv(&sigma, &other, DEFAULT_TOL).unwrap()
        );
    }
}
