//! End-to-end tests of the binary: verb behavior, exit codes, and
//! reproducibility of `verify` output.

use ncgrass::grassmann::affine_embed;
use ncgrass::json::{flag_to_json, grass_to_json, mat_to_json, matrix_to_json};
use ncgrass::matrix::{LayeredMatrix, Mat, DEFAULT_TOL};
use ncgrass::resolvent::flag_resolvent_set;
use ncgrass::sample::Sampler;
use ncgrass::scalar::Mode;
use ncgrass::subalgebra::SubalgebraSpec;
use ncgrass::flag::FlagSignature;
use serde_json::Value;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::atomic::{AtomicU32, Ordering};

static DIR_SEQ: AtomicU32 = AtomicU32::new(0);

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ncgrass")
}

/// Fresh scratch directory per test, under the target-adjacent temp root.
fn scratch() -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "ncgrass-cli-{}-{}",
        std::process::id(),
        DIR_SEQ.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, v.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {:?}", out))
}

fn scalar_embed(v: i64) -> ncgrass::grassmann::GrassPoint {
    let x = LayeredMatrix::new(Mat::from_i64(&[&[v]], Mode::Exact), 1, 1, 1, 1, 1).unwrap();
    affine_embed(&x, 1, 2).unwrap()
}

#[test]
fn embed_extract_round_trip() {
    let dir = scratch();
    let x = serde_json::json!({
        "m": 1, "n": 1, "k": 1, "mode": "exact", "data": [["5/3", "-1/2"]]
    });
    let xp = write_json(&dir, "x.json", &x);
    let embedded = run(&["embed", &xp, "--d", "1", "--m", "2"]);
    assert_eq!(embedded.status.code(), Some(0));
    let pp = write_json(&dir, "p.json", &stdout_json(&embedded));
    let extracted = run(&["extract", &pp]);
    assert_eq!(extracted.status.code(), Some(0));
    let got = stdout_json(&extracted);
    assert_eq!(got["reachable"], Value::Bool(true));
    assert_eq!(got["coordinate"]["data"], x["data"]);
}

#[test]
fn extract_reports_unreachable_charts_with_exit_1() {
    let dir = scratch();
    // identity representative: the chart's corner block is zero
    let p = serde_json::json!({
        "d": 1, "m": 2,
        "rep": {"m": 2, "n": 1, "k": 1, "mode": "exact",
                "data": [["1", "0"], ["0", "0"], ["0", "0"], ["1", "0"]]}
    });
    let pp = write_json(&dir, "p.json", &p);
    let out = run(&["extract", &pp]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["reachable"], Value::Bool(false));
}

#[test]
fn equiv_exit_codes_follow_the_verdict() {
    let dir = scratch();
    let p1 = write_json(&dir, "p1.json", &grass_to_json(&scalar_embed(1)));
    let p3 = write_json(&dir, "p3.json", &grass_to_json(&scalar_embed(3)));
    let same = run(&["equiv", &p1, &p1]);
    assert_eq!(same.status.code(), Some(0));
    assert_eq!(stdout_json(&same)["equivalent"], Value::Bool(true));
    let diff = run(&["equiv", &p1, &p3]);
    assert_eq!(diff.status.code(), Some(1));
    assert_eq!(stdout_json(&diff)["equivalent"], Value::Bool(false));
}

#[test]
fn canon_is_idempotent_and_class_invariant() {
    let dir = scratch();
    let mut smp = Sampler::new(11, Mode::Exact);
    let sigma = smp.grass_point(1, 3, 2, 1, DEFAULT_TOL);
    let g = smp.group_element(1, 3, 2, 1, DEFAULT_TOL);
    let moved = ncgrass::grassmann::GrassPoint::new(
        1,
        3,
        sigma.rep().multiply(&g).unwrap(),
        DEFAULT_TOL,
    )
    .unwrap();
    let a = write_json(&dir, "a.json", &grass_to_json(&sigma));
    let b = write_json(&dir, "b.json", &grass_to_json(&moved));
    let ca = run(&["canon", &a]);
    let cb = run(&["canon", &b]);
    assert_eq!(ca.status.code(), Some(0));
    assert_eq!(ca.stdout, cb.stdout, "canonical forms of one class differ");
    let cpath = write_json(&dir, "c.json", &stdout_json(&ca));
    let cc = run(&["canon", &cpath]);
    assert_eq!(cc.stdout, ca.stdout, "canonical form is not a fixed point");
}

#[test]
fn dsum_sim_shift_pinch_produce_consumable_points() {
    let dir = scratch();
    let mut smp = Sampler::new(23, Mode::Exact);
    let sigma = smp.grass_point(1, 2, 1, 1, DEFAULT_TOL);
    let tau = smp.grass_point(1, 2, 2, 1, DEFAULT_TOL);
    let a = write_json(&dir, "a.json", &grass_to_json(&sigma));
    let b = write_json(&dir, "b.json", &grass_to_json(&tau));

    let sum = run(&["dsum", &a, &b]);
    assert_eq!(sum.status.code(), Some(0));
    let sum_v = stdout_json(&sum);
    assert_eq!(sum_v["rep"]["n"], serde_json::json!(3));
    let sump = write_json(&dir, "sum.json", &sum_v);

    let s = write_json(&dir, "s.json", &mat_to_json(&smp.invertible_mat(3, DEFAULT_TOL)).unwrap());
    let moved = run(&["sim", &s, &sump]);
    assert_eq!(moved.status.code(), Some(0));

    let y = write_json(
        &dir,
        "y.json",
        &matrix_to_json(&smp.middle(3, 3, 1)),
    );
    let shifted = run(&["shift", &sump, &y]);
    assert_eq!(shifted.status.code(), Some(0));

    let x = write_json(&dir, "x.json", &matrix_to_json(&smp.middle(1, 2, 1)));
    let pinched = run(&["pinch", &a, &b, &x, "--u", "1", "--v", "1"]);
    assert_eq!(pinched.status.code(), Some(0));
    let pv = stdout_json(&pinched);
    assert_eq!(pv["rep"]["n"], serde_json::json!(3));

    // every produced point is a valid input again
    let pp = write_json(&dir, "pinched.json", &pv);
    let echo = run(&["equiv", &pp, &pp]);
    assert_eq!(echo.status.code(), Some(0));
}

#[test]
fn resolvent_matches_the_scalar_formula() {
    let dir = scratch();
    let pi = write_json(&dir, "pi.json", &grass_to_json(&scalar_embed(1)));
    let sig = write_json(&dir, "sigma.json", &grass_to_json(&scalar_embed(3)));
    let out = run(&["resolvent", &pi, &sig, "--v", "1", "--u", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    // (3 - 1)^{-1} = 1/2
    assert_eq!(v["value"]["data"][0][0], Value::String("1/2".into()));
}

#[test]
fn rmat_reproduces_the_pairing_layout() {
    let dir = scratch();
    let p0 = write_json(&dir, "p0.json", &grass_to_json(&scalar_embed(0)));
    let out = run(&["rmat", &p0, &p0]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    // [[0,1],[1,0]] paired with itself: columns [1;0] and [1;0] side by side
    let want: Value = serde_json::json!([["1/1","0/1"],["1/1","0/1"],["0/1","0/1"],["0/1","0/1"]]);
    assert_eq!(v["data"], want);
}

#[test]
fn transversal_and_inset_exit_by_verdict() {
    let dir = scratch();
    let pi = write_json(&dir, "pi.json", &grass_to_json(&scalar_embed(1)));
    let sig = write_json(&dir, "sigma.json", &grass_to_json(&scalar_embed(3)));
    let hit = run(&["transversal", &pi, &pi]);
    assert_eq!(hit.status.code(), Some(1));
    assert_eq!(stdout_json(&hit)["transversal"], Value::Bool(false));
    let miss = run(&["transversal", &pi, &sig]);
    assert_eq!(miss.status.code(), Some(0));
    let inset = run(&["inset", &pi, &sig]);
    assert_eq!(inset.status.code(), Some(0));
    assert_eq!(stdout_json(&inset)["in_set"], Value::Bool(true));
}

#[test]
fn inset_rejects_points_outside_the_declared_subalgebra() {
    let dir = scratch();
    // inner size 2 with a non-scalar cell, tested against the scalar spec
    let mut cell = Mat::identity(2, Mode::Exact);
    cell.set(0, 1, ncgrass::scalar::Scalar::from_int(1, Mode::Exact));
    let x = LayeredMatrix::new(cell, 1, 1, 1, 1, 2).unwrap();
    let sigma = affine_embed(&x, 1, 2).unwrap();
    assert!(!SubalgebraSpec::scalars(2, DEFAULT_TOL).contains(sigma.rep()).unwrap());
    let mut smp = Sampler::new(5, Mode::Exact);
    let pi = smp.projective_point(1, 2, 2, DEFAULT_TOL);
    let pp = write_json(&dir, "pi.json", &grass_to_json(pi.point()));
    let sp = write_json(&dir, "sigma.json", &grass_to_json(&sigma));
    let out = run(&["inset", &pp, &sp, "--spec", "scalars"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("subalgebra"));
}

#[test]
fn reseq_and_ddop_agree_with_the_frozen_instance() {
    let dir = scratch();
    let pi = write_json(&dir, "pi.json", &grass_to_json(&scalar_embed(0)));
    let s1 = write_json(&dir, "s1.json", &grass_to_json(&scalar_embed(1)));
    let s2 = write_json(&dir, "s2.json", &grass_to_json(&scalar_embed(2)));
    let x = write_json(
        &dir,
        "x.json",
        &serde_json::json!({"m":1,"n":1,"k":1,"mode":"exact","data":[["1","0"]]}),
    );
    let dd = run(&[
        "ddop", &pi, &s1, &s2, &x, "--u", "1", "--v", "1", "--fv", "1", "--fu", "1",
    ]);
    assert_eq!(dd.status.code(), Some(0));
    let v = stdout_json(&dd);
    // pole at 0: difference quotient of 1/b between 1 and 2 is -1/2
    assert_eq!(v["value"]["data"][0][0], Value::String("-1/2".into()));
    assert_eq!(v["scale"], serde_json::json!([1, 1]));

    let rq = run(&[
        "reseq", &pi, &s1, &s2, &x, "--s", "1", "--t", "1", "--v", "1", "--u", "1",
    ]);
    assert_eq!(rq.status.code(), Some(0));
    let rv = stdout_json(&rq);
    assert_eq!(rv["pass"], Value::Bool(true));
    assert_eq!(rv["residual"], serde_json::json!(0.0));
}

#[test]
fn flag_verbs_project_and_pair() {
    let dir = scratch();
    let sig = FlagSignature::new(vec![1, 2], 3).unwrap();
    let tol = DEFAULT_TOL;
    let spec = SubalgebraSpec::full(1);
    let mut smp = Sampler::new(31, Mode::Exact);
    let (pi, phi) = loop {
        let pi = smp.flag_point(&sig.dual(), 1, 1, tol);
        let phi = smp.flag_point(&sig, 1, 1, tol);
        if flag_resolvent_set(&pi, &phi, &spec, tol).unwrap() {
            break (pi, phi);
        }
    };
    let pip = write_json(&dir, "pi.json", &flag_to_json(&pi));
    let php = write_json(&dir, "phi.json", &flag_to_json(&phi));

    let proj = run(&["flag-project", &php, "--level", "1"]);
    assert_eq!(proj.status.code(), Some(0));
    let pv = stdout_json(&proj);
    assert_eq!(pv["d"], serde_json::json!(1));
    assert_eq!(pv["m"], serde_json::json!(3));

    let fr = run(&["flag-resolvent", &pip, &php, "--level", "2", "--v", "1", "--u", "1"]);
    assert_eq!(fr.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&fr.stderr));
    let fv = stdout_json(&fr);
    assert!(fv["value"]["data"].is_array());

    // level-2 pairing equals the grassmann pairing of the projections
    let proj2 = run(&["flag-project", &php, "--level", "2"]);
    let p2 = write_json(&dir, "p2.json", &stdout_json(&proj2));
    let proj_pi = run(&["flag-project", &pip, "--level", "1"]);
    let ppi = write_json(&dir, "ppi.json", &stdout_json(&proj_pi));
    let gr = run(&["resolvent", &ppi, &p2, "--v", "2", "--u", "1"]);
    assert_eq!(gr.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&gr.stderr));
    assert_eq!(stdout_json(&gr)["value"], fv["value"]);
}

#[test]
fn dilate_and_correspond_run_the_float_bridge() {
    let dir = scratch();
    let a = write_json(
        &dir,
        "a.json",
        &serde_json::json!({"m":1,"n":1,"k":1,"mode":"float","data":[[0.5,0.0]]}),
    );
    let dil = run(&["dilate", &a]);
    assert_eq!(dil.status.code(), Some(0));
    let dv = stdout_json(&dil);
    assert!(dv["unitarity_defect"].as_f64().unwrap() <= 1e-10);
    let u00 = dv["unitary"]["data"][0][0].as_f64().unwrap();
    assert!((u00 + 0.5).abs() < 1e-12, "top-left of the unitary should be -a*");

    let beta = write_json(
        &dir,
        "beta.json",
        &serde_json::json!({"m":1,"n":1,"k":1,"mode":"float","data":[[1.0,0.0]]}),
    );
    let cor = run(&["correspond", &a, &beta]);
    assert_eq!(cor.status.code(), Some(0));
    let cv = stdout_json(&cor);
    assert_eq!(cv["in_set"], Value::Bool(true));
    assert_eq!(cv["agree"], Value::Bool(true));
    assert!(cv["value_residual"].as_f64().unwrap() < 1e-8);

    // the singular point: both predicates must fail together
    let bad = write_json(
        &dir,
        "bad.json",
        &serde_json::json!({"m":1,"n":1,"k":1,"mode":"float",
            "data":[[0.5773502691896258, 0.0]]}),
    );
    let sing = run(&["correspond", &a, &bad]);
    assert_eq!(sing.status.code(), Some(0));
    let sv = stdout_json(&sing);
    assert_eq!(sv["in_set"], Value::Bool(false));
    assert_eq!(sv["core_invertible"], Value::Bool(false));
    assert_eq!(sv["agree"], Value::Bool(true));

    // exact mode is refused for the analytic bridge
    let ea = write_json(
        &dir,
        "ea.json",
        &serde_json::json!({"m":1,"n":1,"k":1,"mode":"exact","data":[["1/2","0"]]}),
    );
    let refused = run(&["dilate", &ea]);
    assert_eq!(refused.status.code(), Some(1));
}

#[test]
fn verify_is_reproducible_and_env_tunable() {
    let fast = ["verify", "dilation", "--cases", "20", "--seed", "5"];
    let a = run(&fast);
    let b = run(&fast);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout, "same configuration must replay byte for byte");

    // seed from the environment
    let env_run = Command::new(bin())
        .args(["verify", "dilation", "--cases", "20"])
        .env("NCGRASS_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(env_run.stdout, a.stdout);

    // explicit flag beats the environment
    let flag_wins = Command::new(bin())
        .args(["verify", "dilation", "--cases", "20", "--seed", "5"])
        .env("NCGRASS_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(flag_wins.stdout, a.stdout);

    // a different seed changes the transcript
    let other = run(&["verify", "dilation", "--cases", "20", "--seed", "6"]);
    assert_ne!(other.stdout, a.stdout);

    let report = stdout_json(&a);
    for key in ["suite", "cases", "passed", "max_residual", "failures"] {
        assert!(report.get(key).is_some(), "report lacks {key}");
    }
    assert_eq!(report.as_object().unwrap().len(), 5, "report schema must stay fixed");
}

#[test]
fn verify_all_runs_every_suite() {
    let out = Command::new(bin())
        .args(["verify", "all", "--cases", "2", "--seed", "1"])
        .env("NCGRASS_MODE", "float")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let suites: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["suite"].as_str().unwrap().into())
        .collect();
    assert_eq!(
        suites,
        ncgrass::harness::SUITES.iter().map(|s| s.to_string()).collect::<Vec<_>>()
    );
}

#[test]
fn stdin_dash_feeds_any_matrix_argument() {
    let mut child = Command::new(bin())
        .args(["embed", "-", "--d", "1", "--m", "2"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(br#"{"m":1,"n":1,"k":1,"mode":"exact","data":[["7","0"]]}"#)
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["d"], serde_json::json!(1));
}

#[test]
fn usage_failures_exit_2() {
    let dir = scratch();
    // unknown verb (clap)
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    // unknown suite
    assert_eq!(run(&["verify", "bogus"]).status.code(), Some(2));
    // malformed json
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "not json").unwrap();
    assert_eq!(run(&["canon", bad.to_str().unwrap()]).status.code(), Some(2));
    // missing file
    assert_eq!(run(&["canon", "/nonexistent/p.json"]).status.code(), Some(2));
    // shape error: embedding at an impossible position
    let x = write_json(
        &dir,
        "x.json",
        &serde_json::json!({"m":1,"n":1,"k":1,"mode":"exact","data":[["1","0"]]}),
    );
    assert_eq!(run(&["embed", &x, "--d", "1", "--m", "9"]).status.code(), Some(2));
    // bad slot index is usage, not math
    let p = write_json(&dir, "p.json", &grass_to_json(&scalar_embed(1)));
    let out = run(&["pinch", &p, &p, &x, "--u", "5", "--v", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
