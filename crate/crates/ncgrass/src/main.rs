//! Command-line front end.
//!
//! Matrices and points travel as JSON: pass a file path or `-` for stdin
//! (at most one argument may be `-`). Results print as one JSON value on
//! stdout. Exit codes: 0 success, 1 failed predicate or math/domain
//! failure, 2 usage or malformed input.
//!
//! `--tol`, `--mode`, and `--seed` fall back to NCGRASS_TOL, NCGRASS_MODE,
//! and NCGRASS_SEED; explicit flags win over the environment.

use clap::{Parser, Subcommand};
use ncgrass::error::{Error, Result};
use ncgrass::grassmann::{
    affine_embed, affine_extract, direct_sum, gr_canonicalize, gr_equiv, pinch, shift_act,
    similarity, GrassPoint,
};
use ncgrass::harness::{run_suite, RunConfig, SUITES};
use ncgrass::json::{
    flag_from_json, grass_from_json, grass_to_json, mat_from_json, mat_to_json,
    matrix_from_json, matrix_to_json,
};
use ncgrass::matrix::{LayeredMatrix, DEFAULT_TOL};
use ncgrass::ncfunc::{dd_apply, ScalingPolicy};
use ncgrass::resolvent::{
    flag_resolvent, in_resolvent_set, is_transversal, r_matrix, resolvent_equation_residual,
    ProjectivePoint, ResolventCache, ResolventValue,
};
use ncgrass::scalar::Mode;
use ncgrass::subalgebra::SubalgebraSpec;
use serde_json::{json, Value};
use std::io::Read;

#[derive(Parser)]
#[command(name = "ncgrass", version, about = "Noncommutative Grassmannian toolkit")]
struct Cli {
    /// Float-mode comparison tolerance (default 1e-10)
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Scalar mode for verify sampling: exact or float
    #[arg(long, global = true)]
    mode: Option<String>,

    /// Master seed for verify sampling
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Test whether two classes coincide
    Equiv { a: String, b: String },
    /// Canonical representative of a class
    Canon { a: String },
    /// Embed an affine coordinate as a class at position (d; m)
    Embed {
        x: String,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
    },
    /// Recover the affine coordinate of a class, when its chart is reached
    Extract { a: String },
    /// Interleaved direct sum of two classes
    Dsum { a: String, b: String },
    /// Act on a class by an invertible middle-level matrix
    Sim { s: String, a: String },
    /// Couple two classes through a coefficient at slot (u, v)
    Pinch {
        a: String,
        b: String,
        x: String,
        #[arg(long)]
        u: usize,
        #[arg(long)]
        v: usize,
    },
    /// Translate a class by an affine shift
    Shift { a: String, y: String },
    /// Difference-differential of the pairing slot (fv, fu) at pinch slot (u, v)
    Ddop {
        pi: String,
        a: String,
        b: String,
        x: String,
        #[arg(long)]
        u: usize,
        #[arg(long)]
        v: usize,
        #[arg(long, default_value_t = 1)]
        fv: usize,
        #[arg(long, default_value_t = 1)]
        fu: usize,
    },
    /// Pairing matrix of a projective point against a class
    Rmat { pi: String, a: String },
    /// Test transversality of a projective point against a class
    Transversal { pi: String, a: String },
    /// Test membership in the resolvent set
    Inset {
        pi: String,
        a: String,
        /// Coefficient subalgebra: full, scalars, or blocks
        #[arg(long, default_value = "full")]
        spec: String,
        /// Block sizes for --spec blocks, comma separated
        #[arg(long)]
        partition: Option<String>,
    },
    /// Resolvent value at slot (v, u)
    Resolvent {
        pi: String,
        a: String,
        #[arg(long)]
        v: usize,
        #[arg(long)]
        u: usize,
    },
    /// Residual of the resolvent difference equation at slots (s, t, v, u)
    Reseq {
        pi: String,
        a: String,
        b: String,
        x: String,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        t: usize,
        #[arg(long)]
        v: usize,
        #[arg(long)]
        u: usize,
    },
    /// Project a flag to its level-j Grassmannian class
    FlagProject {
        phi: String,
        #[arg(long)]
        level: usize,
    },
    /// Flag resolvent value at level j, slot (v, u)
    FlagResolvent {
        pi: String,
        phi: String,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        v: usize,
        #[arg(long)]
        u: usize,
    },
    /// Unitary dilation of a pure contraction
    Dilate { a: String },
    /// Compare operator-model and pairing resolvents of a contraction
    Correspond { a: String, beta: String },
    /// Run verification suites (a suite name or "all")
    Verify {
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    let tol = resolve_tol(&cli);
    match dispatch(&cli, tol) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("ncgrass: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

/// Usage and malformed-input errors exit 2; math and domain failures exit 1.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DimensionMismatch(_)
        | Error::ModeMismatch(_)
        | Error::Parse(_)
        | Error::IndexOutOfRange(_)
        | Error::SignatureMismatch(_)
        | Error::UnknownSuite(_) => 2,
        _ => 1,
    }
}

fn resolve_tol(cli: &Cli) -> f64 {
    cli.tol
        .or_else(|| std::env::var("NCGRASS_TOL").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(DEFAULT_TOL)
}

fn resolve_mode(cli: &Cli) -> Result<Mode> {
    let name = match &cli.mode {
        Some(m) => m.clone(),
        None => std::env::var("NCGRASS_MODE").unwrap_or_else(|_| "float".into()),
    };
    match name.as_str() {
        "exact" => Ok(Mode::Exact),
        "float" => Ok(Mode::Float),
        other => Err(Error::Parse(format!("unknown mode {other:?}, expected exact or float"))),
    }
}

fn resolve_seed(cli: &Cli) -> u64 {
    cli.seed
        .or_else(|| std::env::var("NCGRASS_SEED").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0)
}

/// Read a JSON value from a path, or from stdin for `-`.
fn load(path: &str) -> Result<Value> {
    let text = if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Error::Parse(format!("stdin: {e}")))?;
        buf
    } else {
        std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{path}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{path}: {e}")))
}

fn load_grass(path: &str, tol: f64) -> Result<GrassPoint> {
    grass_from_json(&load(path)?, tol)
}

fn load_pi(path: &str, tol: f64) -> Result<ProjectivePoint> {
    ProjectivePoint::new(load_grass(path, tol)?)
}

fn load_matrix(path: &str) -> Result<LayeredMatrix> {
    matrix_from_json(&load(path)?)
}

fn emit(v: &Value) {
    println!("{v}");
}

fn resolvent_json(r: &ResolventValue) -> Value {
    json!({
        "v": r.v,
        "u": r.u,
        "value": matrix_to_json(&r.value),
        "zeta": matrix_to_json(&r.zeta),
    })
}

fn dispatch(cli: &Cli, tol: f64) -> Result<i32> {
    match &cli.verb {
        Verb::Equiv { a, b } => {
            let ans = gr_equiv(&load_grass(a, tol)?, &load_grass(b, tol)?, tol)?;
            emit(&json!({"equivalent": ans}));
            Ok(i32::from(!ans))
        }
        Verb::Canon { a } => {
            let c = gr_canonicalize(&load_grass(a, tol)?, tol)?;
            emit(&grass_to_json(&c));
            Ok(0)
        }
        Verb::Embed { x, d, m } => {
            let p = affine_embed(&load_matrix(x)?, *d, *m)?;
            emit(&grass_to_json(&p));
            Ok(0)
        }
        Verb::Extract { a } => match affine_extract(&load_grass(a, tol)?, tol)? {
            Some(x) => {
                emit(&json!({"reachable": true, "coordinate": matrix_to_json(&x)}));
                Ok(0)
            }
            None => {
                emit(&json!({"reachable": false, "coordinate": null}));
                Ok(1)
            }
        },
        Verb::Dsum { a, b } => {
            let s = direct_sum(&load_grass(a, tol)?, &load_grass(b, tol)?)?;
            emit(&grass_to_json(&s));
            Ok(0)
        }
        Verb::Sim { s, a } => {
            let factor = mat_from_json(&load(s)?)?;
            let moved = similarity(&factor, &load_grass(a, tol)?, tol)?;
            emit(&grass_to_json(&moved));
            Ok(0)
        }
        Verb::Pinch { a, b, x, u, v } => {
            let p = pinch(&load_grass(a, tol)?, &load_grass(b, tol)?, *u, *v, &load_matrix(x)?)?;
            emit(&grass_to_json(&p));
            Ok(0)
        }
        Verb::Shift { a, y } => {
            let p = shift_act(&load_grass(a, tol)?, &load_matrix(y)?)?;
            emit(&grass_to_json(&p));
            Ok(0)
        }
        Verb::Ddop { pi, a, b, x, u, v, fv, fu } => {
            let cache = ResolventCache::new(load_pi(pi, tol)?, tol);
            let f = cache.function(*fv, *fu)?;
            let sigma = load_grass(a, tol)?;
            let sigmap = load_grass(b, tol)?;
            let policy = ScalingPolicy::default_for(sigma.rep().mode());
            let dd = dd_apply(&f, &sigma, &sigmap, *u, *v, &load_matrix(x)?, &policy, tol)?;
            emit(&json!({
                "value": matrix_to_json(&dd.value),
                "scale": [dd.scale_used.0, dd.scale_used.1],
            }));
            Ok(0)
        }
        Verb::Rmat { pi, a } => {
            let sigma = load_grass(a, tol)?;
            let amp = load_pi(pi, tol)?.amplify(sigma.n())?;
            emit(&matrix_to_json(&r_matrix(&amp, &sigma)?));
            Ok(0)
        }
        Verb::Transversal { pi, a } => {
            let sigma = load_grass(a, tol)?;
            let spec = SubalgebraSpec::full(sigma.k());
            let ans = is_transversal(&load_pi(pi, tol)?, &sigma, &spec, tol)?;
            emit(&json!({"transversal": ans}));
            Ok(i32::from(!ans))
        }
        Verb::Inset { pi, a, spec, partition } => {
            let sigma = load_grass(a, tol)?;
            let spec = parse_spec(spec, partition.as_deref(), sigma.k(), tol)?;
            let ans = in_resolvent_set(&load_pi(pi, tol)?, &sigma, &spec, tol)?;
            emit(&json!({"in_set": ans}));
            Ok(i32::from(!ans))
        }
        Verb::Resolvent { pi, a, v, u } => {
            let cache = ResolventCache::new(load_pi(pi, tol)?, tol);
            let r = cache.value(&load_grass(a, tol)?, *v, *u)?;
            emit(&resolvent_json(&r));
            Ok(0)
        }
        Verb::Reseq { pi, a, b, x, s, t, v, u } => {
            let sigma = load_grass(a, tol)?;
            let policy = ScalingPolicy::default_for(sigma.rep().mode());
            let residual = resolvent_equation_residual(
                &load_pi(pi, tol)?,
                &sigma,
                &load_grass(b, tol)?,
                *s,
                *t,
                *v,
                *u,
                &load_matrix(x)?,
                &policy,
                tol,
            )?;
            let gate = match sigma.rep().mode() {
                Mode::Exact => 0.0,
                Mode::Float => 1e-9,
            };
            let pass = residual <= gate;
            emit(&json!({"residual": residual, "pass": pass}));
            Ok(i32::from(!pass))
        }
        Verb::FlagProject { phi, level } => {
            let p = ncgrass::flag::flag_project(&flag_from_json(&load(phi)?, tol)?, *level, tol)?;
            emit(&grass_to_json(&p));
            Ok(0)
        }
        Verb::FlagResolvent { pi, phi, level, v, u } => {
            let pi = flag_from_json(&load(pi)?, tol)?;
            let phi = flag_from_json(&load(phi)?, tol)?;
            let r = flag_resolvent(&pi, &phi, *level, *v, *u, tol)?;
            emit(&resolvent_json(&r));
            Ok(0)
        }
        Verb::Dilate { a } => {
            let hal = ncgrass::dilation::halmos_dilation(&mat_from_json(&load(a)?)?, tol)?;
            emit(&json!({
                "unitary": mat_to_json(&hal.unitary)?,
                "unitarity_defect": hal.unitarity_defect,
                "point": grass_to_json(hal.point.point()),
            }));
            Ok(0)
        }
        Verb::Correspond { a, beta } => {
            let rep = ncgrass::dilation::resolvent_correspondence_check(
                &mat_from_json(&load(a)?)?,
                &load_matrix(beta)?,
                tol,
            )?;
            let pass = rep.agree || rep.near_singular;
            emit(&json!({
                "in_set": rep.in_set,
                "core_invertible": rep.core_invertible,
                "agree": rep.agree,
                "near_singular": rep.near_singular,
                "value_residual": rep.value_residual,
                "inverse_residual": rep.inverse_residual,
            }));
            Ok(i32::from(!pass))
        }
        Verb::Verify { suite, cases } => {
            let mut cfg = RunConfig::new(resolve_mode(cli)?);
            cfg.tol = tol;
            cfg.seed = resolve_seed(cli);
            cfg.cases = *cases;
            let names: Vec<&str> = if suite == "all" {
                SUITES.to_vec()
            } else {
                if !SUITES.contains(&suite.as_str()) {
                    return Err(Error::UnknownSuite(suite.clone()));
                }
                vec![suite.as_str()]
            };
            let mut ok = true;
            for name in names {
                let report = run_suite(name, &cfg)?;
                ok &= report.all_passed();
                emit(&report.to_json());
            }
            Ok(i32::from(!ok))
        }
    }
}

fn parse_spec(name: &str, partition: Option<&str>, k: usize, tol: f64) -> Result<SubalgebraSpec> {
    match name {
        "full" => Ok(SubalgebraSpec::full(k)),
        "scalars" => Ok(SubalgebraSpec::scalars(k, tol)),
        "blocks" => {
            let parts: Vec<usize> = partition
                .ok_or_else(|| Error::Parse("--spec blocks needs --partition".into()))?
                .split(',')
                .map(|p| p.trim().parse().map_err(|_| Error::Parse("bad partition".into())))
                .collect::<Result<_>>()?;
            if parts.iter().sum::<usize>() != k {
                return Err(Error::Parse(format!("partition must sum to {k}")));
            }
            SubalgebraSpec::block_diagonal(parts, tol)
        }
        other => Err(Error::Parse(format!("unknown spec {other:?}"))),
    }
}
