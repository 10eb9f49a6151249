use std::fs;
use std::io::BufReader;

use loopfiber::decomp::{audit_decomposition, reduction_cocycle, SubspaceFamily};
use loopfiber::linalg::{self, CMatrix, CVector};
use loopfiber::loopgroup::{loop_from_subspace, matrix_rows, UNITARITY_GRID};
use loopfiber::subspace::{expand_filtration, orthonormalize, FiltrationSubspace, SubspaceFrame};
use loopfiber::transport::{chern_winding, holonomy as transport_holonomy, parallel_transport, BaseLoop, ConnectionSpec, LatitudeFamily};
use loopfiber::twist::{j_apply, j_embed, j_extend, module_scale, phi_inverse, rotate};
use loopfiber::{Error, TruncatedLoop};
use serde_json::{json, Value};

use crate::output::{read_input, write_atomic, Emitter, Failure, Status};
use crate::{AuditArgs, ConnectionArgs, HolonomyArgs, GenloopArgs, LoopArgs, ObstructionArgs, Preset, ProjectArgs, TwistcheckArgs};

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::input(format!("malformed {what}: {e}")))
}

fn loop_json(p: &TruncatedLoop) -> Value {
    serde_json::to_value(p).expect("loops serialize")
}

pub fn project(args: &ProjectArgs, out: &Emitter) -> Result<Status, Failure> {
    let input: TruncatedLoop = match &args.input {
        Some(path) => parse_json(&read_input(path)?, "loop")?,
        None => {
            let k = args.band as i64;
            TruncatedLoop::seeded(args.seed, args.n as usize, -k, k)
        }
    };
    let plus = input.project_plus();
    let minus = input.project_minus();
    let resum_exact = (&plus + &minus) == input;
    for (path, part) in [(&args.plus, &plus), (&args.minus, &minus)] {
        if let Some(path) = path {
            let text = serde_json::to_string(part).expect("loops serialize") + "\n";
            write_atomic(path, text.as_bytes())?;
        }
    }
    out.report(
        "project",
        json!({
            "input": loop_json(&input),
            "plus": loop_json(&plus),
            "minus": loop_json(&minus),
            "norms": { "input": input.norm(), "plus": plus.norm(), "minus": minus.norm() },
            "resum_exact": resum_exact,
        }),
    )?;
    Ok(Status::Ok)
}

fn failed_axiom(e: &Error) -> &'static str {
    match e {
        Error::IntersectionDimension { .. } => "intersection",
        Error::UnitarityViolation { .. } => "unitarity",
        Error::RankDeficient { .. } => "rank",
        _ => "input",
    }
}

pub fn genloop(args: &GenloopArgs, out: &Emitter) -> Result<Status, Failure> {
    let raw: Value = parse_json(&read_input(&args.input)?, "subspace")?;
    let frame: Result<SubspaceFrame, Error> = if raw.get("generators").is_some() {
        let mut f: FiltrationSubspace = parse_json(&raw.to_string(), "filtration")?;
        if let Some(p) = args.depth {
            f = f.with_depth(p);
        }
        f.n().map_err(Failure::from)?;
        expand_filtration(&f)
    } else if raw.get("columns").is_some() {
        let f: SubspaceFrame = parse_json(&raw.to_string(), "frame")?;
        orthonormalize(f.columns()).map_err(Failure::from).map(Ok)?
    } else {
        return Err(Failure::input("expected a filtration (\"generators\") or a frame (\"columns\")"));
    };
    let outcome = frame.and_then(|w| loop_from_subspace(&w));
    match outcome {
        Ok(g) => {
            let (defect, _) = g.unitarity_defect(UNITARITY_GRID);
            let winding = g.det_winding()?;
            out.report(
                "genloop",
                json!({
                    "status": "ok",
                    "loop": serde_json::to_value(&g).expect("loops serialize"),
                    "unitarity_defect": defect,
                    "det_winding": winding,
                }),
            )?;
            Ok(Status::Ok)
        }
        Err(e @ (Error::IntersectionDimension { .. } | Error::UnitarityViolation { .. } | Error::RankDeficient { .. })) => {
            out.report(
                "genloop",
                json!({
                    "status": "failed",
                    "failed_axiom": failed_axiom(&e),
                    "diagnostic": e.to_string(),
                }),
            )?;
            Ok(Status::Generator)
        }
        Err(e) => Err(e.into()),
    }
}

fn connection(args: &ConnectionArgs) -> ConnectionSpec {
    match args.preset {
        Preset::Flat => ConnectionSpec::flat(args.rank as usize, 2),
        Preset::Abelian2d => ConnectionSpec::abelian2d(args.b),
        Preset::Monopole => ConnectionSpec::monopole(args.q),
        Preset::Su2sample => ConnectionSpec::su2_sample(),
    }
}

fn preset_json(args: &ConnectionArgs) -> Value {
    match args.preset {
        Preset::Flat => json!({ "name": "flat", "rank": args.rank }),
        Preset::Abelian2d => json!({ "name": "abelian2d", "B": args.b }),
        Preset::Monopole => json!({ "name": "monopole", "q": args.q }),
        Preset::Su2sample => json!({ "name": "su2sample" }),
    }
}

fn base_loop(args: &LoopArgs) -> Result<(BaseLoop, Value), Failure> {
    if let Some(path) = &args.csv {
        let file = fs::File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        return Ok((BaseLoop::from_csv(BufReader::new(file))?, json!({ "csv": path.display().to_string() })));
    }
    let parts: Vec<f64> = args
        .center
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::input(format!("bad --center {:?}: {e}", args.center)))?;
    let [x, y] = parts[..] else {
        return Err(Failure::input(format!("--center needs two coordinates, got {:?}", args.center)));
    };
    if !(args.circle.is_finite() && args.circle > 0.0) {
        return Err(Failure::input("--circle must be a positive radius"));
    }
    Ok((BaseLoop::circle([x, y], args.circle), json!({ "circle": args.circle, "center": [x, y] })))
}

pub fn holonomy(args: &HolonomyArgs, out: &Emitter) -> Result<Status, Failure> {
    let conn = connection(&args.connection);
    let (base, loop_desc) = base_loop(&args.path)?;
    let steps = args.steps as usize;
    let hol = transport_holonomy(&conn, &base, steps)?;
    let coarse = transport_holonomy(&conn, &base, (steps / 2).max(16))?;
    let mut body = json!({
        "preset": preset_json(&args.connection),
        "loop": loop_desc,
        "N": steps,
        "holonomy": matrix_rows(&hol),
        "unitarity_defect": linalg::unitarity_defect(&hol),
        "refinement_delta": linalg::frobenius(&(&hol - coarse)),
    });
    if hol.nrows() == 1 {
        body["phase"] = json!(hol[(0, 0)].arg());
    }
    out.report("holonomy", body)?;
    Ok(Status::Ok)
}

pub fn obstruction(args: &ObstructionArgs, out: &Emitter) -> Result<Status, Failure> {
    let conn = connection(&args.connection);
    if conn.n() != 1 {
        return Err(Failure::input("the obstruction winding needs a rank-1 preset"));
    }
    let report = chern_winding(&conn, &LatitudeFamily, args.steps as usize, args.samples as usize)?;
    if let Some(path) = &args.csv {
        let mut csv = String::from("s,re,im,phase\n");
        for (s, h) in &report.samples {
            csv.push_str(&format!("{s},{},{},{}\n", h.re, h.im, h.arg()));
        }
        write_atomic(path, csv.as_bytes())?;
    }
    out.report(
        "obstruction",
        json!({
            "preset": preset_json(&args.connection),
            "family": "latitude",
            "N": args.steps,
            "M": report.samples.len() - 1,
            "winding": report.winding,
        }),
    )?;
    Ok(Status::Ok)
}

fn check(value: f64, tol: f64) -> Value {
    json!({ "max_residual": value, "tolerance": tol, "passed": value <= tol })
}

pub fn twistcheck(args: &TwistcheckArgs, out: &Emitter) -> Result<Status, Failure> {
    let conn = connection(&args.connection);
    let (base, loop_desc) = base_loop(&args.path)?;
    let steps = args.steps as usize;
    let n = conn.n();
    let frame = parallel_transport(&conn, &base, steps)?;
    let tol = |default: f64| args.tol.unwrap_or(default);

    let mut loop_err: f64 = 0.0;
    let mut section_err: f64 = 0.0;
    let mut quasi: f64 = 0.0;
    let vector = |seed: u64| -> CVector { TruncatedLoop::seeded(seed, n, 0, 0).coeff(0).cloned().expect("one mode") };
    for i in 0..args.pairs {
        let seed = args.seed.wrapping_mul(1_000_003).wrapping_add(4 * i);
        let f = TruncatedLoop::seeded(seed, 1, -4, 4);
        let g = TruncatedLoop::seeded(seed + 1, 1, -3, 5);
        let (v, w) = (vector(seed + 2), vector(seed + 3));
        let s = j_extend(&frame, &f, &v)?;
        quasi = quasi.max(s.quasi_periodicity_residual());
        loop_err = loop_err.max(phi_inverse(&frame, &s)?.max_abs_diff(&TruncatedLoop::tensor(&f, &v)?));
        let sigma = module_scale(&f, &j_embed(&frame, &v)?)?.add(&module_scale(&g, &j_embed(&frame, &w)?)?)?;
        let back = j_apply(&frame, &phi_inverse(&frame, &sigma)?)?;
        section_err = section_err.max(back.max_distance(&sigma));
        quasi = quasi.max(back.quasi_periodicity_residual());
    }

    let v = vector(args.seed);
    let embedded = j_embed(&frame, &v)?;
    let mut equivariance: f64 = 0.0;
    for k in [1, steps / 8, steps / 3, steps - 1] {
        let k = k as i64;
        let rotated = rotate(&embedded, k)?;
        let independent = parallel_transport(&conn, rotated.base(), steps)?;
        let expect = j_embed(&independent, &(frame.lifted(k) * &v))?;
        equivariance = equivariance.max(rotated.max_distance(&expect));
    }

    let checks = json!({
        "j_phi_round_trip": check(section_err, tol(1e-7)),
        "phi_j_round_trip": check(loop_err, tol(1e-8)),
        "quasi_periodicity": check(quasi, tol(1e-7)),
        "equivariance": check(equivariance, tol(1e-7)),
    });
    let passed = checks.as_object().expect("object").values().all(|c| c["passed"] == json!(true));
    let hol: &CMatrix = frame.holonomy();
    out.report(
        "twistcheck",
        json!({
            "preset": preset_json(&args.connection),
            "loop": loop_desc,
            "N": steps,
            "pairs": args.pairs,
            "holonomy": matrix_rows(hol),
            "checks": checks,
            "max_residual": section_err.max(loop_err).max(quasi).max(equivariance),
            "passed": passed,
        }),
    )?;
    Ok(if passed { Status::Ok } else { Status::Check })
}

pub fn audit(args: &AuditArgs, out: &Emitter) -> Result<Status, Failure> {
    let fam: SubspaceFamily = parse_json(&read_input(&args.input)?, "family")?;
    fam.validate()?;
    let report = audit_decomposition(&fam)?;
    let (reduction, error) = if report.passed {
        match reduction_cocycle(&fam) {
            Ok(r) => (serde_json::to_value(&r).expect("reductions serialize"), Value::Null),
            Err(e @ Error::NonConstantReducedTransition { from, to, variation, obstruction }) => (
                Value::Null,
                json!({
                    "kind": "NonConstantReducedTransition",
                    "edge": [from, to],
                    "variation": variation,
                    "obstruction": obstruction,
                    "message": e.to_string(),
                }),
            ),
            Err(e) => return Err(e.into()),
        }
    } else {
        (Value::Null, Value::Null)
    };
    let passed = report.passed && report.continuity_passed && error.is_null();
    out.report(
        "audit",
        json!({
            "audit": serde_json::to_value(&report).expect("reports serialize"),
            "reduction": reduction,
            "error": error,
            "passed": passed,
        }),
    )?;
    Ok(if passed { Status::Ok } else { Status::Check })
}
