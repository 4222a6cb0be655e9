use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use sosrelax::relax::{build_dual, build_primal, solve_program, RelaxError, RelaxOptions, ReportStatus};
use sosrelax::robust::verify_robust;
use sosrelax::soscert::{extract_decomposition, is_sos, is_sos_convex, Refutation, SosVerdict};
use sosrelax::ssafunc::SsaProgram;
use sosrelax::SolverOptions;

use crate::expr::parse_polynomial;
use crate::format::{FileError, Model, ProblemFile, SolverSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// What a command prints and returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    /// One JSON object for standard output.
    pub report: Value,
    /// Human-readable summary for standard error.
    pub summary: String,
}

#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub assume_slater: bool,
    pub dump_sdp: Option<PathBuf>,
    pub no_recovery: bool,
    pub seed: u64,
    pub samples: usize,
    pub no_timestamp: bool,
}

fn stamp(mut report: Value, flags: &Flags) -> Value {
    if let Value::Object(map) = &mut report {
        if flags.no_timestamp {
            map.remove("wallclock_ms");
        } else {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            map.insert("timestamp".into(), json!(secs));
        }
    }
    report
}

fn failure(command: &str, code: i32, msg: String, flags: &Flags) -> Outcome {
    Outcome {
        code,
        report: stamp(json!({"command": command, "status": "error", "error": msg}), flags),
        summary: format!("{command}: {msg}"),
    }
}

fn solver_options(spec: Option<&SolverSpec>, flags: &Flags) -> SolverOptions {
    let mut o = SolverOptions::default();
    let tol = flags.tol.or(spec.and_then(|s| s.tol));
    if let Some(t) = tol {
        o.gap_tol = t;
        o.feas_tol = t;
    }
    if let Some(k) = flags.max_iter.or(spec.and_then(|s| s.max_iter)) {
        o.max_iter = k;
    }
    o
}

fn load(path: &Path) -> Result<ProblemFile, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    ProblemFile::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn dual_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sdp");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}-dual.{ext}"),
        None => format!("{stem}-dual"),
    };
    path.with_file_name(name)
}

/// Writes the primal to `path` and the dual next to it.
pub fn write_sdpa(prog: &SsaProgram, path: &Path) -> Result<(PathBuf, PathBuf), String> {
    let primal = build_primal(prog, true).map_err(|e| e.to_string())?;
    let dual = build_dual(prog, true).map_err(|e| e.to_string())?;
    let dpath = dual_path(path);
    let p = primal.problem.to_sdpa().map_err(|e| e.to_string())?;
    let d = dual.problem.to_sdpa().map_err(|e| e.to_string())?;
    std::fs::write(path, p).map_err(|e| format!("{}: {e}", path.display()))?;
    std::fs::write(&dpath, d).map_err(|e| format!("{}: {e}", dpath.display()))?;
    Ok((path.to_path_buf(), dpath))
}

fn exit_for(status: ReportStatus) -> i32 {
    match status {
        ReportStatus::Optimal => EXIT_OK,
        ReportStatus::Infeasible | ReportStatus::Unbounded => EXIT_INFEASIBLE,
        ReportStatus::NumericalFailure => EXIT_NUMERICAL,
    }
}

fn run_solve(
    command: &str,
    file: &ProblemFile,
    prog: &SsaProgram,
    flags: &Flags,
) -> Result<(Value, ReportStatus, String), Outcome> {
    if let Some(path) = &flags.dump_sdp {
        write_sdpa(prog, path).map_err(|e| failure(command, EXIT_INPUT, e, flags))?;
    }
    let opts = RelaxOptions {
        solver: solver_options(file.solver.as_ref(), flags),
        assume_slater: flags.assume_slater,
        recovery: !flags.no_recovery,
        slater_hint: file.slater_hint.clone(),
        ..RelaxOptions::default()
    };
    let report = match solve_program(prog, &opts) {
        Ok(r) => r,
        Err(e @ RelaxError::NoSlaterPoint { .. }) => {
            return Err(failure(command, EXIT_INFEASIBLE, e.to_string(), flags))
        }
        Err(e) => return Err(failure(command, EXIT_NUMERICAL, e.to_string(), flags)),
    };
    let mut summary = format!(
        "{command}: {:?}, primal {:.6}, dual {:.6}",
        report.status, report.val_primal, report.val_dual
    );
    if let Some(x) = &report.x_star {
        summary.push_str(&format!(", x* = {x:?}"));
    }
    for w in &report.warnings {
        summary.push_str(&format!("\nwarning: {w}"));
    }
    let status = report.status;
    let mut value = serde_json::to_value(&report).expect("reports serialize");
    value["command"] = json!(command);
    Ok((value, status, summary))
}

pub fn solve(path: &Path, flags: &Flags) -> Outcome {
    let file = match load(path) {
        Ok(f) => f,
        Err(e) => return failure("solve", EXIT_INPUT, e, flags),
    };
    let prog = match file.program() {
        Ok(p) => p,
        Err(e) => return failure("solve", EXIT_INPUT, e.to_string(), flags),
    };
    match run_solve("solve", &file, &prog, flags) {
        Ok((value, status, summary)) => Outcome {
            code: exit_for(status),
            report: stamp(value, flags),
            summary,
        },
        Err(o) => o,
    }
}

pub fn solve_robust(path: &Path, flags: &Flags) -> Outcome {
    let file = match load(path) {
        Ok(f) => f,
        Err(e) => return failure("solve-robust", EXIT_INPUT, e, flags),
    };
    let rp = match file.build() {
        Ok(Model::Robust(rp)) => rp,
        Ok(Model::Program(_)) => {
            return failure(
                "solve-robust",
                EXIT_INPUT,
                "file has no \"robust\" section".into(),
                flags,
            )
        }
        Err(e) => return failure("solve-robust", EXIT_INPUT, e.to_string(), flags),
    };
    let prog = match rp.to_ssa_program() {
        Ok(p) => p,
        Err(e) => return failure("solve-robust", EXIT_INPUT, e.to_string(), flags),
    };
    let (mut value, status, mut summary) = match run_solve("solve-robust", &file, &prog, flags) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let x = value["x_star"].as_array().map(|a| {
        a.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect::<Vec<f64>>()
    });
    if let Some(x) = x {
        match verify_robust(&x, &rp, flags.samples.max(1), flags.seed) {
            Ok(chk) => {
                summary.push_str(&format!("\nworst-case margins {:?}", chk.margins));
                value["robust_check"] = serde_json::to_value(&chk).expect("checks serialize");
            }
            Err(e) => {
                return failure("solve-robust", EXIT_NUMERICAL, e.to_string(), flags);
            }
        }
    }
    Outcome {
        code: exit_for(status),
        report: stamp(value, flags),
        summary,
    }
}

pub fn parse_point(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("'{}' is not a number", s.trim()))
        })
        .collect()
}

pub fn eval(path: &Path, x: &str, flags: &Flags) -> Outcome {
    let file = match load(path) {
        Ok(f) => f,
        Err(e) => return failure("eval", EXIT_INPUT, e, flags),
    };
    let x = match parse_point(x) {
        Ok(x) => x,
        Err(e) => return failure("eval", EXIT_INPUT, e, flags),
    };
    if x.len() != file.n {
        return failure(
            "eval",
            EXIT_INPUT,
            format!("point has {} coordinates, file declares n = {}", x.len(), file.n),
            flags,
        );
    }
    let prog = match file.program() {
        Ok(p) => p,
        Err(e) => return failure("eval", EXIT_INPUT, e.to_string(), flags),
    };
    let mut values = Vec::new();
    for f in std::iter::once(prog.objective()).chain(prog.constraints()) {
        match f.eval(&x) {
            Ok(v) => values.push(v),
            Err(e) => return failure("eval", EXIT_NUMERICAL, e.to_string(), flags),
        }
    }
    let summary = values
        .iter()
        .enumerate()
        .map(|(i, v)| format!("f{i}(x) = {v}"))
        .collect::<Vec<_>>()
        .join("\n");
    Outcome {
        code: EXIT_OK,
        report: stamp(json!({"command": "eval", "x": x, "values": values}), flags),
        summary,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SosCheck {
    Sos,
    SosConvex,
}

pub fn check(kind: SosCheck, expr: &str, n: Option<usize>, gram: bool, decompose: bool, flags: &Flags) -> Outcome {
    let command = match kind {
        SosCheck::Sos => "check-sos",
        SosCheck::SosConvex => "check-sosconvex",
    };
    let p = match parse_polynomial(expr, n) {
        Ok(p) => p,
        Err(e) => return failure(command, EXIT_INPUT, e.to_string(), flags),
    };
    let verdict = match kind {
        SosCheck::Sos => is_sos(&p),
        SosCheck::SosConvex => is_sos_convex(&p),
    };
    let verdict = match verdict {
        Ok(v) => v,
        Err(e) => return failure(command, EXIT_NUMERICAL, e.to_string(), flags),
    };
    let mut report = json!({
        "command": command,
        "polynomial": p.to_string(),
        "verdict": verdict.label(),
        "margin": verdict.margin(),
    });
    if let SosVerdict::No(r) = &verdict {
        report["reason"] = json!(match r {
            Refutation::OddDegree => "odd degree".to_string(),
            Refutation::UnreachableTerm(m) => format!("unreachable term {:?}", m.exponents()),
            Refutation::Separator { value, .. } => format!("moment separator with value {value:e}"),
        });
    }
    if let Some(cert) = verdict.certificate() {
        if gram {
            report["monomials"] = json!(cert
                .monomials
                .iter()
                .map(|m| m.exponents().to_vec())
                .collect::<Vec<_>>());
            report["gram"] = json!(cert.gram.lower_rows());
        }
        if decompose {
            match extract_decomposition(cert) {
                Ok(d) => {
                    report["decomposition"] =
                        json!(d.terms.iter().map(|t| t.to_string()).collect::<Vec<_>>())
                }
                Err(e) => report["decomposition_error"] = json!(e.to_string()),
            }
        }
    }
    let summary = match verdict.margin() {
        Some(t) => format!("{command}: {} (margin {t:e})", verdict.label()),
        None => format!("{command}: {}", verdict.label()),
    };
    Outcome {
        code: EXIT_OK,
        report: stamp(report, flags),
        summary,
    }
}

pub fn dump_sdp(path: &Path, out: &Path, flags: &Flags) -> Outcome {
    let file = match load(path) {
        Ok(f) => f,
        Err(e) => return failure("dump-sdp", EXIT_INPUT, e, flags),
    };
    let prog = match file.program() {
        Ok(p) => p,
        Err(e) => return failure("dump-sdp", EXIT_INPUT, e.to_string(), flags),
    };
    match write_sdpa(&prog, out) {
        Ok((p, d)) => Outcome {
            code: EXIT_OK,
            report: stamp(
                json!({"command": "dump-sdp", "primal": p.display().to_string(), "dual": d.display().to_string()}),
                flags,
            ),
            summary: format!("wrote {} and {}", p.display(), d.display()),
        },
        Err(e) => failure("dump-sdp", EXIT_INPUT, e, flags),
    }
}

/// Parses a problem file and writes it back in canonical form.
pub fn normalize(text: &str) -> Result<String, FileError> {
    Ok(ProblemFile::parse(text)?.to_json())
}
