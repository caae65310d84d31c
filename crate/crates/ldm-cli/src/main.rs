//! `ldm` — command-line front end for the density-matrix lambda calculi.
//!
//! Subcommands: `typecheck`, `run`, `trace`, `denote`, `equiv`. Programs are
//! parsed in the probabilistic-branching calculus by default; `--calculus
//! mixed` selects the deterministic one, and a `#calculus:` pragma inside
//! the file overrides the flag. Results go to stdout, diagnostics to
//! stderr.
//!
//! Exit codes are a stable contract: 0 success (or programs equivalent),
//! 1 rejected program (type error, stuck term, programs distinct),
//! 2 unreadable input (I/O, parse, bad configuration), 3 fuel exhausted.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ldm_core::syntax::rho;
use ldm_core::tol::{set_tolerance, tolerance};
use ldm_core::{
    build_trace, distribution_density, final_distribution, free_vars, fsem, infer, interp,
    normalize_mixed, parse, parse_pragma, print, sample_run, step_mixed, trace_to_dot,
    trace_to_json, Calculus, Context, DensityMatrix, EvalError, FSem, LeafStatus,
    MixedStepResult, Term, TraceTree, Type, Valuation,
};

const EXIT_REJECTED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_FUEL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ldm",
    version,
    about = "Typecheck, evaluate, trace, and compare programs of two density-matrix lambda calculi"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a program and print its type.
    Typecheck(Single),
    /// Evaluate a program and print the final result.
    Run(Single),
    /// Print the reduction behavior: a branching tree or a linear step log.
    Trace(Single),
    /// Print a program's denotation: triplet set and flattened matrix.
    Denote(Single),
    /// Decide whether two programs denote the same density matrix.
    Equiv(Pair),
}

#[derive(Args)]
struct Single {
    /// Program file.
    file: PathBuf,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Pair {
    /// First program.
    file: PathBuf,
    /// Second program.
    file2: PathBuf,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// Calculus to parse with; a `#calculus:` pragma in the file wins.
    #[arg(long, value_enum)]
    calculus: Option<CalculusOpt>,
    /// Reduction step budget.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    /// Numeric tolerance; overrides the LDM_TOLERANCE environment variable.
    #[arg(long)]
    tol: Option<f64>,
    /// `run` under the probabilistic calculus: perform one sampled
    /// execution with this seed instead of computing the distribution.
    #[arg(long)]
    seed: Option<u64>,
    /// Output format (`dot` applies to `trace` only).
    #[arg(long, value_enum, default_value_t = OutputOpt::Text)]
    output: OutputOpt,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CalculusOpt {
    Prob,
    Mixed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputOpt {
    Text,
    Json,
    Dot,
}

/// Options resolved against the file's pragma and the environment.
struct RunConfig {
    calculus: Calculus,
    fuel: u64,
    seed: Option<u64>,
    output: OutputOpt,
}

struct Program {
    term: Term,
    ty: Type,
    cfg: RunConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (single, pair) = match &cli.cmd {
        Cmd::Typecheck(s) | Cmd::Run(s) | Cmd::Trace(s) | Cmd::Denote(s) => (Some(s), None),
        Cmd::Equiv(p) => (None, Some(p)),
    };
    let opts = single.map(|s| &s.opts).unwrap_or_else(|| &pair.unwrap().opts);
    if let Err(code) = apply_tolerance(opts) {
        return code;
    }
    if opts.output == OutputOpt::Dot && !matches!(cli.cmd, Cmd::Trace(_)) {
        eprintln!("ldm: dot output applies to `trace` only");
        return ExitCode::from(EXIT_INPUT);
    }

    match &cli.cmd {
        Cmd::Typecheck(s) => cmd_typecheck(s),
        Cmd::Run(s) => cmd_run(s),
        Cmd::Trace(s) => cmd_trace(s),
        Cmd::Denote(s) => cmd_denote(s),
        Cmd::Equiv(p) => cmd_equiv(p),
    }
}

/// Tolerance precedence: `--tol` flag, then LDM_TOLERANCE, then default.
fn apply_tolerance(opts: &Opts) -> Result<(), ExitCode> {
    let chosen = match opts.tol {
        Some(t) => Some(t),
        None => match std::env::var("LDM_TOLERANCE") {
            Ok(s) => match s.trim().parse::<f64>() {
                Ok(t) => Some(t),
                Err(_) => {
                    eprintln!("ldm: LDM_TOLERANCE is not a number: `{s}`");
                    return Err(ExitCode::from(EXIT_INPUT));
                }
            },
            Err(_) => None,
        },
    };
    if let Some(t) = chosen {
        if !(t.is_finite() && t > 0.0) {
            eprintln!("ldm: tolerance must be finite and positive, got {t}");
            return Err(ExitCode::from(EXIT_INPUT));
        }
        set_tolerance(t);
    }
    Ok(())
}

fn load(file: &Path, opts: &Opts) -> Result<Program, ExitCode> {
    let src = match std::fs::read_to_string(file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("ldm: {}: {e}", file.display());
            return Err(ExitCode::from(EXIT_INPUT));
        }
    };
    let calculus = parse_pragma(&src).unwrap_or(match opts.calculus {
        Some(CalculusOpt::Mixed) => Calculus::Mixed,
        _ => Calculus::Prob,
    });
    let term = match parse(&src, calculus) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("ldm: {}:{e}", file.display());
            return Err(ExitCode::from(EXIT_INPUT));
        }
    };
    let ty = match infer(&Context::new(), &term, calculus) {
        Ok(ty) => ty,
        Err(e) => {
            eprintln!("ldm: {}: type error: {e}", file.display());
            return Err(ExitCode::from(EXIT_REJECTED));
        }
    };
    Ok(Program {
        term,
        ty,
        cfg: RunConfig { calculus, fuel: opts.fuel, seed: opts.seed, output: opts.output },
    })
}

fn calculus_label(c: Calculus) -> &'static str {
    match c {
        Calculus::Prob => "prob",
        Calculus::Mixed => "mixed",
    }
}

fn matrix_json(d: &DensityMatrix) -> serde_json::Value {
    let dim = 1usize << d.qubits();
    let entries: Vec<serde_json::Value> = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .map(|(i, j)| {
            let z = d.matrix().get(i, j);
            serde_json::json!([z.re, z.im])
        })
        .collect();
    serde_json::json!({ "kind": "mat", "n": d.qubits(), "entries": entries })
}

fn matrix_text(d: &DensityMatrix) -> String {
    print(&rho(d.clone()))
}

fn cmd_typecheck(s: &Single) -> ExitCode {
    let prog = match load(&s.file, &s.opts) {
        Ok(p) => p,
        Err(code) => return code,
    };
    match prog.cfg.output {
        OutputOpt::Json => println!(
            "{}",
            serde_json::json!({
                "calculus": calculus_label(prog.cfg.calculus),
                "type": prog.ty.to_string(),
            })
        ),
        _ => println!("{}", prog.ty),
    }
    ExitCode::SUCCESS
}

fn cmd_run(s: &Single) -> ExitCode {
    let prog = match load(&s.file, &s.opts) {
        Ok(p) => p,
        Err(code) => return code,
    };
    match prog.cfg.calculus {
        Calculus::Prob => run_prob(&prog),
        Calculus::Mixed => run_mixed(&prog),
    }
}

fn run_prob(prog: &Program) -> ExitCode {
    if let Some(seed) = prog.cfg.seed {
        let leaf = match sample_run(&prog.term, seed, prog.cfg.fuel) {
            Ok(t) => t,
            Err(e) => return eval_failure(&e),
        };
        match prog.cfg.output {
            OutputOpt::Json => println!(
                "{}",
                serde_json::json!({ "calculus": "prob", "seed": seed, "sample": print(&leaf) })
            ),
            _ => println!("{}", print(&leaf)),
        }
        return ExitCode::SUCCESS;
    }

    let tree = match build_trace(&prog.term, prog.cfg.fuel) {
        Ok(t) => t,
        Err(e) => return eval_failure(&e),
    };
    let dist = match final_distribution(&tree) {
        Ok(d) => d,
        Err(e) => return eval_failure(&e),
    };
    let density = distribution_density(&dist).ok();
    match prog.cfg.output {
        OutputOpt::Json => {
            let items: Vec<serde_json::Value> = dist
                .iter()
                .map(|(p, t)| serde_json::json!({ "p": p, "term": print(t) }))
                .collect();
            println!(
                "{}",
                serde_json::json!({
                    "calculus": "prob",
                    "distribution": items,
                    "density": density.as_ref().map(matrix_json),
                })
            );
        }
        _ => {
            for (p, t) in &dist {
                println!("{}  {}", ldm_core::syntax::nice_scalar(*p), print(t));
            }
            if let Some(d) = &density {
                println!("density: {}", matrix_text(d));
            }
        }
    }
    ExitCode::SUCCESS
}

fn run_mixed(prog: &Program) -> ExitCode {
    let result = match normalize_mixed(&prog.term, prog.cfg.fuel) {
        Ok(t) => t,
        Err(e) => return eval_failure(&e),
    };
    if let MixedStepResult::Stuck(reason) = step_mixed(&result) {
        eprintln!("ldm: stuck: {reason}");
        return ExitCode::from(EXIT_REJECTED);
    }
    let density = match &result.kind {
        ldm_core::TermKind::Rho(d) => Some(d.clone()),
        _ => None,
    };
    match prog.cfg.output {
        OutputOpt::Json => println!(
            "{}",
            serde_json::json!({
                "calculus": "mixed",
                "result": print(&result),
                "density": density.as_ref().map(matrix_json),
            })
        ),
        _ => println!("{}", print(&result)),
    }
    ExitCode::SUCCESS
}

fn eval_failure(e: &EvalError) -> ExitCode {
    eprintln!("ldm: {e}");
    match e {
        EvalError::FuelExhausted | EvalError::IncompleteTrace => ExitCode::from(EXIT_FUEL),
        _ => ExitCode::from(EXIT_REJECTED),
    }
}

fn cmd_trace(s: &Single) -> ExitCode {
    let prog = match load(&s.file, &s.opts) {
        Ok(p) => p,
        Err(code) => return code,
    };
    match prog.cfg.calculus {
        Calculus::Prob => trace_prob(&prog),
        Calculus::Mixed => trace_mixed(&prog),
    }
}

fn trace_prob(prog: &Program) -> ExitCode {
    let tree = match build_trace(&prog.term, prog.cfg.fuel) {
        Ok(t) => t,
        Err(e) => return eval_failure(&e),
    };
    match prog.cfg.output {
        OutputOpt::Json => println!("{}", trace_to_json(&tree)),
        OutputOpt::Dot => print!("{}", trace_to_dot(&tree)),
        OutputOpt::Text => {
            let mut out = String::new();
            render_tree(&tree, 0, &mut out);
            print!("{out}");
        }
    }
    if has_exhausted_leaf(&tree) {
        eprintln!("ldm: fuel exhausted before some branches terminated");
        return ExitCode::from(EXIT_FUEL);
    }
    ExitCode::SUCCESS
}

fn render_tree(tree: &TraceTree, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    let marker = match tree.status {
        LeafStatus::Stuck => "  [stuck]",
        LeafStatus::FuelExhausted => "  [fuel exhausted]",
        _ => "",
    };
    out.push_str(&format!("{indent}{}{marker}\n", print(&tree.term)));
    for (p, child) in &tree.children {
        out.push_str(&format!(
            "{indent}  -[{}]->\n",
            ldm_core::syntax::nice_scalar(*p)
        ));
        render_tree(child, depth + 1, out);
    }
}

fn has_exhausted_leaf(tree: &TraceTree) -> bool {
    tree.status == LeafStatus::FuelExhausted
        || tree.children.iter().any(|(_, c)| has_exhausted_leaf(c))
}

fn trace_mixed(prog: &Program) -> ExitCode {
    // Step log: the input line, then one line per rule application. The
    // log is replayed here rather than via the evaluator's helper so a
    // fuel-exhausted prefix is still printed, with a marker.
    let mut lines: Vec<(Option<&'static str>, Term)> = vec![(None, prog.term.clone())];
    let mut cur = prog.term.clone();
    let mut exhausted = true;
    let mut stuck = None;
    for _ in 0..prog.cfg.fuel {
        match step_mixed(&cur) {
            MixedStepResult::Stepped { term, rule } => {
                lines.push((Some(rule), term.clone()));
                cur = term;
            }
            MixedStepResult::Value => {
                exhausted = false;
                break;
            }
            MixedStepResult::Stuck(reason) => {
                exhausted = false;
                stuck = Some(reason);
                break;
            }
        }
    }
    match prog.cfg.output {
        OutputOpt::Json => {
            for (rule, term) in &lines {
                println!("{}", serde_json::json!({ "rule": rule, "term": print(term) }));
            }
        }
        OutputOpt::Dot => {
            println!("digraph trace {{");
            println!("  rankdir=TB;");
            for (i, (_, term)) in lines.iter().enumerate() {
                println!("  n{i} [label=\"{}\"];", dot_escape(&print(term)));
            }
            for (i, (rule, _)) in lines.iter().enumerate().skip(1) {
                println!("  n{} -> n{i} [label=\"{}\"];", i - 1, rule.unwrap_or(""));
            }
            println!("}}");
        }
        OutputOpt::Text => {
            for (rule, term) in &lines {
                println!("{}  {}", rule.unwrap_or("input"), print(term));
            }
        }
    }
    if let Some(reason) = stuck {
        eprintln!("ldm: stuck: {reason}");
    }
    if exhausted {
        eprintln!("ldm: fuel exhausted");
        return ExitCode::from(EXIT_FUEL);
    }
    ExitCode::SUCCESS
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn cmd_denote(s: &Single) -> ExitCode {
    let prog = match load(&s.file, &s.opts) {
        Ok(p) => p,
        Err(code) => return code,
    };
    if !free_vars(&prog.term).is_empty() {
        eprintln!("ldm: only closed programs have a denotation");
        return ExitCode::from(EXIT_REJECTED);
    }
    let set = match interp(&prog.term, &Valuation::new()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("ldm: {e}");
            return ExitCode::from(EXIT_REJECTED);
        }
    };
    let flat = match fsem(&prog.term, &Valuation::new()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("ldm: {e}");
            return ExitCode::from(EXIT_REJECTED);
        }
    };
    match prog.cfg.output {
        OutputOpt::Json => {
            let matrix = match &flat {
                FSem::Mat(d) => Some(matrix_json(d)),
                FSem::Fun(_) => None,
            };
            println!(
                "{}",
                serde_json::json!({
                    "calculus": calculus_label(prog.cfg.calculus),
                    "type": prog.ty.to_string(),
                    "triplets": set.to_json(),
                    "matrix": matrix,
                })
            );
        }
        _ => {
            println!("{set}");
            match &flat {
                FSem::Mat(d) => println!("matrix: {}", matrix_text(d)),
                FSem::Fun(_) => println!("matrix: (function type; no matrix)"),
            }
        }
    }
    ExitCode::SUCCESS
}

fn cmd_equiv(p: &Pair) -> ExitCode {
    let a = match load(&p.file, &p.opts) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let b = match load(&p.file2, &p.opts) {
        Ok(x) => x,
        Err(code) => return code,
    };
    for prog in [&a, &b] {
        if !free_vars(&prog.term).is_empty() {
            eprintln!("ldm: only closed programs can be compared");
            return ExitCode::from(EXIT_REJECTED);
        }
    }
    if a.ty != b.ty {
        eprintln!("ldm: types differ: {} vs {}", a.ty, b.ty);
        return ExitCode::from(EXIT_REJECTED);
    }
    if matches!(a.ty, Type::Arrow(..)) {
        eprintln!("ldm: function-typed programs are compared only at ground type");
        return ExitCode::from(EXIT_REJECTED);
    }
    let mats: Vec<DensityMatrix> = {
        let mut out = Vec::new();
        for prog in [&a, &b] {
            match fsem(&prog.term, &Valuation::new()) {
                Ok(FSem::Mat(d)) => out.push(d),
                Ok(FSem::Fun(_)) => unreachable!("ground type flattens to a matrix"),
                Err(e) => {
                    eprintln!("ldm: {e}");
                    return ExitCode::from(EXIT_REJECTED);
                }
            }
        }
        out
    };
    let dim = 1usize << mats[0].qubits();
    let mut deviation = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            deviation =
                deviation.max((mats[0].matrix().get(i, j) - mats[1].matrix().get(i, j)).norm());
        }
    }
    let equivalent = deviation <= tolerance();
    match p.opts.output {
        OutputOpt::Json => println!(
            "{}",
            serde_json::json!({
                "verdict": if equivalent { "EQUIVALENT" } else { "DISTINCT" },
                "deviation": deviation,
            })
        ),
        _ => {
            let verdict = if equivalent { "EQUIVALENT" } else { "DISTINCT" };
            println!("{verdict} (max deviation {deviation:.3e})");
        }
    }
    if equivalent {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_REJECTED)
    }
}
