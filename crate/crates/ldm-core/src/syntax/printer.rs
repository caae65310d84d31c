//! Concrete-syntax printer. `parse(print(t))` is alpha-equivalent to `t` for
//! every well-formed term; parentheses are inserted wherever the precedence
//! levels (lambda < tensor < U/meas prefixes < application < atoms) require.

use num_complex::Complex64;

use crate::matrix::DensityMatrix;
use crate::tol::tolerance;

use super::{Gate, GateExpr, Term, TermKind};

/// Precedence context a subterm is printed in.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Level {
    /// Top of file, lambda bodies, sum addends, letcase slots.
    Top = 0,
    /// Operand of `><`.
    Tensor = 1,
    /// Operand of `U[...]` / `meas[...]`.
    Prefix = 2,
    /// Function position of an application.
    AppFun = 3,
    /// Argument position of an application.
    Atom = 4,
}

pub fn print(t: &Term) -> String {
    let mut out = String::new();
    go(t, Level::Top, &mut out);
    out
}

fn go(t: &Term, level: Level, out: &mut String) {
    match &t.kind {
        TermKind::Var(x) => out.push_str(x),
        TermKind::Lam(x, body) => {
            let parens = level > Level::Top;
            if parens {
                out.push('(');
            }
            out.push('\\');
            out.push_str(x);
            out.push_str(". ");
            go(body, Level::Top, out);
            if parens {
                out.push(')');
            }
        }
        TermKind::App(f, a) => {
            let parens = level > Level::AppFun;
            if parens {
                out.push('(');
            }
            go(f, Level::AppFun, out);
            out.push(' ');
            go(a, Level::Atom, out);
            if parens {
                out.push(')');
            }
        }
        TermKind::Rho(d) => out.push_str(&print_density(d)),
        TermKind::Unitary(g, inner) => {
            let parens = level > Level::Prefix;
            if parens {
                out.push('(');
            }
            out.push_str("U[");
            out.push_str(&print_gate(g));
            out.push_str("] ");
            go(inner, Level::Prefix, out);
            if parens {
                out.push(')');
            }
        }
        TermKind::Meas(m, inner) => {
            let parens = level > Level::Prefix;
            if parens {
                out.push('(');
            }
            out.push_str(&format!("meas[{m}] "));
            go(inner, Level::Prefix, out);
            if parens {
                out.push(')');
            }
        }
        TermKind::Tensor(l, r) => {
            let parens = level > Level::Tensor;
            if parens {
                out.push('(');
            }
            go(l, Level::Tensor, out);
            out.push_str(" >< ");
            // Right operand one level up keeps `><` left-associative.
            go(r, Level::Prefix, out);
            if parens {
                out.push(')');
            }
        }
        TermKind::Pair(b, m, d) => {
            out.push_str(&format!("pair({b}, {m}, {})", print_density(d)));
        }
        TermKind::LetCase { star, var, scrutinee, branches } => {
            out.push_str(if *star { "letcase* " } else { "letcase " });
            out.push_str(var);
            out.push_str(" = ");
            go(scrutinee, Level::Top, out);
            out.push_str(" in { ");
            for (i, b) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(" ; ");
                }
                go(b, Level::Top, out);
            }
            out.push_str(" }");
        }
        TermKind::Sum(addends) => {
            out.push_str("sum { ");
            for (i, (p, a)) in addends.iter().enumerate() {
                if i > 0 {
                    out.push_str(" ; ");
                }
                out.push_str(&nice_scalar(*p));
                out.push_str(": ");
                go(a, Level::Top, out);
            }
            out.push_str(" }");
        }
    }
}

fn print_gate(g: &GateExpr) -> String {
    match g {
        GateExpr::Named(Gate::I(1)) => "I".to_string(),
        GateExpr::Named(Gate::I(n)) => format!("I({n})"),
        GateExpr::Named(Gate::X) => "X".to_string(),
        GateExpr::Named(Gate::Y) => "Y".to_string(),
        GateExpr::Named(Gate::Z) => "Z".to_string(),
        GateExpr::Named(Gate::H) => "H".to_string(),
        GateExpr::Named(Gate::Cnot) => "CNOT".to_string(),
        GateExpr::TensorG(a, b) => {
            // `*` is associative on resolved operators; print flat.
            format!("{}*{}", print_gate(a), print_gate(b))
        }
        GateExpr::Lit(u) => {
            let mut s = format!("mat[{}]{{ ", u.qubits());
            let m = u.matrix();
            for i in 0..m.rows() {
                if i > 0 {
                    s.push_str(" ; ");
                }
                for j in 0..m.cols() {
                    if j > 0 {
                        s.push_str(", ");
                    }
                    s.push_str(&print_complex(m.get(i, j)));
                }
            }
            s.push_str(" }");
            s
        }
    }
}

/// Density literals print as ket shorthand when they match a recognizable
/// pure state, otherwise as an explicit `rho[n]{...}` block.
pub(super) fn print_density(d: &DensityMatrix) -> String {
    let tol = tolerance().max(1e-12);
    if d.approx_eq(&DensityMatrix::bell00(), tol) {
        return "bell00".to_string();
    }
    if d.qubits() == 1 {
        if d.approx_eq(&DensityMatrix::plus(), tol) {
            return "|+>".to_string();
        }
        if d.approx_eq(&DensityMatrix::minus(), tol) {
            return "|->".to_string();
        }
    }
    for idx in 0..d.dim() {
        if d.approx_eq(&DensityMatrix::pure_basis(d.qubits(), idx), tol) {
            let bits: String = (0..d.qubits())
                .rev()
                .map(|k| if idx >> k & 1 == 1 { '1' } else { '0' })
                .collect();
            return format!("|{bits}>");
        }
    }
    let mut s = format!("rho[{}]{{ ", d.qubits());
    let m = d.matrix();
    for i in 0..m.rows() {
        if i > 0 {
            s.push_str(" ; ");
        }
        for j in 0..m.cols() {
            if j > 0 {
                s.push_str(", ");
            }
            s.push_str(&print_complex(m.get(i, j)));
        }
    }
    s.push_str(" }");
    s
}

fn print_complex(z: Complex64) -> String {
    let re_zero = z.re.abs() <= 1e-12;
    let im_zero = z.im.abs() <= 1e-12;
    match (re_zero, im_zero) {
        (true, true) => "0".to_string(),
        (false, true) => nice_scalar(z.re),
        (true, false) => format!("{}i", nice_scalar(z.im)),
        (false, false) => {
            if z.im < 0.0 {
                format!("{}-{}i", nice_scalar(z.re), nice_scalar(-z.im))
            } else {
                format!("{}+{}i", nice_scalar(z.re), nice_scalar(z.im))
            }
        }
    }
}

/// Shortest human-friendly rendering of a real scalar: integers, small
/// fractions `p/q`, and `sqrt(k)/q` forms are recognized; everything else
/// falls back to the shortest round-tripping decimal.
pub fn nice_scalar(x: f64) -> String {
    if x.abs() <= 1e-12 {
        return "0".to_string();
    }
    if (x - x.round()).abs() <= 1e-12 && x.abs() < 1e15 {
        return format!("{}", x.round() as i64);
    }
    for q in 2..=64u32 {
        let p = x * q as f64;
        if (p - p.round()).abs() <= 1e-9 && p.abs() < 1e9 {
            let mut num = p.round() as i64;
            let mut den = q as i64;
            let g = gcd(num.unsigned_abs(), den.unsigned_abs());
            num /= g as i64;
            den /= g as i64;
            if den == 1 {
                return format!("{num}");
            }
            return format!("{num}/{den}");
        }
    }
    let sign = if x < 0.0 { "-" } else { "" };
    let ax = x.abs();
    for k in 2..=32u32 {
        let root = (k as f64).sqrt();
        if root.fract().abs() <= 1e-12 {
            continue;
        }
        for q in 1..=32u32 {
            if (ax - root / q as f64).abs() <= 1e-12 {
                if q == 1 {
                    return format!("{sign}sqrt({k})");
                }
                return format!("{sign}sqrt({k})/{q}");
            }
        }
    }
    format!("{x}")
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}
