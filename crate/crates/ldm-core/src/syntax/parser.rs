//! Recursive-descent parser for `.ldm` sources.
//!
//! Precedence, loosest to tightest: lambda and the bodies of braces,
//! tensor `><`, the `U[...]`/`meas[...]` prefixes, application by
//! juxtaposition, atoms. `letcase`, `sum`, `pair` and density literals are
//! self-delimiting and parse as atoms.

use num_complex::Complex64;

use crate::matrix::{ComplexMatrix, DensityMatrix, UnitaryOp};
use crate::tol::tolerance;

use super::lexer::{lex, SpannedTok, Tok};
use super::{Calculus, Gate, GateExpr, Term};

/// Position-annotated parse error; `line` and `col` are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub pos: usize,
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for ParseError {}

/// Largest qubit count accepted for explicit matrix and ket literals; keeps
/// literal sizes sane (a 12-qubit density block already has 16M entries).
const MAX_LITERAL_QUBITS: u64 = 12;

/// Scans for a `#calculus: prob` / `#calculus: mixed` pragma comment.
/// The pragma may sit on any line; the first one wins.
pub fn parse_pragma(source: &str) -> Option<Calculus> {
    for line in source.lines() {
        let line = line.trim_start();
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim_start();
            if let Some(value) = rest.strip_prefix("calculus:") {
                match value.trim() {
                    "prob" => return Some(Calculus::Prob),
                    "mixed" => return Some(Calculus::Mixed),
                    _ => {}
                }
            }
        }
    }
    None
}

/// Parses a complete term in the given calculus.
pub fn parse(source: &str, calculus: Calculus) -> Result<Term, ParseError> {
    let toks = lex(source).map_err(|e| at(source, e.pos, e.msg))?;
    let mut p = Parser { src: source, toks, i: 0, calculus };
    let t = p.expr()?;
    p.expect(&Tok::Eof)?;
    debug_assert!(super::well_formed(&t, calculus).is_ok());
    Ok(t)
}

fn at(src: &str, pos: usize, msg: String) -> ParseError {
    let mut line = 1;
    let mut line_start = 0;
    for (idx, b) in src.bytes().enumerate() {
        if idx >= pos {
            break;
        }
        if b == b'\n' {
            line += 1;
            line_start = idx + 1;
        }
    }
    ParseError { pos, line, col: (pos - line_start + 1) as u32, msg }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<SpannedTok>,
    i: usize,
    calculus: Calculus,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn pos(&self) -> usize {
        self.toks[self.i].start
    }

    fn bump(&mut self) -> SpannedTok {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        at(self.src, self.pos(), msg.into())
    }

    fn expect(&mut self, want: &Tok) -> Result<SpannedTok, ParseError> {
        if std::mem::discriminant(self.peek()) == std::mem::discriminant(want) {
            Ok(self.bump())
        } else {
            Err(self.error(format!("expected {want}, found {}", self.peek())))
        }
    }

    fn expect_int(&mut self) -> Result<u64, ParseError> {
        match self.peek() {
            Tok::Int(n) => {
                let n = *n;
                self.bump();
                Ok(n)
            }
            other => Err(self.error(format!("expected integer, found {other}"))),
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {other}"))),
        }
    }

    fn spanned(&self, mut t: Term, start: usize) -> Term {
        let end = self.toks[self.i.saturating_sub(1)].end;
        t.span = Some((start, end));
        t
    }

    fn expr(&mut self) -> Result<Term, ParseError> {
        let start = self.pos();
        if *self.peek() == Tok::Lambda {
            self.bump();
            let binder = self.expect_ident()?;
            self.expect(&Tok::Dot)?;
            let body = self.expr()?;
            return Ok(self.spanned(super::lam(binder, body), start));
        }
        self.tensor()
    }

    fn tensor(&mut self) -> Result<Term, ParseError> {
        let start = self.pos();
        let mut t = self.prefix()?;
        while *self.peek() == Tok::TensorOp {
            self.bump();
            let r = self.prefix()?;
            t = self.spanned(super::tensor(t, r), start);
        }
        Ok(t)
    }

    fn prefix(&mut self) -> Result<Term, ParseError> {
        let start = self.pos();
        match self.peek() {
            Tok::UKw => {
                self.bump();
                self.expect(&Tok::LBracket)?;
                let g = self.gate_expr()?;
                self.expect(&Tok::RBracket)?;
                let operand = self.prefix()?;
                Ok(self.spanned(super::unitary(g, operand), start))
            }
            Tok::MeasKw => {
                self.bump();
                self.expect(&Tok::LBracket)?;
                let m = self.expect_int()?;
                if m < 1 || m > MAX_LITERAL_QUBITS {
                    return Err(at(
                        self.src,
                        start,
                        format!("measurement width must be in 1..={MAX_LITERAL_QUBITS}, got {m}"),
                    ));
                }
                self.expect(&Tok::RBracket)?;
                let operand = self.prefix()?;
                Ok(self.spanned(super::meas(m as u32, operand), start))
            }
            _ => self.apps(),
        }
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Ident(_)
                | Tok::LParen
                | Tok::RhoKw
                | Tok::Ket(_)
                | Tok::Bell00
                | Tok::PairKw
                | Tok::LetCase
                | Tok::LetCaseStar
                | Tok::SumKw
        )
    }

    fn apps(&mut self) -> Result<Term, ParseError> {
        let start = self.pos();
        let mut t = self.atom()?;
        while self.starts_atom() {
            let a = self.atom()?;
            t = self.spanned(super::app(t, a), start);
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        let start = self.pos();
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(self.spanned(super::var(name), start))
            }
            Tok::LParen => {
                self.bump();
                let t = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(self.spanned(t, start))
            }
            Tok::RhoKw | Tok::Ket(_) | Tok::Bell00 => {
                let d = self.density()?;
                Ok(self.spanned(super::rho(d), start))
            }
            Tok::PairKw => {
                if self.calculus == Calculus::Mixed {
                    return Err(self.error("`pair` is not part of the mixed calculus"));
                }
                self.bump();
                self.expect(&Tok::LParen)?;
                let b = self.expect_int()?;
                self.expect(&Tok::Comma)?;
                let m = self.expect_int()?;
                self.expect(&Tok::Comma)?;
                let d = self.density()?;
                self.expect(&Tok::RParen)?;
                if m < 1 || m > MAX_LITERAL_QUBITS {
                    return Err(at(self.src, start, format!("pair measures {m} qubits")));
                }
                if b >= 1 << m {
                    return Err(at(
                        self.src,
                        start,
                        format!("pair outcome {b} out of range for {m} measured qubits"),
                    ));
                }
                if m as u32 > d.qubits() {
                    return Err(at(
                        self.src,
                        start,
                        format!(
                            "pair measures {m} qubits but carries a {}-qubit state",
                            d.qubits()
                        ),
                    ));
                }
                Ok(self.spanned(super::pair(b, m as u32, d), start))
            }
            Tok::LetCase | Tok::LetCaseStar => {
                let star = *self.peek() == Tok::LetCaseStar;
                match (star, self.calculus) {
                    (false, Calculus::Mixed) => {
                        return Err(self.error("`letcase` is not part of the mixed calculus (use `letcase*`)"))
                    }
                    (true, Calculus::Prob) => {
                        return Err(self.error("`letcase*` is not part of the prob calculus (use `letcase`)"))
                    }
                    _ => {}
                }
                self.bump();
                let binder = self.expect_ident()?;
                self.expect(&Tok::Equals)?;
                let scrutinee = self.expr()?;
                self.expect(&Tok::In)?;
                self.expect(&Tok::LBrace)?;
                let mut branches = vec![self.expr()?];
                while *self.peek() == Tok::Semi {
                    self.bump();
                    branches.push(self.expr()?);
                }
                self.expect(&Tok::RBrace)?;
                if branches.len() < 2 || !branches.len().is_power_of_two() {
                    return Err(at(
                        self.src,
                        start,
                        format!(
                            "letcase needs 2^m branches for some m >= 1, got {}",
                            branches.len()
                        ),
                    ));
                }
                Ok(self.spanned(super::letcase(star, binder, scrutinee, branches), start))
            }
            Tok::SumKw => {
                if self.calculus == Calculus::Prob {
                    return Err(self.error("`sum` is not part of the prob calculus"));
                }
                self.bump();
                self.expect(&Tok::LBrace)?;
                let mut addends = Vec::new();
                loop {
                    let wstart = self.pos();
                    let w = self.real_scalar()?;
                    if w <= tolerance() || w > 1.0 + tolerance() {
                        return Err(at(self.src, wstart, format!("sum weight {w} not in (0, 1]")));
                    }
                    self.expect(&Tok::Colon)?;
                    let t = self.expr()?;
                    addends.push((w, t));
                    if *self.peek() == Tok::Semi {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(&Tok::RBrace)?;
                let total: f64 = addends.iter().map(|(p, _)| p).sum();
                if (total - 1.0).abs() > tolerance() * 10.0 {
                    return Err(at(self.src, start, format!("sum weights total {total}, expected 1")));
                }
                Ok(self.spanned(super::sum(addends), start))
            }
            other => Err(self.error(format!("expected a term, found {other}"))),
        }
    }

    fn density(&mut self) -> Result<DensityMatrix, ParseError> {
        let start = self.pos();
        match self.peek().clone() {
            Tok::Bell00 => {
                self.bump();
                Ok(DensityMatrix::bell00())
            }
            Tok::Ket(content) => {
                self.bump();
                match content.as_str() {
                    "+" => Ok(DensityMatrix::plus()),
                    "-" => Ok(DensityMatrix::minus()),
                    bits => {
                        if bits.len() as u64 > MAX_LITERAL_QUBITS {
                            return Err(at(self.src, start, format!("ket |{bits}> too wide")));
                        }
                        let n = bits.len() as u32;
                        let idx = usize::from_str_radix(bits, 2).expect("lexer validated bits");
                        Ok(DensityMatrix::pure_basis(n, idx))
                    }
                }
            }
            Tok::RhoKw => {
                self.bump();
                self.expect(&Tok::LBracket)?;
                let n = self.expect_int()?;
                if n < 1 || n > MAX_LITERAL_QUBITS {
                    return Err(at(self.src, start, format!("rho qubit count {n} out of range")));
                }
                self.expect(&Tok::RBracket)?;
                let mat = self.matrix_block(1 << n)?;
                DensityMatrix::new(n as u32, mat)
                    .map_err(|e| at(self.src, start, format!("invalid density matrix: {e}")))
            }
            other => Err(self.error(format!("expected a density literal, found {other}"))),
        }
    }

    /// `{ a, b ; c, d }` with exactly `dim` rows of `dim` entries.
    fn matrix_block(&mut self, dim: usize) -> Result<ComplexMatrix, ParseError> {
        let start = self.pos();
        self.expect(&Tok::LBrace)?;
        let mut rows: Vec<Vec<Complex64>> = Vec::new();
        loop {
            let mut row = vec![self.complex_entry()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                row.push(self.complex_entry()?);
            }
            rows.push(row);
            if *self.peek() == Tok::Semi {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(&Tok::RBrace)?;
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(at(
                self.src,
                start,
                format!("matrix block must be {dim}x{dim} for the declared qubit count"),
            ));
        }
        Ok(ComplexMatrix::from_rows(rows).expect("rows validated rectangular"))
    }

    /// Complex entry: `[-] part [(+|-) part]` where part is a real scalar
    /// with an optional `i` suffix.
    fn complex_entry(&mut self) -> Result<Complex64, ParseError> {
        let start = self.pos();
        let mut neg = false;
        if *self.peek() == Tok::Minus {
            self.bump();
            neg = true;
        }
        let (v1, im1) = self.scalar_part()?;
        let mut z = if im1 {
            Complex64::new(0.0, if neg { -v1 } else { v1 })
        } else {
            Complex64::new(if neg { -v1 } else { v1 }, 0.0)
        };
        if matches!(self.peek(), Tok::Plus | Tok::Minus) {
            let neg2 = *self.peek() == Tok::Minus;
            self.bump();
            let (v2, im2) = self.scalar_part()?;
            if im1 == im2 {
                return Err(at(
                    self.src,
                    start,
                    "complex entry needs one real and one imaginary part".to_string(),
                ));
            }
            let v2 = if neg2 { -v2 } else { v2 };
            if im2 {
                z.im = v2;
            } else {
                z.re = v2;
            }
        }
        Ok(z)
    }

    /// Real scalar with optional `i` marker: `3`, `0.25`, `3/4`,
    /// `sqrt(3)/4`, each optionally followed by `i`.
    fn scalar_part(&mut self) -> Result<(f64, bool), ParseError> {
        let v = self.real_scalar()?;
        if let Tok::Ident(s) = self.peek() {
            if s == "i" {
                self.bump();
                return Ok((v, true));
            }
        }
        Ok((v, false))
    }

    fn real_scalar(&mut self) -> Result<f64, ParseError> {
        let base = match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                n as f64
            }
            Tok::Float(x) => {
                self.bump();
                x
            }
            Tok::SqrtKw => {
                self.bump();
                self.expect(&Tok::LParen)?;
                let k = self.number()?;
                self.expect(&Tok::RParen)?;
                if k < 0.0 {
                    return Err(self.error("sqrt of a negative number"));
                }
                k.sqrt()
            }
            other => return Err(self.error(format!("expected a number, found {other}"))),
        };
        if *self.peek() == Tok::Slash {
            self.bump();
            let d = self.number()?;
            if d == 0.0 {
                return Err(self.error("division by zero in scalar"));
            }
            Ok(base / d)
        } else {
            Ok(base)
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n as f64)
            }
            Tok::Float(x) => {
                self.bump();
                Ok(x)
            }
            other => Err(self.error(format!("expected a number, found {other}"))),
        }
    }

    fn gate_expr(&mut self) -> Result<GateExpr, ParseError> {
        let mut g = self.gate_atom()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let r = self.gate_atom()?;
            g = GateExpr::TensorG(Box::new(g), Box::new(r));
        }
        Ok(g)
    }

    fn gate_atom(&mut self) -> Result<GateExpr, ParseError> {
        let start = self.pos();
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let g = self.gate_expr()?;
                self.expect(&Tok::RParen)?;
                Ok(g)
            }
            Tok::MatKw => {
                self.bump();
                self.expect(&Tok::LBracket)?;
                let n = self.expect_int()?;
                if n < 1 || n > MAX_LITERAL_QUBITS {
                    return Err(at(self.src, start, format!("mat qubit count {n} out of range")));
                }
                self.expect(&Tok::RBracket)?;
                let mat = self.matrix_block(1 << n)?;
                let u = UnitaryOp::new(n as u32, mat)
                    .map_err(|e| at(self.src, start, format!("invalid unitary: {e}")))?;
                Ok(GateExpr::Lit(u))
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "I" => {
                        if *self.peek() == Tok::LParen {
                            self.bump();
                            let n = self.expect_int()?;
                            self.expect(&Tok::RParen)?;
                            if n < 1 || n > MAX_LITERAL_QUBITS {
                                return Err(at(
                                    self.src,
                                    start,
                                    format!("identity arity {n} out of range"),
                                ));
                            }
                            Ok(GateExpr::Named(Gate::I(n as u32)))
                        } else {
                            Ok(GateExpr::Named(Gate::I(1)))
                        }
                    }
                    "X" => Ok(GateExpr::Named(Gate::X)),
                    "Y" => Ok(GateExpr::Named(Gate::Y)),
                    "Z" => Ok(GateExpr::Named(Gate::Z)),
                    "H" => Ok(GateExpr::Named(Gate::H)),
                    "CNOT" => Ok(GateExpr::Named(Gate::Cnot)),
                    other => {
                        Err(at(self.src, start, format!("unknown gate `{other}`")))
                    }
                }
            }
            other => Err(self.error(format!("expected a gate, found {other}"))),
        }
    }
}
