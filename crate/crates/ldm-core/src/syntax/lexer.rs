//! Hand-rolled lexer for `.ldm` sources. Produces byte-offset-annotated
//! tokens; `#` starts a comment running to end of line. Kets `|...>` are
//! lexed as single tokens so `>` never collides with the `><` tensor
//! operator.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    Float(f64),
    /// Contents between `|` and `>`: `0`/`1` strings, `+`, or `-`.
    Ket(String),
    Lambda,
    Dot,
    Comma,
    Semi,
    Colon,
    Equals,
    Star,
    Slash,
    Plus,
    Minus,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    /// `><`
    TensorOp,
    // Keywords.
    LetCase,
    LetCaseStar,
    In,
    MeasKw,
    PairKw,
    SumKw,
    RhoKw,
    Bell00,
    UKw,
    MatKw,
    SqrtKw,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer {n}"),
            Tok::Float(x) => write!(f, "number {x}"),
            Tok::Ket(s) => write!(f, "ket |{s}>"),
            Tok::Lambda => write!(f, "`\\`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Equals => write!(f, "`=`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::TensorOp => write!(f, "`><`"),
            Tok::LetCase => write!(f, "`letcase`"),
            Tok::LetCaseStar => write!(f, "`letcase*`"),
            Tok::In => write!(f, "`in`"),
            Tok::MeasKw => write!(f, "`meas`"),
            Tok::PairKw => write!(f, "`pair`"),
            Tok::SumKw => write!(f, "`sum`"),
            Tok::RhoKw => write!(f, "`rho`"),
            Tok::Bell00 => write!(f, "`bell00`"),
            Tok::UKw => write!(f, "`U`"),
            Tok::MatKw => write!(f, "`mat`"),
            Tok::SqrtKw => write!(f, "`sqrt`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpannedTok {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

pub struct LexError {
    pub pos: usize,
    pub msg: String,
}

pub fn lex(src: &str) -> Result<Vec<SpannedTok>, LexError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'\\' => {
                toks.push(SpannedTok { tok: Tok::Lambda, start: i, end: i + 1 });
                i += 1;
            }
            b'.' => {
                toks.push(SpannedTok { tok: Tok::Dot, start: i, end: i + 1 });
                i += 1;
            }
            b',' => {
                toks.push(SpannedTok { tok: Tok::Comma, start: i, end: i + 1 });
                i += 1;
            }
            b';' => {
                toks.push(SpannedTok { tok: Tok::Semi, start: i, end: i + 1 });
                i += 1;
            }
            b':' => {
                toks.push(SpannedTok { tok: Tok::Colon, start: i, end: i + 1 });
                i += 1;
            }
            b'=' => {
                toks.push(SpannedTok { tok: Tok::Equals, start: i, end: i + 1 });
                i += 1;
            }
            b'*' => {
                toks.push(SpannedTok { tok: Tok::Star, start: i, end: i + 1 });
                i += 1;
            }
            b'/' => {
                toks.push(SpannedTok { tok: Tok::Slash, start: i, end: i + 1 });
                i += 1;
            }
            b'+' => {
                toks.push(SpannedTok { tok: Tok::Plus, start: i, end: i + 1 });
                i += 1;
            }
            b'-' => {
                toks.push(SpannedTok { tok: Tok::Minus, start: i, end: i + 1 });
                i += 1;
            }
            b'(' => {
                toks.push(SpannedTok { tok: Tok::LParen, start: i, end: i + 1 });
                i += 1;
            }
            b')' => {
                toks.push(SpannedTok { tok: Tok::RParen, start: i, end: i + 1 });
                i += 1;
            }
            b'{' => {
                toks.push(SpannedTok { tok: Tok::LBrace, start: i, end: i + 1 });
                i += 1;
            }
            b'}' => {
                toks.push(SpannedTok { tok: Tok::RBrace, start: i, end: i + 1 });
                i += 1;
            }
            b'[' => {
                toks.push(SpannedTok { tok: Tok::LBracket, start: i, end: i + 1 });
                i += 1;
            }
            b']' => {
                toks.push(SpannedTok { tok: Tok::RBracket, start: i, end: i + 1 });
                i += 1;
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'<') {
                    toks.push(SpannedTok { tok: Tok::TensorOp, start: i, end: i + 2 });
                    i += 2;
                } else {
                    return Err(LexError { pos: i, msg: "stray `>` (tensor is `><`)".into() });
                }
            }
            b'|' => {
                let start = i;
                i += 1;
                let content_start = i;
                while i < bytes.len() && bytes[i] != b'>' && bytes[i] != b'\n' {
                    i += 1;
                }
                if i >= bytes.len() || bytes[i] != b'>' {
                    return Err(LexError { pos: start, msg: "unterminated ket".into() });
                }
                let content = &src[content_start..i];
                let ok = content == "+"
                    || content == "-"
                    || (!content.is_empty() && content.bytes().all(|b| b == b'0' || b == b'1'));
                if !ok {
                    return Err(LexError {
                        pos: start,
                        msg: format!("unknown ket |{content}> (expected |bits>, |+> or |->)"),
                    });
                }
                i += 1;
                toks.push(SpannedTok { tok: Tok::Ket(content.to_string()), start, end: i });
            }
            b'0'..=b'9' => {
                let start = i;
                let mut is_float = false;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
                    is_float = true;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        is_float = true;
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let tok = if is_float {
                    Tok::Float(text.parse().map_err(|_| LexError {
                        pos: start,
                        msg: format!("bad number `{text}`"),
                    })?)
                } else {
                    match text.parse::<u64>() {
                        Ok(n) => Tok::Int(n),
                        Err(_) => Tok::Float(text.parse().map_err(|_| LexError {
                            pos: start,
                            msg: format!("bad number `{text}`"),
                        })?),
                    }
                };
                toks.push(SpannedTok { tok, start, end: i });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'')
                {
                    i += 1;
                }
                let word = &src[start..i];
                let tok = match word {
                    "letcase" => {
                        if bytes.get(i) == Some(&b'*') {
                            i += 1;
                            Tok::LetCaseStar
                        } else {
                            Tok::LetCase
                        }
                    }
                    "in" => Tok::In,
                    "meas" => Tok::MeasKw,
                    "pair" => Tok::PairKw,
                    "sum" => Tok::SumKw,
                    "rho" => Tok::RhoKw,
                    "bell00" => Tok::Bell00,
                    "U" => Tok::UKw,
                    "mat" => Tok::MatKw,
                    "sqrt" => Tok::SqrtKw,
                    _ => Tok::Ident(word.to_string()),
                };
                toks.push(SpannedTok { tok, start, end: i });
            }
            _ => {
                return Err(LexError {
                    pos: i,
                    msg: format!("unexpected character `{}`", &src[i..].chars().next().unwrap()),
                })
            }
        }
    }
    toks.push(SpannedTok { tok: Tok::Eof, start: src.len(), end: src.len() });
    Ok(toks)
}
