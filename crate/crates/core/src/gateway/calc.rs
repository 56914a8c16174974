//! Exact-arithmetic calculator skill.
//!
//! Grammar: decimal literals, binary `+ - * /`, unary minus, parentheses.
//! `*` and `/` bind tighter than `+` and `-`; all binary operators are left
//! associative. Parsing is a small Pratt parser producing an AST, which is
//! then evaluated over arbitrary-precision rationals so results are exact.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalcError {
    #[error("parse error at {position}: expected one of [{}], found {found}", .expected.join(", "))]
    Parse { position: usize, expected: Vec<&'static str>, found: String },
    #[error("division by zero")]
    DivisionByZero,
}

/// Exact rational result. Displays as a decimal without trailing zeros when
/// the expansion terminates, otherwise as `≈` followed by ten decimals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactValue(pub BigRational);

impl ExactValue {
    pub fn from_int(n: i64) -> Self {
        ExactValue(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn is_terminating(&self) -> bool {
        let mut d = self.0.denom().clone();
        for p in [2u32, 5] {
            let p = BigInt::from(p);
            while (&d % &p).is_zero() {
                d /= &p;
            }
        }
        d.is_one()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

fn render_scaled(numer: &BigInt, scale: u32) -> String {
    // numer / 10^scale, numer >= 0
    let digits = numer.to_string();
    if scale == 0 {
        return digits;
    }
    let scale = scale as usize;
    let padded =
        if digits.len() <= scale { format!("{}{}", "0".repeat(scale - digits.len() + 1), digits) } else { digits };
    let (int_part, frac_part) = padded.split_at(padded.len() - scale);
    let frac = frac_part.trim_end_matches('0');
    if frac.is_empty() {
        int_part.to_string()
    } else {
        format!("{int_part}.{frac}")
    }
}

impl fmt::Display for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.0;
        let sign = if v.is_negative() { "-" } else { "" };
        let abs = v.abs();
        if self.is_terminating() {
            let mut d = abs.denom().clone();
            let mut scale = 0u32;
            let ten = BigInt::from(10);
            let mut n = abs.numer().clone();
            // multiply numerator up until the denominator divides a power of ten
            while !d.is_one() {
                let g = num_integer::Integer::gcd(&d, &ten);
                n *= &ten / &g;
                d /= &g;
                scale += 1;
            }
            write!(f, "{sign}{}", render_scaled(&n, scale))
        } else {
            let scale = 10u32;
            let factor = BigInt::from(10).pow(scale);
            let scaled = (abs * BigRational::from_integer(factor)).round().to_integer();
            write!(f, "≈{sign}{}", render_scaled(&scaled, scale))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Op(Op),
    LParen,
    RParen,
}

#[derive(Debug)]
enum Expr {
    Num(BigRational),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
}

fn normalize(c: char) -> char {
    match c {
        '×' | '＊' => '*',
        '÷' | '／' => '/',
        '＋' => '+',
        '－' | '−' => '-',
        '（' => '(',
        '）' => ')',
        c => c,
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, CalcError> {
    let chars: Vec<char> = src.chars().map(normalize).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Op(Op::Add),
            '-' => Tok::Op(Op::Sub),
            '*' => Tok::Op(Op::Mul),
            '/' => Tok::Op(Op::Div),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '0'..='9' | '.' => {
                let mut int_digits = String::new();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    int_digits.push(chars[i]);
                    i += 1;
                }
                let mut frac_digits = String::new();
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        frac_digits.push(chars[i]);
                        i += 1;
                    }
                    if frac_digits.is_empty() {
                        return Err(CalcError::Parse {
                            position: i,
                            expected: vec!["digit"],
                            found: found_at(&chars, i),
                        });
                    }
                }
                if int_digits.is_empty() && frac_digits.is_empty() {
                    return Err(CalcError::Parse {
                        position: start,
                        expected: vec!["digit"],
                        found: found_at(&chars, start),
                    });
                }
                let all = format!("{int_digits}{frac_digits}");
                let numer: BigInt = all.parse().expect("ascii digits");
                let denom = BigInt::from(10).pow(frac_digits.len() as u32);
                out.push((start, Tok::Num(BigRational::new(numer, denom))));
                continue;
            }
            _ => {
                return Err(CalcError::Parse {
                    position: i,
                    expected: vec!["number", "operator", "(", ")"],
                    found: format!("{c:?}"),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

fn found_at(chars: &[char], i: usize) -> String {
    chars.get(i).map_or_else(|| "end of input".to_string(), |c| format!("{c:?}"))
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

const UNARY_BP: u8 = 5;

fn infix_bp(op: Op) -> (u8, u8) {
    match op {
        Op::Add | Op::Sub => (1, 2),
        Op::Mul | Op::Div => (3, 4),
    }
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn found(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(Tok::Num(n)) => ExactValue(n.clone()).to_string(),
            Some(Tok::Op(o)) => format!("{:?}", op_char(*o)),
            Some(Tok::LParen) => "'('".into(),
            Some(Tok::RParen) => "')'".into(),
        }
    }

    fn error(&self, expected: Vec<&'static str>) -> CalcError {
        CalcError::Parse { position: self.position(), expected, found: self.found() }
    }

    fn expr(&mut self, min_bp: u8, depth: usize) -> Result<Expr, CalcError> {
        let mut lhs = match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Expr::Num(n)
            }
            Some(Tok::Op(Op::Sub)) => {
                self.pos += 1;
                Expr::Neg(Box::new(self.expr(UNARY_BP, depth)?))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr(0, depth + 1)?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error(vec!["+", "-", "*", "/", ")"]));
                }
                self.pos += 1;
                inner
            }
            _ => return Err(self.error(vec!["number", "(", "-"])),
        };
        loop {
            let op = match self.peek() {
                Some(Tok::Op(op)) => *op,
                None | Some(Tok::RParen) => break,
                Some(_) => {
                    let mut expected = vec!["+", "-", "*", "/"];
                    expected.push(if depth > 0 { ")" } else { "end of input" });
                    return Err(self.error(expected));
                }
            };
            let (l_bp, r_bp) = infix_bp(op);
            if l_bp < min_bp {
                break;
            }
            self.pos += 1;
            let rhs = self.expr(r_bp, depth)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }
}

fn op_char(op: Op) -> char {
    match op {
        Op::Add => '+',
        Op::Sub => '-',
        Op::Mul => '*',
        Op::Div => '/',
    }
}

fn eval(e: &Expr) -> Result<BigRational, CalcError> {
    Ok(match e {
        Expr::Num(n) => n.clone(),
        Expr::Neg(x) => -eval(x)?,
        Expr::Bin(op, a, b) => {
            let a = eval(a)?;
            let b = eval(b)?;
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => {
                    if b.is_zero() {
                        return Err(CalcError::DivisionByZero);
                    }
                    a / b
                }
            }
        }
    })
}

fn parse(expr: &str) -> Result<Expr, CalcError> {
    let toks = lex(expr)?;
    let end = expr.chars().count();
    let mut p = Parser { toks, pos: 0, end };
    let e = p.expr(0, 0)?;
    if p.pos != p.toks.len() {
        return Err(p.error(vec!["+", "-", "*", "/", "end of input"]));
    }
    Ok(e)
}

/// Parses and evaluates `expr` exactly.
pub fn eval_expression(expr: &str) -> Result<ExactValue, CalcError> {
    eval(&parse(expr)?).map(ExactValue)
}

/// True when `query` is a well-formed expression containing at least one
/// operator; a bare number is not treated as a calculation.
pub fn looks_like_expression(query: &str) -> bool {
    match lex(query) {
        Ok(toks) => toks.iter().any(|(_, t)| matches!(t, Tok::Op(_))) && parse(query).is_ok(),
        Err(_) => false,
    }
}

/// Finds the longest substring of `text` that is a calculator expression,
/// e.g. `"what is (2+3)*4?"` → `"(2+3)*4"`.
pub fn extract_expression(text: &str) -> Option<String> {
    let allowed = |c: char| {
        let c = normalize(c);
        c.is_ascii_digit() || " .+-*/()".contains(c)
    };
    let mut best: Option<String> = None;
    let mut current = String::new();
    for c in text.chars().chain(std::iter::once('\u{0}')) {
        if allowed(c) {
            current.push(c);
            continue;
        }
        let candidate = current.trim().trim_end_matches(['.', ' ']).trim().to_string();
        if looks_like_expression(&candidate)
            && best.as_ref().is_none_or(|b| b.chars().count() < candidate.chars().count())
        {
            best = Some(candidate);
        }
        current.clear();
    }
    best
}
