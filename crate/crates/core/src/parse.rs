//! Expression grammar shared by polynomial and form literals.
//!
//! ```text
//! expr    = term (('+' | '-') term)*
//! term    = unary (['*'] power)*          juxtaposition multiplies
//! unary   = ('-' | '+') unary | power
//! power   = primary ('^' (integer | power))?
//! primary = number ['i'] | 'i' | var | dvar | '(' expr ')'
//! var     = ('z' | 'w') [index]           dvar = 'd' var
//! ```
//!
//! `a ^ b` is a power when `b` is an integer and a wedge product otherwise.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::poly::HoloPoly;

/// Sum of `coefficient * dz^I` keyed by increasing zero-based index sets.
pub(crate) type Expr = BTreeMap<Vec<usize>, HoloPoly>;

pub(crate) fn parse_expression(text: &str) -> Result<Expr> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(LabError::Parse(format!(
            "unexpected token {:?} in {text:?}",
            parser.tokens[parser.pos]
        )));
    }
    Ok(expr)
}

fn scalar(c: Complex64) -> Expr {
    let mut e = Expr::new();
    e.insert(Vec::new(), HoloPoly::constant(0, c));
    e
}

fn add(a: &Expr, b: &Expr, sign: f64) -> Expr {
    let mut out = a.clone();
    for (index, poly) in b {
        let scaled = poly.scale(Complex64::new(sign, 0.0));
        let entry = out
            .entry(index.clone())
            .or_insert_with(|| HoloPoly::zero(0));
        *entry = &*entry + &scaled;
    }
    out.retain(|_, p| !p.is_zero());
    out
}

/// Sign of the permutation sorting `a ++ b`, or `None` if they share an index.
pub(crate) fn merge_sign(a: &[usize], b: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut inversions = 0;
    for &x in a {
        for &y in b {
            if x == y {
                return None;
            }
            if x > y {
                inversions += 1;
            }
        }
    }
    let mut merged: Vec<usize> = a.iter().chain(b).copied().collect();
    merged.sort_unstable();
    Some((merged, if inversions % 2 == 0 { 1.0 } else { -1.0 }))
}

fn wedge(a: &Expr, b: &Expr) -> Expr {
    let mut out = Expr::new();
    for (ia, pa) in a {
        for (ib, pb) in b {
            let Some((index, sign)) = merge_sign(ia, ib) else {
                continue;
            };
            let prod = (pa * pb).scale(Complex64::new(sign, 0.0));
            let entry = out.entry(index).or_insert_with(|| HoloPoly::zero(0));
            *entry = &*entry + &prod;
        }
    }
    out.retain(|_, p| !p.is_zero());
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Imag,
    Var(usize),
    Diff(usize),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn variable_index(chars: &[char], i: &mut usize) -> Result<usize> {
    let start = *i;
    while *i < chars.len() && chars[*i].is_ascii_digit() {
        *i += 1;
    }
    if *i == start {
        return Ok(1);
    }
    let s: String = chars[start..*i].iter().collect();
    let index = s
        .parse::<usize>()
        .map_err(|e| LabError::Parse(format!("bad variable index {s:?}: {e}")))?;
    if index == 0 {
        return Err(LabError::Parse("variable indices start at 1".into()));
    }
    Ok(index)
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let simple = match c {
            '+' => Some(Token::Plus),
            '-' => Some(Token::Minus),
            '*' => Some(Token::Star),
            '^' | '∧' => Some(Token::Caret),
            '(' => Some(Token::LParen),
            ')' => Some(Token::RParen),
            'i' => Some(Token::Imag),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(tok);
            i += 1;
            continue;
        }
        match c {
            c if c.is_whitespace() => i += 1,
            'z' | 'w' => {
                i += 1;
                out.push(Token::Var(variable_index(&chars, &mut i)?));
            }
            'd' if matches!(chars.get(i + 1), Some('z' | 'w')) => {
                i += 2;
                out.push(Token::Diff(variable_index(&chars, &mut i)?));
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v = s
                    .parse::<f64>()
                    .map_err(|e| LabError::Parse(format!("bad number {s:?}: {e}")))?;
                out.push(Token::Num(v));
            }
            other => return Err(LabError::Parse(format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = add(&acc, &t, 1.0);
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = add(&acc, &t, -1.0);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr> {
        let first = self.unary()?;
        self.term_tail(first)
    }

    fn term_tail(&mut self, mut acc: Expr) -> Result<Expr> {
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    acc = wedge(&acc, &rhs);
                }
                Some(
                    Token::Num(_) | Token::Imag | Token::Var(_) | Token::Diff(_) | Token::LParen,
                ) => {
                    let rhs = self.power()?;
                    acc = wedge(&acc, &rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                let inner = self.unary()?;
                Ok(add(&Expr::new(), &inner, -1.0))
            }
            Some(Token::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek() != Some(&Token::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        if let Some(Token::Num(v)) = self.peek().cloned() {
            self.pos += 1;
            if !(v >= 0.0 && v.fract() == 0.0 && v <= 64.0) {
                return Err(LabError::Parse(format!(
                    "exponent must be a small nonnegative integer, got {v}"
                )));
            }
            let mut acc = scalar(Complex64::new(1.0, 0.0));
            for _ in 0..v as u32 {
                acc = wedge(&acc, &base);
            }
            return Ok(acc);
        }
        if self.peek() == Some(&Token::Minus) {
            return Err(LabError::Parse(
                "exponent must be a small nonnegative integer".into(),
            ));
        }
        let rhs = self.power()?;
        Ok(wedge(&base, &rhs))
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => {
                if self.peek() == Some(&Token::Imag) {
                    self.pos += 1;
                    return Ok(scalar(Complex64::new(0.0, v)));
                }
                Ok(scalar(Complex64::new(v, 0.0)))
            }
            Some(Token::Imag) => Ok(scalar(Complex64::new(0.0, 1.0))),
            Some(Token::Var(k)) => {
                let mut e = Expr::new();
                e.insert(Vec::new(), HoloPoly::variable(k, k - 1));
                Ok(e)
            }
            Some(Token::Diff(k)) => {
                let mut e = Expr::new();
                e.insert(vec![k - 1], HoloPoly::constant(0, Complex64::new(1.0, 0.0)));
                Ok(e)
            }
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(inner),
                    Some(other) => Err(LabError::Parse(format!("expected ')', got {other:?}"))),
                    None => Err(LabError::Parse("unclosed '('".into())),
                }
            }
            Some(other) => Err(LabError::Parse(format!("unexpected token {other:?}"))),
            None => Err(LabError::Parse("unexpected end of input".into())),
        }
    }
}
