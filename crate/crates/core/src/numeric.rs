//! Numeric cell parsing.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Result of pulling the central number out of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericParse {
    pub value: f64,
    pub had_uncertainty: bool,
    pub had_exponent: bool,
    /// The cell held a range ("500–600") and `value` is its midpoint.
    pub was_range: bool,
    pub raw: String,
}

static CITATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[[^\]]*\]").unwrap());
static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\d+(?:\.\d*)?|\.\d+)(?:[eE]([-+]?\d+))?").unwrap());
static TIMES_TEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:×|x|X|\*|·)\s*10\s*(?:\^|\*\*)?\s*[\{\(]?\s*([-+]?\s*\d+)").unwrap()
});
static UNCERTAINTY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:±|\+/-|\+-)\s*\.?\d|^\(\d+\)").unwrap());
static RANGE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:(-)|(~|to))\s*([-+]?)(\d+(?:\.\d*)?|\.\d+)(?:[eE]([-+]?\d+))?").unwrap()
});
static PURE_EXPR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[\d.\s+\-*/^×÷()]+$").unwrap());

/// Compatibility-normalize cell text and fold the many dash and minus
/// glyphs onto ASCII `-`.
pub fn normalize_text(s: &str) -> String {
    s.nfkc()
        .map(|c| match c {
            '\u{2212}' | '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}'
            | '\u{FE63}' | '\u{FF0D}' => '-',
            '\u{00A0}' | '\u{2009}' | '\u{202F}' => ' ',
            c => c,
        })
        .collect()
}

/// Extract the central numeric value of a cell.
///
/// Uncertainties (`± 0.1`, `5.23(2)`) are stripped, `×10^x` multipliers and
/// e-notation are resolved, bracketed citations are ignored and a range
/// `a–b` yields its midpoint. Returns `None` when no digits are present.
pub fn find_num(cell: &str) -> Option<NumericParse> {
    let norm = normalize_text(cell);
    let text = CITATION.replace_all(&norm, " ");
    let m = NUMBER.captures(&text)?;
    let whole = m.get(0).unwrap();

    let negative = leading_sign(&text, whole.start()) == Some('-');
    let mut value: f64 = m.get(0).unwrap().as_str().parse().ok()?;
    if negative {
        value = -value;
    }
    let mut had_exponent = m.get(2).is_some();
    let mut had_uncertainty = false;
    let mut was_range = false;

    let rest = &text[whole.end()..];
    if let Some(e) = TIMES_TEN.captures(rest) {
        let exp: i32 = e[1].replace(' ', "").parse().ok()?;
        value *= 10f64.powi(exp);
        had_exponent = true;
        let after = &rest[e.get(0).unwrap().end()..];
        if UNCERTAINTY.is_match(after) {
            had_uncertainty = true;
        }
    } else if UNCERTAINTY.is_match(rest) {
        had_uncertainty = true;
    } else if let Some(r) = RANGE.captures(rest) {
        // a bare dash may not carry a sign on the second number
        let dash = r.get(1).is_some();
        if !(dash && !r[3].is_empty()) {
            let mut hi: f64 = r[4].parse().ok()?;
            if let Some(e) = r.get(5) {
                hi *= 10f64.powi(e.as_str().parse().ok()?);
                had_exponent = true;
            }
            if &r[3] == "-" {
                hi = -hi;
            }
            value = (value + hi) / 2.0;
            had_uncertainty = true;
            was_range = true;
        }
    }

    value.is_finite().then(|| NumericParse {
        value,
        had_uncertainty,
        had_exponent,
        was_range,
        raw: cell.to_string(),
    })
}

/// `find_num(..).map(|n| n.value)`.
pub fn num_value(cell: &str) -> Option<f64> {
    find_num(cell).map(|n| n.value)
}

/// Cells whose content starts with a number, after an optional sign or
/// approximation mark. Labels that merely contain digits ("SiO2 (mol%)",
/// "G1") are rejected.
pub fn looks_numeric(cell: &str) -> bool {
    let norm = normalize_text(cell);
    let text = CITATION.replace_all(&norm, " ");
    let mut chars = text
        .trim_start_matches(|c: char| c.is_whitespace() || "+-~≈<>≤≥(".contains(c))
        .chars();
    match chars.next() {
        Some(c) if c.is_ascii_digit() => true,
        Some('.') => chars.next().is_some_and(|c| c.is_ascii_digit()),
        _ => false,
    }
}

fn leading_sign(text: &str, start: usize) -> Option<char> {
    let before = &text[..start];
    let mut chars = before.chars().rev();
    let c = chars.next()?;
    if c != '-' && c != '+' {
        return None;
    }
    match chars.next() {
        None => Some(c),
        Some(p) if p.is_whitespace() || "(=<>~:;,/≈≤≥".contains(p) => Some(c),
        _ => None,
    }
}

/// Median of a slice; `None` when empty. NaNs must be filtered by the caller.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Evaluate cells that are pure arithmetic (`3/4`, `2.5*2`, `(1+2)^2`).
///
/// Only `+ - * / ^ × ÷` and parentheses are accepted, and at least one
/// operator other than a leading sign or a range dash must be present.
pub fn eval_expr(cell: &str) -> Option<f64> {
    let text = normalize_text(cell);
    let text = text.trim();
    if text.is_empty() || !PURE_EXPR.is_match(text) {
        return None;
    }
    if !text.contains(['*', '/', '^', '×', '÷', '+', '(']) {
        return None;
    }
    let tokens = tokenize(text)?;
    let mut p = ExprParser { tokens, pos: 0 };
    let v = p.sum()?;
    (p.pos == p.tokens.len() && v.is_finite()).then_some(v)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Op(char),
    Open,
    Close,
}

fn tokenize(s: &str) -> Option<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' => i += 1,
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let lit: String = chars[start..i].iter().collect();
                out.push(Tok::Num(lit.parse().ok()?));
            }
            '+' | '-' | '*' | '/' | '^' => {
                out.push(Tok::Op(c));
                i += 1;
            }
            '×' => {
                out.push(Tok::Op('*'));
                i += 1;
            }
            '÷' => {
                out.push(Tok::Op('/'));
                i += 1;
            }
            '(' => {
                out.push(Tok::Open);
                i += 1;
            }
            ')' => {
                out.push(Tok::Close);
                i += 1;
            }
            _ => return None,
        }
    }
    Some(out)
}

struct ExprParser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl ExprParser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn sum(&mut self) -> Option<f64> {
        let mut acc = self.product()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.product()?;
            acc = if op == '+' { acc + rhs } else { acc - rhs };
        }
        Some(acc)
    }

    fn product(&mut self) -> Option<f64> {
        let mut acc = self.power()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.power()?;
            acc = if op == '*' { acc * rhs } else { acc / rhs };
        }
        Some(acc)
    }

    fn power(&mut self) -> Option<f64> {
        let base = self.unary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.power()?;
            return Some(base.powf(exp));
        }
        Some(base)
    }

    fn unary(&mut self) -> Option<f64> {
        match self.peek().cloned() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Some(-self.unary()?)
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Option<f64> {
        match self.peek().cloned()? {
            Tok::Num(v) => {
                self.pos += 1;
                Some(v)
            }
            Tok::Open => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(&Tok::Close) {
                    return None;
                }
                self.pos += 1;
                Some(v)
            }
            _ => None,
        }
    }
}
