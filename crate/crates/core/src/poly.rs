//! Sparse polynomials in the domain variables, with a small text format.
//!
//! Two flavours share one representation:
//!
//! * [`ComplexPoly`]: holomorphic polynomials in `z1, z2` (`z` is an alias
//!   for `z1`), e.g. `"z1 - z2"`, `"(1+2*i)*z^3 + 1"`;
//! * [`RealPoly`]: real polynomials in the real coordinates `x1, y1, x2, y2`
//!   (`x`, `y` alias `x1`, `y1`; `Re(z2)` / `Im(z2)` are accepted too),
//!   e.g. `"-6*x"`, `"x^2 + y^2"`.
//!
//! The grammar is `expr := term (('+'|'-') term)*`, `term := unary ('*' unary)*`,
//! `unary := '-' unary | power`, `power := atom ('^' int)?`,
//! `atom := number | 'i' | variable | 'Re(' var ')' | 'Im(' var ')' | '(' expr ')'`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

type Exps = [u32; 4];

/// Sparse polynomial over at most four variable slots.
#[derive(Clone, Debug, Default, PartialEq)]
struct Poly {
    terms: BTreeMap<Exps, Complex64>,
}

impl Poly {
    fn constant(c: Complex64) -> Self {
        let mut p = Poly::default();
        p.add_term([0; 4], c);
        p
    }

    fn var(slot: usize) -> Self {
        let mut e = [0; 4];
        e[slot] = 1;
        let mut p = Poly::default();
        p.add_term(e, Complex64::new(1.0, 0.0));
        p
    }

    fn add_term(&mut self, e: Exps, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let entry = self.terms.entry(e).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
        if *entry == Complex64::new(0.0, 0.0) {
            self.terms.remove(&e);
        }
    }

    fn add(&self, other: &Poly, sign: f64) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, c * sign);
        }
        out
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3]];
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::constant(Complex64::new(1.0, 0.0));
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    fn as_constant(&self) -> Option<Complex64> {
        match self.terms.len() {
            0 => Some(Complex64::new(0.0, 0.0)),
            1 => self.terms.get(&[0; 4]).copied(),
            _ => None,
        }
    }

    fn derivative(&self, slot: usize) -> Poly {
        let mut out = Poly::default();
        for (e, c) in &self.terms {
            if e[slot] > 0 {
                let mut e2 = *e;
                e2[slot] -= 1;
                out.add_term(e2, c * e[slot] as f64);
            }
        }
        out
    }

    fn eval(&self, vals: &[Complex64; 4]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut t = *c;
            for (k, &p) in e.iter().enumerate() {
                if p > 0 {
                    t *= vals[k].powu(p);
                }
            }
            acc += t;
        }
        acc
    }

    fn max_slot_used(&self) -> Option<usize> {
        self.terms
            .keys()
            .flat_map(|e| (0..4).filter(move |&k| e[k] > 0))
            .max()
    }

    fn fmt_with(&self, f: &mut fmt::Formatter<'_>, names: &[&str; 4]) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            let mut factors: Vec<String> = Vec::new();
            for k in 0..4 {
                match e[k] {
                    0 => {}
                    1 => factors.push(names[k].to_string()),
                    p => factors.push(format!("{}^{}", names[k], p)),
                }
            }
            let (coef, negative) = if c.im == 0.0 {
                let neg = c.re < 0.0 && !first;
                let v = if neg { -c.re } else { c.re };
                (format!("{v}"), neg)
            } else if c.re == 0.0 {
                let neg = c.im < 0.0 && !first;
                let v = if neg { -c.im } else { c.im };
                (format!("{v}*i"), neg)
            } else {
                (format!("({}+{}*i)", c.re, c.im), false)
            };
            if !first {
                write!(f, " {} ", if negative { '-' } else { '+' })?;
            }
            if factors.is_empty() {
                write!(f, "{coef}")?;
            } else if coef == "1" {
                write!(f, "{}", factors.join("*"))?;
            } else if coef == "-1" {
                write!(f, "-{}", factors.join("*"))?;
            } else {
                write!(f, "{}*{}", coef, factors.join("*"))?;
            }
            first = false;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum VarSet {
    Complex,
    Real,
}

impl VarSet {
    fn slot(self, name: &str) -> Option<usize> {
        match (self, name) {
            (VarSet::Complex, "z" | "z1") => Some(0),
            (VarSet::Complex, "z2") => Some(1),
            (VarSet::Real, "x" | "x1") => Some(0),
            (VarSet::Real, "y" | "y1") => Some(1),
            (VarSet::Real, "x2") => Some(2),
            (VarSet::Real, "y2") => Some(3),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
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
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number '{text}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else if c == '\u{2212}' {
            // unicode minus
            out.push(Tok::Op('-'));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}' in '{s}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    vars: VarSet,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat_op(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = self.term()?;
        loop {
            if self.eat_op('+') {
                acc = acc.add(&self.term()?, 1.0);
            } else if self.eat_op('-') {
                acc = acc.add(&self.term()?, -1.0);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.unary()?;
        while self.eat_op('*') {
            acc = acc.mul(&self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Poly> {
        if self.eat_op('-') {
            let p = self.unary()?;
            return Ok(Poly::default().add(&p, -1.0));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Poly> {
        let base = self.atom()?;
        if self.eat_op('^') {
            match self.toks.get(self.pos) {
                Some(Tok::Num(n)) if n.fract() == 0.0 && *n >= 0.0 && *n <= 256.0 => {
                    let n = *n as u32;
                    self.pos += 1;
                    Ok(base.pow(n))
                }
                other => Err(Error::Parse(format!(
                    "exponent must be a non-negative integer, found {other:?}"
                ))),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Poly> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Poly::constant(Complex64::new(v, 0.0)))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let p = self.expr()?;
                if !self.eat_op(')') {
                    return Err(Error::Parse("missing ')'".into()));
                }
                Ok(p)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == "i" {
                    return Ok(Poly::constant(Complex64::new(0.0, 1.0)));
                }
                if let Some(slot) = self.vars.slot(&name) {
                    return Ok(Poly::var(slot));
                }
                let lower = name.to_ascii_lowercase();
                if self.vars == VarSet::Real && (lower == "re" || lower == "im") {
                    if !self.eat_op('(') {
                        return Err(Error::Parse(format!("expected '(' after {name}")));
                    }
                    let var = match self.toks.get(self.pos) {
                        Some(Tok::Ident(v)) => v.clone(),
                        other => {
                            return Err(Error::Parse(format!(
                                "expected a complex variable inside {name}(), found {other:?}"
                            )))
                        }
                    };
                    self.pos += 1;
                    if !self.eat_op(')') {
                        return Err(Error::Parse(format!("missing ')' after {name}({var}")));
                    }
                    let base = match var.as_str() {
                        "z" | "z1" => 0,
                        "z2" => 2,
                        _ => return Err(Error::Parse(format!("unknown variable '{var}'"))),
                    };
                    let slot = if lower == "re" { base } else { base + 1 };
                    return Ok(Poly::var(slot));
                }
                Err(Error::Parse(format!("unknown identifier '{name}'")))
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

fn parse_with(s: &str, vars: VarSet) -> Result<Poly> {
    let toks = tokenize(s)?;
    if toks.is_empty() {
        return Err(Error::Parse("empty polynomial".into()));
    }
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        vars,
    };
    let out = p.expr()?;
    if p.pos != toks.len() {
        return Err(Error::Parse(format!(
            "trailing input after position {} in '{s}'",
            p.pos
        )));
    }
    Ok(out)
}

/// Holomorphic polynomial in `z1, z2`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComplexPoly(Poly);

impl ComplexPoly {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(ComplexPoly(parse_with(s, VarSet::Complex)?))
    }

    pub fn constant(c: Complex64) -> Self {
        ComplexPoly(Poly::constant(c))
    }

    /// The coordinate function `z_{var+1}`.
    pub fn variable(var: usize) -> Self {
        assert!(var < 2, "complex polynomials have two variables");
        ComplexPoly(Poly::var(var))
    }

    /// `Σ c_k z^k` in the first variable.
    pub fn from_univariate(coeffs: &[Complex64]) -> Self {
        let mut p = Poly::default();
        for (k, c) in coeffs.iter().enumerate() {
            p.add_term([k as u32, 0, 0, 0], *c);
        }
        ComplexPoly(p)
    }

    /// Terms as `(exponent of z1, exponent of z2, coefficient)`.
    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, Complex64)> + '_ {
        self.0.terms.iter().map(|(e, c)| (e[0], e[1], *c))
    }

    pub fn is_zero(&self) -> bool {
        self.0.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<Complex64> {
        self.0.as_constant()
    }

    /// Number of variables actually used (0, 1 or 2).
    pub fn vars_used(&self) -> usize {
        self.0.max_slot_used().map_or(0, |s| s + 1)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.terms.keys().map(|e| e[0] + e[1]).max().unwrap_or(0)
    }

    /// True when every term has the same total degree, which makes `|p|`
    /// invariant under `(z1, z2) -> (e^{it} z1, e^{it} z2)`.
    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.0.terms.keys().map(|e| e[0] + e[1]);
        match degs.next() {
            None => true,
            Some(d) => degs.all(|x| x == d),
        }
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let vals = [
            z.first().copied().unwrap_or(zero),
            z.get(1).copied().unwrap_or(zero),
            zero,
            zero,
        ];
        self.0.eval(&vals)
    }

    /// Complex derivative with respect to `z_{var+1}`.
    pub fn derivative(&self, var: usize) -> ComplexPoly {
        ComplexPoly(self.0.derivative(var))
    }
}

impl fmt::Display for ComplexPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt_with(f, &["z1", "z2", "_", "_"])
    }
}

/// Real polynomial in `x1, y1, x2, y2`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RealPoly(Poly);

impl RealPoly {
    pub fn parse(s: &str) -> Result<Self> {
        let p = parse_with(s, VarSet::Real)?;
        if p.terms.values().any(|c| c.im != 0.0) {
            return Err(Error::Parse(format!(
                "real polynomial '{s}' has non-real coefficients"
            )));
        }
        Ok(RealPoly(p))
    }

    pub fn zero() -> Self {
        RealPoly(Poly::default())
    }

    pub fn is_zero(&self) -> bool {
        self.0.terms.is_empty()
    }

    /// Number of complex variables touched (0, 1 or 2).
    pub fn complex_vars_used(&self) -> usize {
        self.0.max_slot_used().map_or(0, |s| s / 2 + 1)
    }

    pub fn eval(&self, z: &[Complex64]) -> f64 {
        let zero = Complex64::new(0.0, 0.0);
        let z1 = z.first().copied().unwrap_or(zero);
        let z2 = z.get(1).copied().unwrap_or(zero);
        let vals = [
            Complex64::new(z1.re, 0.0),
            Complex64::new(z1.im, 0.0),
            Complex64::new(z2.re, 0.0),
            Complex64::new(z2.im, 0.0),
        ];
        self.0.eval(&vals).re
    }

    /// Wirtinger derivative `∂/∂z_{var+1} = (∂/∂x - i ∂/∂y) / 2`.
    pub fn d_dz(&self, z: &[Complex64], var: usize) -> Complex64 {
        let dx = RealPoly(self.0.derivative(2 * var)).eval(z);
        let dy = RealPoly(self.0.derivative(2 * var + 1)).eval(z);
        Complex64::new(dx, -dy) * 0.5
    }

    /// Laplacian in the complex variable `z_{var+1}`.
    pub fn laplacian(&self, z: &[Complex64], var: usize) -> f64 {
        let xx = self.0.derivative(2 * var).derivative(2 * var);
        let yy = self.0.derivative(2 * var + 1).derivative(2 * var + 1);
        RealPoly(xx).eval(z) + RealPoly(yy).eval(z)
    }
}

impl fmt::Display for RealPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt_with(f, &["x1", "y1", "x2", "y2"])
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                <$t>::parse(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(ComplexPoly);
string_serde!(RealPoly);

/// Evaluate `Σ c_k z^k` by Horner's rule.
pub fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Derivative of `Σ c_k z^k` at `z`.
pub fn horner_derivative(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, (k, c)| acc * z + c * k as f64)
}

/// Parse a scalar such as `0.5`, `-2`, `1+2*i` or `3i`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let trimmed = s.trim();
    // accept the common shorthand "3i" / "1-2i"
    let expanded = expand_imaginary_suffix(trimmed);
    let p = ComplexPoly::parse(&expanded)?;
    p.as_constant()
        .ok_or_else(|| Error::Parse(format!("'{s}' is not a constant")))
}

fn expand_imaginary_suffix(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 4);
    let chars: Vec<char> = s.chars().collect();
    for (k, &c) in chars.iter().enumerate() {
        if c == 'i' && k > 0 && (chars[k - 1].is_ascii_digit() || chars[k - 1] == '.') {
            out.push('*');
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parses_and_evaluates_complex() {
        let p = ComplexPoly::parse("z1 - z2").unwrap();
        assert_eq!(p.eval(&[c(0.5, 0.0), c(0.1, 0.0)]), c(0.4, 0.0));
        let q = ComplexPoly::parse("(1+2*i)*z^2 + 3").unwrap();
        assert_eq!(q.eval(&[c(1.0, 0.0)]), c(4.0, 2.0));
        assert_eq!(q.total_degree(), 2);
        assert!(!q.is_homogeneous());
        assert!(p.is_homogeneous());
    }

    #[test]
    fn expands_products() {
        let p = ComplexPoly::parse("(z1 + z2)^2").unwrap();
        let q = ComplexPoly::parse("z1^2 + 2*z1*z2 + z2^2").unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn real_poly_wirtinger() {
        // -2m Re z with m = 3: d/dz = -3
        let p = RealPoly::parse("-6*Re(z)").unwrap();
        assert_eq!(p.d_dz(&[c(0.3, 0.2)], 0), c(-3.0, 0.0));
        let q = RealPoly::parse("x^2 + y^2").unwrap();
        assert_eq!(q.laplacian(&[c(0.1, 0.1)], 0), 4.0);
        assert!(RealPoly::parse("i*x").is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in ["z1 - z2", "-z1^3 + 0.5*z2", "(1+2*i)*z1*z2 - 3", "0"] {
            let p = ComplexPoly::parse(s).unwrap();
            let back = ComplexPoly::parse(&p.to_string()).unwrap();
            assert_eq!(p, back, "{s} -> {p}");
        }
        let r = RealPoly::parse("-6*x + y^2 - x2*y2").unwrap();
        assert_eq!(RealPoly::parse(&r.to_string()).unwrap(), r);
    }

    #[test]
    fn rejects_garbage() {
        assert!(ComplexPoly::parse("z3").is_err());
        assert!(ComplexPoly::parse("z^-1").is_err());
        assert!(ComplexPoly::parse("(z").is_err());
        assert!(ComplexPoly::parse("z z").is_err());
        assert!(ComplexPoly::parse("").is_err());
    }

    #[test]
    fn complex_scalars() {
        assert_eq!(parse_complex("1-2i").unwrap(), c(1.0, -2.0));
        assert_eq!(parse_complex("0.25").unwrap(), c(0.25, 0.0));
        assert!(parse_complex("z").is_err());
    }

    #[test]
    fn horner_matches_direct() {
        let co = [c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.5)];
        let z = c(0.3, -0.4);
        let direct = co[0] + co[1] * z + co[2] * z * z;
        assert!((horner(&co, z) - direct).norm() < 1e-15);
        let d = co[1] + co[2] * z * 2.0;
        assert!((horner_derivative(&co, z) - d).norm() < 1e-15);
    }
}
