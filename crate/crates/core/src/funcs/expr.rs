//! Expression trees over one variable `x`, with a small recursive-descent
//! parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | 'pi' | 'x' | '(' expr ')'
//!         | ('sin' | 'cos' | 'abs') '(' expr ')'
//!         | table_name '(' expr ')'
//!         | '-' factor
//! ```
//!
//! Division is only allowed by expressions that do not depend on `x`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::interval::Interval;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("divisor at position {pos} depends on x; only constant divisors are allowed")]
    NonConstantDivisor { pos: usize },
    #[error("division by zero at position {pos}")]
    DivisionByZero { pos: usize },
    #[error("piecewise-linear table `{name}`: {reason}")]
    BadTable { name: String, reason: String },
}

/// A continuous piecewise-linear function given by its vertices.
///
/// Outside the first and last abscissa the function is held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    name: String,
    points: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self, ParseError> {
        let name = name.into();
        let bad = |reason: &str| ParseError::BadTable {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if !is_identifier(&name) || RESERVED.contains(&name.as_str()) {
            return Err(bad("name must be an identifier other than x, pi, sin, cos, abs"));
        }
        if points.len() < 2 {
            return Err(bad("needs at least two points"));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(bad("non-finite coordinate"));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(bad("abscissae must be strictly increasing"));
        }
        Ok(Self { name, points })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let k = pts.partition_point(|p| p.0 <= t) - 1;
        let (x0, y0) = pts[k];
        let (x1, y1) = pts[k + 1];
        y0 + (y1 - y0) * (t - x0) / (x1 - x0)
    }

    pub fn slope(&self, seg: usize) -> f64 {
        let (x0, y0) = self.points[seg];
        let (x1, y1) = self.points[seg + 1];
        (y1 - y0) / (x1 - x0)
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    /// Exact range of the table over `t`.
    pub fn range(&self, t: Interval) -> Interval {
        let mut lo = self.eval(t.lo).min(self.eval(t.hi));
        let mut hi = self.eval(t.lo).max(self.eval(t.hi));
        for &(x, y) in &self.points {
            if t.lo < x && x < t.hi {
                lo = lo.min(y);
                hi = hi.max(y);
            }
        }
        Interval::new(lo, hi).widen(2)
    }

    /// Range of slopes of the segments meeting `t`, including the flat
    /// extrapolation outside the vertices when `t` reaches there.
    pub fn slope_range(&self, t: Interval) -> Interval {
        let pts = &self.points;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if t.lo < pts[0].0 || t.hi > pts[pts.len() - 1].0 {
            lo = 0.0;
            hi = 0.0;
        }
        for seg in 0..self.segments() {
            if pts[seg].0 <= t.hi && pts[seg + 1].0 >= t.lo {
                let s = self.slope(seg);
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        if lo > hi {
            Interval::point(0.0)
        } else {
            Interval::new(lo, hi).widen(2)
        }
    }

    pub fn max_abs_slope(&self) -> f64 {
        (0..self.segments()).map(|s| self.slope(s).abs()).fold(0.0, f64::max)
    }
}

/// Named piecewise-linear tables available to the parser.
#[derive(Debug, Clone, Default)]
pub struct TableSet {
    tables: BTreeMap<String, Arc<PiecewiseLinear>>,
}

impl TableSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, table: PiecewiseLinear) {
        self.tables.insert(table.name.clone(), Arc::new(table));
    }

    pub fn get(&self, name: &str) -> Option<&Arc<PiecewiseLinear>> {
        self.tables.get(name)
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

const RESERVED: [&str; 5] = ["x", "pi", "sin", "cos", "abs"];

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    X,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Abs(Box<Expr>),
    Table(Arc<PiecewiseLinear>, Box<Expr>),
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ParseError> {
        Self::parse_with_tables(source, &TableSet::default())
    }

    pub fn parse_with_tables(source: &str, tables: &TableSet) -> Result<Expr, ParseError> {
        let mut p = Parser {
            src: source.as_bytes(),
            pos: 0,
            tables,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.syntax("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Pi => std::f64::consts::PI,
            Expr::X => x,
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Abs(a) => a.eval(x).abs(),
            Expr::Table(t, a) => t.eval(a.eval(x)),
        }
    }

    pub fn depends_on_x(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::X => true,
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Abs(a) | Expr::Table(_, a) => {
                a.depends_on_x()
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on_x() || b.depends_on_x()
            }
        }
    }

    pub fn uses_tables(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::X => false,
            Expr::Table(..) => true,
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Abs(a) => a.uses_tables(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.uses_tables() || b.uses_tables()
            }
        }
    }

    /// Replace every occurrence of `x` by `inner`.
    pub fn substitute(&self, inner: &Expr) -> Expr {
        let sub = |e: &Expr| Box::new(e.substitute(inner));
        match self {
            Expr::X => inner.clone(),
            Expr::Num(_) | Expr::Pi => self.clone(),
            Expr::Neg(a) => Expr::Neg(sub(a)),
            Expr::Add(a, b) => Expr::Add(sub(a), sub(b)),
            Expr::Sub(a, b) => Expr::Sub(sub(a), sub(b)),
            Expr::Mul(a, b) => Expr::Mul(sub(a), sub(b)),
            Expr::Div(a, b) => Expr::Div(sub(a), sub(b)),
            Expr::Sin(a) => Expr::Sin(sub(a)),
            Expr::Cos(a) => Expr::Cos(sub(a)),
            Expr::Abs(a) => Expr::Abs(sub(a)),
            Expr::Table(t, a) => Expr::Table(t.clone(), sub(a)),
        }
    }

    /// Natural interval extension over `x ∈ dom`.
    pub fn range(&self, dom: Interval) -> Interval {
        match self {
            Expr::Num(c) => Interval::point(*c),
            Expr::Pi => Interval::point(std::f64::consts::PI).widen(1),
            Expr::X => dom,
            Expr::Neg(a) => -a.range(dom),
            Expr::Add(a, b) => a.range(dom) + b.range(dom),
            Expr::Sub(a, b) => a.range(dom) - b.range(dom),
            Expr::Mul(a, b) => a.range(dom) * b.range(dom),
            Expr::Div(a, b) => {
                let d = b.eval(0.0);
                a.range(dom).scale(1.0 / d).widen(1)
            }
            Expr::Sin(a) => a.range(dom).sin(),
            Expr::Cos(a) => a.range(dom).cos(),
            Expr::Abs(a) => a.range(dom).abs(),
            Expr::Table(t, a) => t.range(a.range(dom)),
        }
    }

    /// Joint enclosure of the value and of every one-sided derivative over
    /// `x ∈ dom`.
    pub fn range_with_slope(&self, dom: Interval) -> (Interval, Interval) {
        let zero = Interval::point(0.0);
        match self {
            Expr::Num(_) | Expr::Pi => (self.range(dom), zero),
            Expr::X => (dom, Interval::point(1.0)),
            Expr::Neg(a) => {
                let (v, d) = a.range_with_slope(dom);
                (-v, -d)
            }
            Expr::Add(a, b) => {
                let (va, da) = a.range_with_slope(dom);
                let (vb, db) = b.range_with_slope(dom);
                (va + vb, da + db)
            }
            Expr::Sub(a, b) => {
                let (va, da) = a.range_with_slope(dom);
                let (vb, db) = b.range_with_slope(dom);
                (va - vb, da - db)
            }
            Expr::Mul(a, b) => {
                let (va, da) = a.range_with_slope(dom);
                let (vb, db) = b.range_with_slope(dom);
                (va * vb, da * vb + va * db)
            }
            Expr::Div(a, b) => {
                let inv = 1.0 / b.eval(0.0);
                let (va, da) = a.range_with_slope(dom);
                (va.scale(inv).widen(1), da.scale(inv).widen(1))
            }
            Expr::Sin(a) => {
                let (v, d) = a.range_with_slope(dom);
                (v.sin(), v.cos() * d)
            }
            Expr::Cos(a) => {
                let (v, d) = a.range_with_slope(dom);
                (v.cos(), -(v.sin() * d))
            }
            Expr::Abs(a) => {
                let (v, d) = a.range_with_slope(dom);
                let slope = if v.lo > 0.0 {
                    d
                } else if v.hi < 0.0 {
                    -d
                } else {
                    let m = d.mag();
                    Interval::new(-m, m)
                };
                (v.abs(), slope)
            }
            Expr::Table(t, a) => {
                let (v, d) = a.range_with_slope(dom);
                (t.range(v), t.slope_range(v) * d)
            }
        }
    }

    fn collect_tables(&self, out: &mut BTreeMap<String, Arc<PiecewiseLinear>>) {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::X => {}
            Expr::Table(t, a) => {
                out.insert(t.name.clone(), t.clone());
                a.collect_tables(out);
            }
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Abs(a) => a.collect_tables(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_tables(out);
                b.collect_tables(out);
            }
        }
    }

    /// Tables referenced by this expression, so its printed form can be
    /// parsed back.
    pub fn tables(&self) -> TableSet {
        let mut tables = BTreeMap::new();
        self.collect_tables(&mut tables);
        TableSet { tables }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{})", -c)
            }
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Pi => f.write_str("pi"),
            Expr::X => f.write_str("x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Abs(a) => write!(f, "abs({a})"),
            Expr::Table(t, a) => write!(f, "{}({a})", t.name),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    tables: &'a TableSet,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    self.skip_ws();
                    let at = self.pos;
                    let rhs = self.factor()?;
                    if rhs.depends_on_x() {
                        return Err(ParseError::NonConstantDivisor { pos: at });
                    }
                    if rhs.eval(0.0) == 0.0 {
                        return Err(ParseError::DivisionByZero { pos: at });
                    }
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.syntax(&format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Expr::Num).map_err(|_| ParseError::Syntax {
            pos: start,
            message: format!("malformed number `{text}`"),
        })
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match name {
            "x" => Ok(Expr::X),
            "pi" => Ok(Expr::Pi),
            "sin" | "cos" | "abs" => {
                let arg = Box::new(self.call_argument()?);
                Ok(match name {
                    "sin" => Expr::Sin(arg),
                    "cos" => Expr::Cos(arg),
                    _ => Expr::Abs(arg),
                })
            }
            _ => match self.tables.get(name) {
                Some(t) => {
                    let t = t.clone();
                    Ok(Expr::Table(t, Box::new(self.call_argument()?)))
                }
                None => Err(ParseError::UnknownIdentifier {
                    pos: start,
                    name: name.to_string(),
                }),
            },
        }
    }

    fn call_argument(&mut self) -> Result<Expr, ParseError> {
        self.expect(b'(')?;
        let e = self.expr()?;
        self.expect(b')')?;
        Ok(e)
    }
}
