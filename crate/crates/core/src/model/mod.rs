//! Model definitions: interpolation data, the maps `W_i`, validation of the
//! model hypotheses and a small library of built-in models.

mod builtin;
mod config;

use std::fmt;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::funcs::{ExprFunction, Interval, ParseError, PiecewiseLinear, TableSet};

pub use builtin::{
    builtin_model, weierstrass_series, BuiltinError, BuiltinModel, BUILTIN_NAMES, EXAMPLE61_Y,
};
pub use config::{ConfigError, ModelConfig, ModelSection};

/// Absolute tolerance for the endpoint interpolation conditions.
pub const ENDPOINT_TOL: f64 = 1e-9;

/// Uniform knots on `[x_0, x_N]` with data values `y_0 … y_N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpolationData {
    n: usize,
    interval: Interval,
    y: Vec<f64>,
}

impl InterpolationData {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Position of knot `i` as an exact fraction of the interval.
    pub fn knot_fraction(&self, i: usize) -> Ratio<i64> {
        Ratio::new(i as i64, self.n as i64)
    }

    pub fn knot(&self, i: usize) -> f64 {
        self.at_fraction(self.knot_fraction(i))
    }

    pub fn at_fraction(&self, t: Ratio<i64>) -> f64 {
        let t = *t.numer() as f64 / *t.denom() as f64;
        self.interval.lo + t * self.interval.width()
    }

    /// `L_i` in exact interval fractions: `t ↦ (t + i − 1)/N`, `i` from 1.
    pub fn contract_fraction(&self, i: usize, t: Ratio<i64>) -> Ratio<i64> {
        (t + Ratio::from_integer(i as i64 - 1)) / Ratio::from_integer(self.n as i64)
    }

    /// `L_i(x) = (x − x_0)/N + x_{i−1}`, `i` from 1.
    pub fn contract(&self, i: usize, x: f64) -> f64 {
        (x - self.interval.lo) / self.n as f64 + self.knot(i - 1)
    }
}

/// A validated model: data, vertical scaling functions `S_i` and offsets
/// `q_i`, with `W_i(x, y) = (L_i(x), S_i(x)·y + q_i(x))`.
#[derive(Debug, Clone)]
pub struct FifModel {
    name: String,
    data: InterpolationData,
    scaling: Vec<ExprFunction>,
    offsets: Vec<ExprFunction>,
    config: ModelConfig,
}

impl FifModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn data(&self) -> &InterpolationData {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.n
    }

    pub fn interval(&self) -> Interval {
        self.data.interval
    }

    /// `S_i` for `i` in `1..=N`.
    pub fn scaling(&self, i: usize) -> &ExprFunction {
        &self.scaling[i - 1]
    }

    /// `q_i` for `i` in `1..=N`.
    pub fn offset(&self, i: usize) -> &ExprFunction {
        &self.offsets[i - 1]
    }

    pub fn scalings(&self) -> &[ExprFunction] {
        &self.scaling
    }

    pub fn offsets(&self) -> &[ExprFunction] {
        &self.offsets
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// `W_i(x, y)`, `i` from 1.
    pub fn apply_map(&self, i: usize, x: f64, y: f64) -> (f64, f64) {
        (
            self.data.contract(i, x),
            self.scaling(i).eval(x) * y + self.offset(i).eval(x),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Left,
    Right,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Endpoint::Left => "left",
            Endpoint::Right => "right",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    #[error("malformed model: {reason}")]
    Malformed { reason: String },
    #[error("knots are not uniform: gap {index} is {gap}, expected {expected}")]
    NonUniformKnots { index: usize, gap: f64, expected: f64 },
    #[error("{field}: {message}")]
    ExpressionError { field: String, message: String },
    #[error("|S_{i}| is not below 1: max |S_{i}| ≤ {max_abs} with value {witness_value} on [{}, {}]", witness.lo, witness.hi)]
    ScalingNotContractive {
        i: usize,
        max_abs: f64,
        witness: Interval,
        witness_value: f64,
    },
    #[error("q_{i} has no finite variation bound")]
    UnboundedVariation { i: usize },
    #[error("W_{i} misses the {end} endpoint: residual {residual:e}")]
    EndpointMismatch {
        i: usize,
        end: Endpoint,
        residual: f64,
    },
}

fn malformed(reason: impl Into<String>) -> Violation {
    Violation::Malformed {
        reason: reason.into(),
    }
}

fn expression_error(field: &str, e: ParseError) -> Violation {
    Violation::ExpressionError {
        field: field.to_string(),
        message: e.to_string(),
    }
}

fn interval_of(section: &ModelSection) -> Result<Interval, Vec<Violation>> {
    let n = section.n;
    let (lo, hi) = match (&section.interval, &section.knots) {
        (Some(_), Some(_)) => return Err(vec![malformed("give either `interval` or `knots`, not both")]),
        (Some([a, b]), None) => (*a, *b),
        (None, Some(k)) => {
            if k.len() != n + 1 {
                return Err(vec![malformed(format!("expected {} knots, found {}", n + 1, k.len()))]);
            }
            let (a, b) = (k[0], k[n]);
            let expected = (b - a) / n as f64;
            let bad: Vec<Violation> = k
                .windows(2)
                .enumerate()
                .filter(|(_, w)| ((w[1] - w[0]) - expected).abs() > 1e-12 * (b - a).abs())
                .map(|(i, w)| Violation::NonUniformKnots {
                    index: i + 1,
                    gap: w[1] - w[0],
                    expected,
                })
                .collect();
            if !bad.is_empty() {
                return Err(bad);
            }
            (a, b)
        }
        (None, None) => (0.0, 1.0),
    };
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(vec![malformed(format!("interval [{lo}, {hi}] is empty or not finite"))]);
    }
    Ok(Interval::new(lo, hi))
}

fn tables_of(config: &ModelConfig) -> Result<TableSet, Vec<Violation>> {
    let mut set = TableSet::new();
    let mut errors = Vec::new();
    for (name, pts) in &config.tables {
        match PiecewiseLinear::new(name.clone(), pts.iter().map(|p| (p[0], p[1])).collect()) {
            Ok(t) => set.insert(t),
            Err(e) => errors.push(expression_error(&format!("tables.{name}"), e)),
        }
    }
    if errors.is_empty() {
        Ok(set)
    } else {
        Err(errors)
    }
}

fn parse_field(
    src: &str,
    field: &str,
    tables: &TableSet,
    dom: Interval,
) -> Result<ExprFunction, Violation> {
    ExprFunction::parse_with_tables(src, tables)
        .map(|f| f.on_domain(dom))
        .map_err(|e| expression_error(field, e))
}

/// Narrow `dom` to a short subinterval on which `|S|` reaches `max_abs`.
fn contraction_witness(s: &ExprFunction, dom: Interval) -> (Interval, f64) {
    let mut j = dom;
    for _ in 0..20 {
        let (a, b) = j.split();
        let (ma, mb) = (s.extrema_abs(a).max.hi, s.extrema_abs(b).max.hi);
        j = if ma >= mb { a } else { b };
    }
    let v = s.eval(j.mid()).abs();
    (j, v)
}

/// Check the model hypotheses and build a [`FifModel`], or report every
/// violation found.
pub fn validate_model(config: &ModelConfig) -> Result<FifModel, Vec<Violation>> {
    let section = &config.model;
    let n = section.n;
    if n < 2 {
        return Err(vec![malformed(format!("n must be at least 2, found {n}"))]);
    }
    let interval = interval_of(section)?;
    if section.y.len() != n + 1 {
        return Err(vec![malformed(format!(
            "expected {} y-values, found {}",
            n + 1,
            section.y.len()
        ))]);
    }
    if section.y.iter().any(|v| !v.is_finite()) {
        return Err(vec![malformed("y-values must be finite")]);
    }
    let tables = tables_of(config)?;
    let data = InterpolationData {
        n,
        interval,
        y: section.y.clone(),
    };

    let mut errors = Vec::new();
    let expected: Vec<String> = (1..=n).map(|i| format!("s{i}")).collect();
    for key in config.scaling.keys() {
        if !expected.contains(key) {
            errors.push(malformed(format!("unexpected key scaling.{key}")));
        }
    }
    let mut scaling = Vec::with_capacity(n);
    for key in &expected {
        match config.scaling.get(key) {
            None => errors.push(malformed(format!("missing scaling.{key}"))),
            Some(src) => match parse_field(src, &format!("scaling.{key}"), &tables, interval) {
                Ok(f) => scaling.push(f),
                Err(e) => errors.push(e),
            },
        }
    }

    let mut offsets = Vec::with_capacity(n);
    if let Some(phi) = config.offsets.get("weierstrass") {
        if config.offsets.len() > 1 {
            errors.push(malformed("`offsets.weierstrass` excludes q1…qN"));
        }
        match parse_field(phi, "offsets.weierstrass", &tables, interval) {
            Ok(phi) => {
                for i in 1..=n {
                    // q_i = φ(L_i(x)), written so that on [0, 1] it is (x + i − 1)/N
                    let (x0, len) = (interval.lo, interval.width());
                    let inner = crate::funcs::Expr::parse(&format!(
                        "({x0}) + ((x - ({x0}))/({len}) + {})*({len})/{n}",
                        i - 1
                    ))
                    .expect("generated expression parses");
                    offsets.push(ExprFunction::new(phi.expr().substitute(&inner), interval));
                }
            }
            Err(e) => errors.push(e),
        }
    } else {
        let expected: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
        for key in config.offsets.keys() {
            if !expected.contains(key) {
                errors.push(malformed(format!("unexpected key offsets.{key}")));
            }
        }
        for key in &expected {
            match config.offsets.get(key) {
                None => errors.push(malformed(format!("missing offsets.{key}"))),
                Some(src) => match parse_field(src, &format!("offsets.{key}"), &tables, interval) {
                    Ok(f) => offsets.push(f),
                    Err(e) => errors.push(e),
                },
            }
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    for (i, s) in scaling.iter().enumerate() {
        let bound = s.extrema_abs(interval).max;
        if !(bound.hi < 1.0) {
            let (witness, witness_value) = contraction_witness(s, interval);
            errors.push(Violation::ScalingNotContractive {
                i: i + 1,
                max_abs: bound.hi,
                witness,
                witness_value,
            });
        }
    }
    for (i, q) in offsets.iter().enumerate() {
        if !q.variation_bound(interval).is_finite() {
            errors.push(Violation::UnboundedVariation { i: i + 1 });
        }
    }
    let y = &data.y;
    for i in 1..=n {
        let (s, q) = (&scaling[i - 1], &offsets[i - 1]);
        let left = s.eval(interval.lo) * y[0] + q.eval(interval.lo) - y[i - 1];
        let right = s.eval(interval.hi) * y[n] + q.eval(interval.hi) - y[i];
        for (end, residual) in [(Endpoint::Left, left), (Endpoint::Right, right)] {
            if !(residual.abs() <= ENDPOINT_TOL) {
                errors.push(Violation::EndpointMismatch { i, end, residual });
            }
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(FifModel {
        name: config.name().to_string(),
        data,
        scaling,
        offsets,
        config: config.clone(),
    })
}
