//! Real functions of one variable given by expressions, with certified
//! extrema, Lipschitz bounds, variation and zero counting.

pub mod expr;
pub mod extrema;
pub mod form;
pub mod interval;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use expr::{Expr, ParseError, PiecewiseLinear, TableSet};
pub use extrema::SearchOptions;
pub use form::{PiecewiseForm, ZeroSet};
pub use interval::Interval;

/// Enclosure `[lo, hi]` of a single real quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalBound {
    pub lo: f64,
    pub hi: f64,
    /// `false` when the search ran out of budget before reaching the
    /// requested width.
    pub certified: bool,
}

impl IntervalBound {
    pub fn exact(v: f64) -> Self {
        Self {
            lo: v,
            hi: v,
            certified: true,
        }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Enclosures of `min |g|` and `max |g|` on a subinterval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsExtrema {
    pub min: IntervalBound,
    pub max: IntervalBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationEstimate {
    /// Oscillation sum over `base^level` equal cells.
    pub value: f64,
    pub level: u32,
    /// Successive levels agree to within 1e-9 relative.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "count", rename_all = "snake_case")]
pub enum ZeroCount {
    Exact(usize),
    Infinite,
    /// No closed form; the number of sign changes and exact zeros seen
    /// on a dense sample.
    Unknown(usize),
}

const ZERO_SAMPLES: usize = 4096;
const LIPSCHITZ_CELLS: usize = 32;
const VARIATION_CELLS: usize = 1024;

/// An expression together with the closed interval it is defined on.
#[derive(Debug, Clone)]
pub struct ExprFunction {
    expr: Expr,
    domain: Interval,
    form: Option<PiecewiseForm>,
}

impl PartialEq for ExprFunction {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr && self.domain == other.domain
    }
}

impl fmt::Display for ExprFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

/// Parse an expression on the unit interval.
pub fn parse_expr(source: &str) -> Result<ExprFunction, ParseError> {
    ExprFunction::parse(source)
}

impl ExprFunction {
    pub fn new(expr: Expr, domain: Interval) -> Self {
        let form = PiecewiseForm::from_expr(&expr, domain.lo, domain.hi);
        Self { expr, domain, form }
    }

    pub fn parse(source: &str) -> Result<Self, ParseError> {
        Ok(Self::new(Expr::parse(source)?, Interval::unit()))
    }

    pub fn parse_with_tables(source: &str, tables: &TableSet) -> Result<Self, ParseError> {
        Ok(Self::new(Expr::parse_with_tables(source, tables)?, Interval::unit()))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Expr::Num(c), Interval::unit())
    }

    pub fn on_domain(self, domain: Interval) -> Self {
        Self::new(self.expr, domain)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// The closed form, when the expression has one.
    pub fn form(&self) -> Option<&PiecewiseForm> {
        self.form.as_ref()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }

    /// The constant value, when the function is certainly constant.
    pub fn constant_value(&self) -> Option<f64> {
        if !self.expr.depends_on_x() {
            return Some(self.expr.eval(self.domain.lo));
        }
        self.form.as_ref()?.constant_value()
    }

    /// Signed `(min, max)` enclosures on `j`.
    pub fn extrema(&self, j: Interval) -> (IntervalBound, IntervalBound) {
        self.extrema_with(j, SearchOptions::default())
    }

    pub fn extrema_with(&self, j: Interval, opts: SearchOptions) -> (IntervalBound, IntervalBound) {
        if let Some((mn, mx)) = self.form.as_ref().and_then(|f| f.extrema(j.lo, j.hi)) {
            return (IntervalBound::exact(mn), IntervalBound::exact(mx));
        }
        let mn = extrema::min_of(&self.expr, j, opts);
        let mx = extrema::max_of(&self.expr, j, opts);
        (
            IntervalBound {
                lo: mn.lo,
                hi: mn.hi,
                certified: mn.reached_tolerance,
            },
            IntervalBound {
                lo: mx.lo,
                hi: mx.hi,
                certified: mx.reached_tolerance,
            },
        )
    }

    /// Enclosures of `min_{x∈j} |g(x)|` and `max_{x∈j} |g(x)|`.
    pub fn extrema_abs(&self, j: Interval) -> AbsExtrema {
        self.extrema_abs_with(j, SearchOptions::default())
    }

    pub fn extrema_abs_with(&self, j: Interval, opts: SearchOptions) -> AbsExtrema {
        let (mn, mx) = self.extrema_with(j, opts);
        let certified = mn.certified && mx.certified;
        let max = IntervalBound {
            lo: mn.hi.min(0.0).abs().max(mx.lo.max(0.0)),
            hi: mn.lo.abs().max(mx.hi.abs()),
            certified,
        };
        let min = if mn.lo > 0.0 {
            mn
        } else if mx.hi < 0.0 {
            IntervalBound {
                lo: -mx.hi,
                hi: -mx.lo,
                certified,
            }
        } else if mn.hi <= 0.0 && mx.lo >= 0.0 {
            // g takes both signs, so it vanishes somewhere on j.
            IntervalBound {
                lo: 0.0,
                hi: 0.0,
                certified,
            }
        } else {
            // One of the enclosures straddles zero.
            let hi = if mn.hi > 0.0 { mn.hi } else { -mx.lo };
            IntervalBound {
                lo: 0.0,
                hi: hi.max(0.0),
                certified,
            }
        };
        AbsExtrema { min, max }
    }

    /// A constant `L` with `|g(x) − g(y)| ≤ L|x − y|` on `j`.
    pub fn lipschitz_bound(&self, j: Interval) -> f64 {
        if !self.expr.depends_on_x() {
            return 0.0;
        }
        let step = j.width() / LIPSCHITZ_CELLS as f64;
        let from_slopes = (0..LIPSCHITZ_CELLS)
            .map(|c| {
                let lo = j.lo + c as f64 * step;
                let hi = if c + 1 == LIPSCHITZ_CELLS { j.hi } else { lo + step };
                self.expr.range_with_slope(Interval::new(lo, hi)).1.mag()
            })
            .fold(0.0, f64::max);
        match &self.form {
            Some(f) => from_slopes.min(f.lipschitz(j.lo, j.hi)),
            None => from_slopes,
        }
    }

    /// Oscillation sum over the `base^level` equal cells of `j`, a lower
    /// approximation of the variation that is nondecreasing in `level`.
    pub fn oscillation_sum(&self, j: Interval, base: u32, level: u32) -> f64 {
        let cells = (base as usize).pow(level);
        let w = j.width() / cells as f64;
        (0..cells)
            .map(|c| {
                let lo = j.lo + c as f64 * w;
                let hi = if c + 1 == cells { j.hi } else { j.lo + (c + 1) as f64 * w };
                let (mn, mx) = self.extrema(Interval::new(lo, hi));
                (mx.mid() - mn.mid()).max(0.0)
            })
            .sum()
    }

    pub fn total_variation(&self, j: Interval, base: u32, level: u32) -> VariationEstimate {
        let value = self.oscillation_sum(j, base, level);
        let converged = level > 0 && {
            let prev = self.oscillation_sum(j, base, level - 1);
            (value - prev).abs() <= 1e-9 * value.abs().max(1.0)
        };
        VariationEstimate {
            value,
            level,
            converged,
        }
    }

    /// Certified upper bound on the total variation over `j`.
    pub fn variation_bound(&self, j: Interval) -> f64 {
        if let Some(v) = self.form.as_ref().and_then(|f| f.variation(j.lo, j.hi)) {
            return v * (1.0 + 1e-12);
        }
        let step = j.width() / VARIATION_CELLS as f64;
        (0..VARIATION_CELLS)
            .map(|c| {
                let lo = j.lo + c as f64 * step;
                let hi = if c + 1 == VARIATION_CELLS { j.hi } else { lo + step };
                let d = self.expr.range_with_slope(Interval::new(lo, hi)).1.mag();
                d * (hi - lo)
            })
            .sum::<f64>()
            * (1.0 + 1e-12)
    }

    pub fn count_zeros(&self, j: Interval) -> ZeroCount {
        if let Some(z) = self.form.as_ref().and_then(|f| f.zeros(j.lo, j.hi)) {
            return match z {
                ZeroSet::Everywhere => ZeroCount::Infinite,
                ZeroSet::Points(p) => ZeroCount::Exact(p.len()),
            };
        }
        let mut seen = 0;
        let mut prev = self.eval(j.lo);
        if prev == 0.0 {
            seen += 1;
        }
        for s in 1..=ZERO_SAMPLES {
            let v = self.eval(j.lo + j.width() * s as f64 / ZERO_SAMPLES as f64);
            if v == 0.0 || (prev != 0.0 && v.signum() != prev.signum()) {
                seen += 1;
            }
            prev = v;
        }
        ZeroCount::Unknown(seen)
    }

    /// Whether the function is identically zero on some subinterval of its
    /// domain; `None` when this cannot be decided structurally.
    pub fn vanishes_on_subinterval(&self) -> Option<bool> {
        if let Some(f) = &self.form {
            return Some(f.has_zero_piece());
        }
        // Without abs or tables the expression is real-analytic, so it
        // vanishes on a subinterval only if it vanishes everywhere.
        if !has_kinks(&self.expr) {
            let d = self.domain;
            let nonzero = (0..=64).any(|s| self.eval(d.lo + d.width() * s as f64 / 64.0) != 0.0);
            return nonzero.then_some(false);
        }
        None
    }
}

fn has_kinks(e: &Expr) -> bool {
    match e {
        Expr::Num(_) | Expr::Pi | Expr::X => false,
        Expr::Abs(_) | Expr::Table(..) => true,
        Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) => has_kinks(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            has_kinks(a) || has_kinks(b)
        }
    }
}
