//! Vertical scaling matrices built from cell extrema of `|S_i|`, their
//! spectral radii, and the sum function `γ = Σ|S_i|`.

pub mod spectral;

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use spectral::{
    pattern_power_is_positive, primitivity_check, spectral_radius, spectral_radius_with_budget,
    strongly_connected_components, Primitivity, SparseMatrix, SpectralEstimate, POWER_BUDGET,
};

use crate::engine::MAX_GRID_POINTS;
use crate::funcs::{Expr, ExprFunction, Interval, IntervalBound};
use crate::model::FifModel;

/// Default relative tolerance of the eigensolver.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum MatrixError {
    #[error("level {level} needs matrices of dimension {dimension}, above the budget of {budget}")]
    Capacity {
        level: u32,
        dimension: u128,
        budget: usize,
    },
    #[error(
        "spectral radius of the {kind} matrix moves the wrong way from level {k} to {}: {prev} then {next}",
        k + 1
    )]
    Monotonicity {
        k: u32,
        kind: MatrixKind,
        prev: f64,
        next: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// Entries are cell maxima of `|S_i|`.
    Upper,
    /// Entries are cell minima of `|S_i|`.
    Lower,
}

impl std::fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatrixKind::Upper => "upper",
            MatrixKind::Lower => "lower",
        })
    }
}

/// `N^k × N^k` matrix whose row `(i−1)N^{k−1}+ℓ` holds the extrema of
/// `|S_i|` on the level-`k` cells `(ℓ−1)N+1 … ℓN` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingMatrix {
    k: u32,
    kind: MatrixKind,
    n: usize,
    /// `basic[(i−1)·N^k + (j−1)]`: extremum of `|S_i|` on cell `j`.
    basic: Vec<f64>,
    widths: Vec<f64>,
    uncertified: usize,
}

#[derive(Debug, Clone, Serialize)]
struct MatrixHeader {
    k: u32,
    kind: MatrixKind,
    n: usize,
    dimension: usize,
    max_enclosure_width: f64,
    uncertified_entries: usize,
}

impl ScalingMatrix {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n.pow(self.k)
    }

    /// Extremum of `|S_i|` on level-`k` cell `j` (both 1-based).
    pub fn basic(&self, i: usize, j: usize) -> f64 {
        self.basic[(i - 1) * self.dim() + (j - 1)]
    }

    /// Enclosure width of the basic entry `(i, j)`.
    pub fn width(&self, i: usize, j: usize) -> f64 {
        self.widths[(i - 1) * self.dim() + (j - 1)]
    }

    pub fn max_width(&self) -> f64 {
        self.widths.iter().copied().fold(0.0, f64::max)
    }

    /// Entries whose extremum search ran out of budget.
    pub fn uncertified(&self) -> usize {
        self.uncertified
    }

    /// 1-based columns of the structural entries in 1-based `row`.
    pub fn row_support(&self, row: usize) -> std::ops::RangeInclusive<usize> {
        let ell = (row - 1) % self.n.pow(self.k - 1) + 1;
        (ell - 1) * self.n + 1..=ell * self.n
    }

    /// Matrix entry at 1-based `(row, col)`; zero off the pattern.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let i = (row - 1) / self.n.pow(self.k - 1) + 1;
        if self.row_support(row).contains(&col) {
            self.basic(i, col)
        } else {
            0.0
        }
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let dim = self.dim();
        SparseMatrix::from_rows(
            (1..=dim)
                .map(|row| self.row_support(row).map(|c| (c - 1, self.entry(row, c))).collect())
                .collect(),
        )
    }

    /// Column sums `Σ_i` of the basic entries on each cell.
    pub fn column_sums(&self) -> Vec<f64> {
        let dim = self.dim();
        (0..dim)
            .map(|j| (0..self.n).map(|i| self.basic[i * dim + j]).sum())
            .collect()
    }

    pub fn spectral_radius(&self, tol: f64) -> SpectralEstimate {
        spectral_radius(&self.to_sparse(), tol)
    }

    pub fn primitivity(&self) -> Primitivity {
        primitivity_check(&self.to_sparse())
    }

    /// Coordinate listing `row col value` (1-based) after a one-line JSON
    /// header.
    pub fn write_coordinate<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let header = MatrixHeader {
            k: self.k,
            kind: self.kind,
            n: self.n,
            dimension: self.dim(),
            max_enclosure_width: self.max_width(),
            uncertified_entries: self.uncertified,
        };
        writeln!(out, "# {}", serde_json::to_string(&header).map_err(io::Error::other)?)?;
        for row in 1..=self.dim() {
            for col in self.row_support(row) {
                writeln!(out, "{row} {col} {:.16e}", self.entry(row, col))?;
            }
        }
        Ok(())
    }
}

fn check_capacity(n: usize, k: u32) -> Result<usize, MatrixError> {
    let dimension = (n as u128).checked_pow(k).unwrap_or(u128::MAX);
    if dimension > MAX_GRID_POINTS as u128 {
        return Err(MatrixError::Capacity {
            level: k,
            dimension,
            budget: MAX_GRID_POINTS,
        });
    }
    Ok(dimension as usize)
}

/// The level-`k` cell `j` (0-based) of the model interval.
pub fn cell(model: &FifModel, k: u32, j: usize) -> Interval {
    let dom = model.interval();
    let cells = model.n().pow(k) as f64;
    let lo = dom.lo + dom.width() * (j as f64 / cells);
    let hi = if j + 1 == cells as usize {
        dom.hi
    } else {
        dom.lo + dom.width() * ((j + 1) as f64 / cells)
    };
    Interval::new(lo, hi)
}

/// Both level-`k` matrices, `(upper, lower)`, from one extremum search per
/// basic entry.
pub fn build_matrices(model: &FifModel, k: u32) -> Result<(ScalingMatrix, ScalingMatrix), MatrixError> {
    assert!(k >= 1, "matrices start at level 1");
    let n = model.n();
    let dim = check_capacity(n, k)?;
    let extrema: Vec<(IntervalBound, IntervalBound)> = (0..n * dim)
        .into_par_iter()
        .map(|e| {
            let a = model.scaling(e / dim + 1).extrema_abs(cell(model, k, e % dim));
            (a.max, a.min)
        })
        .collect();
    let make = |kind, pick: fn(&(IntervalBound, IntervalBound)) -> IntervalBound| {
        let bounds: Vec<IntervalBound> = extrema.iter().map(pick).collect();
        ScalingMatrix {
            k,
            kind,
            n,
            basic: bounds.iter().map(IntervalBound::mid).collect(),
            widths: bounds.iter().map(IntervalBound::width).collect(),
            uncertified: bounds.iter().filter(|b| !b.certified).count(),
        }
    };
    Ok((make(MatrixKind::Upper, |p| p.0), make(MatrixKind::Lower, |p| p.1)))
}

pub fn build_matrix(model: &FifModel, k: u32, kind: MatrixKind) -> Result<ScalingMatrix, MatrixError> {
    let (upper, lower) = build_matrices(model, k)?;
    Ok(match kind {
        MatrixKind::Upper => upper,
        MatrixKind::Lower => lower,
    })
}

/// `γ = Σ|S_i|`, written as `Σ S_i` when every `S_i` is certified
/// nonnegative so that cancellations between terms are visible to the
/// closed-form analysis.
#[derive(Debug, Clone)]
pub struct SumFunction {
    pub function: ExprFunction,
    pub nonnegative_scalings: bool,
}

pub fn sum_function(model: &FifModel) -> SumFunction {
    let dom = model.interval();
    let nonnegative = model.scalings().iter().all(|s| s.extrema(dom).0.lo >= 0.0);
    let expr = model
        .scalings()
        .iter()
        .map(|s| {
            let e = s.expr().clone();
            if nonnegative { e } else { Expr::Abs(Box::new(e)) }
        })
        .reduce(|a, b| Expr::Add(Box::new(a), Box::new(b)))
        .expect("a model has at least two maps");
    SumFunction {
        function: ExprFunction::new(expr, dom),
        nonnegative_scalings: nonnegative,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaLevel {
    pub k: u32,
    /// `max_j Σ_i` of the cell maxima of `|S_i|`.
    pub upper: f64,
    /// `min_j Σ_i` of the cell minima of `|S_i|`.
    pub lower: f64,
}

impl GammaLevel {
    fn from_matrices(upper: &ScalingMatrix, lower: &ScalingMatrix) -> Self {
        Self {
            k: upper.k,
            upper: upper.column_sums().into_iter().fold(f64::NEG_INFINITY, f64::max),
            lower: lower.column_sums().into_iter().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Widths below which `γ` counts as a certified constant.
pub const CONSTANT_GAMMA_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct SumFunctionSummary {
    /// `max γ` on the interval.
    pub gamma_star: IntervalBound,
    /// `min γ` on the interval.
    pub gamma_lower_star: IntervalBound,
    pub levels: Vec<GammaLevel>,
    /// Lipschitz bound of `γ`.
    pub lipschitz_gamma: f64,
    pub nonnegative_scalings: bool,
    /// `γ` is constant up to `CONSTANT_GAMMA_WIDTH`.
    pub constant: bool,
}

pub fn gamma_summary(model: &FifModel, k_max: u32) -> Result<SumFunctionSummary, MatrixError> {
    assert!(k_max >= 1, "k_max must be at least 1");
    let gamma = sum_function(model);
    let dom = model.interval();
    let (mn, mx) = gamma.function.extrema(dom);
    let levels = (1..=k_max)
        .map(|k| {
            let (u, l) = build_matrices(model, k)?;
            Ok(GammaLevel::from_matrices(&u, &l))
        })
        .collect::<Result<Vec<_>, MatrixError>>()?;
    let constant = mn.certified && mx.certified && mx.hi - mn.lo < CONSTANT_GAMMA_WIDTH;
    Ok(SumFunctionSummary {
        gamma_star: mx,
        gamma_lower_star: mn,
        levels,
        lipschitz_gamma: gamma.function.lipschitz_bound(dom),
        nonnegative_scalings: gamma.nonnegative_scalings,
        constant,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RhoLevel {
    pub k: u32,
    pub upper: SpectralEstimate,
    pub lower: SpectralEstimate,
    pub gamma: GammaLevel,
    /// Largest enclosure width among the basic entries of both matrices.
    pub entry_width: f64,
    pub lower_pattern: Primitivity,
}

/// Aitken Δ² limits of the last three radii of each sequence. Not a bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    pub upper_limit: f64,
    pub lower_limit: f64,
    pub heuristic: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub tol: f64,
    pub levels: Vec<RhoLevel>,
    /// `[ρ(lower), ρ(upper)]` at the deepest level, outward to the
    /// eigensolver brackets.
    pub bracket: [f64; 2],
    pub rho_star_upper: f64,
    pub rho_star_lower: f64,
    /// Common limit, given once the bracket is narrower than `10·tol`.
    pub rho_s: Option<f64>,
    pub extrapolation: Option<Extrapolation>,
    pub violations: Vec<MatrixError>,
}

impl SpectralSummary {
    pub fn deepest(&self) -> &RhoLevel {
        self.levels.last().expect("at least one level")
    }

    /// Fails on the first monotonicity violation.
    pub fn ensure_monotone(&self) -> Result<(), MatrixError> {
        match self.violations.first() {
            Some(v) => Err(v.clone()),
            None => Ok(()),
        }
    }

    pub fn write_radii_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "k,rho_upper,rho_lower")?;
        for l in &self.levels {
            writeln!(out, "{},{:.16e},{:.16e}", l.k, l.upper.value, l.lower.value)?;
        }
        Ok(())
    }
}

fn aitken(a: f64, b: f64, c: f64) -> Option<f64> {
    let denom = c - 2.0 * b + a;
    if denom.abs() <= f64::EPSILON * c.abs().max(1.0) {
        return None;
    }
    let lim = c - (c - b) * (c - b) / denom;
    lim.is_finite().then_some(lim)
}

pub fn rho_sequence(model: &FifModel, k_max: u32, tol: f64) -> Result<SpectralSummary, MatrixError> {
    assert!(k_max >= 1, "k_max must be at least 1");
    let n = model.n() as f64;
    let mut levels: Vec<RhoLevel> = Vec::new();
    let mut violations = Vec::new();
    for k in 1..=k_max {
        let (up, lo) = build_matrices(model, k)?;
        let lo_sparse = lo.to_sparse();
        let level = RhoLevel {
            k,
            upper: up.spectral_radius(tol),
            lower: spectral_radius(&lo_sparse, tol),
            gamma: GammaLevel::from_matrices(&up, &lo),
            entry_width: up.max_width().max(lo.max_width()),
            lower_pattern: primitivity_check(&lo_sparse),
        };
        if let Some(prev) = levels.last() {
            // Perturbing entries by w moves the radius by at most N·w.
            let slack = n * (prev.entry_width + level.entry_width) + 1e-12 * prev.upper.upper;
            if level.upper.lower > prev.upper.upper + slack {
                violations.push(MatrixError::Monotonicity {
                    k: prev.k,
                    kind: MatrixKind::Upper,
                    prev: prev.upper.value,
                    next: level.upper.value,
                });
            }
            if level.lower.upper < prev.lower.lower - slack {
                violations.push(MatrixError::Monotonicity {
                    k: prev.k,
                    kind: MatrixKind::Lower,
                    prev: prev.lower.value,
                    next: level.lower.value,
                });
            }
        }
        levels.push(level);
    }
    let last = levels.last().expect("k_max ≥ 1");
    let bracket = [last.lower.lower, last.upper.upper];
    let rho_s = (last.upper.value - last.lower.value < 10.0 * tol)
        .then_some(0.5 * (last.upper.value + last.lower.value));
    let extrapolation = (levels.len() >= 3).then(|| {
        let t = &levels[levels.len() - 3..];
        let up = aitken(t[0].upper.value, t[1].upper.value, t[2].upper.value);
        let lo = aitken(t[0].lower.value, t[1].lower.value, t[2].lower.value);
        Extrapolation {
            upper_limit: up.unwrap_or(t[2].upper.value),
            lower_limit: lo.unwrap_or(t[2].lower.value),
            heuristic: true,
        }
    });
    Ok(SpectralSummary {
        tol,
        rho_star_upper: last.upper.value,
        rho_star_lower: last.lower.value,
        bracket,
        rho_s,
        extrapolation,
        violations,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_model, validate_model};

    fn builtin(name: &str, kv: &[(&str, &str)]) -> FifModel {
        let p = kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        validate_model(&builtin_model(name, &p).unwrap().config).unwrap()
    }

    #[test]
    fn first_level_entries() {
        let m = builtin("example61", &[]);
        let (up, lo) = build_matrices(&m, 1).unwrap();
        let r = 3f64.sqrt() / 8.0;
        let up_rows = [[0.75, 0.5 + r, 0.5], [0.75, 0.5 + r, 0.5], [0.5, 0.5 + r, 0.75]];
        let lo_rows = [[0.5, 0.5 - r, 0.25], [0.5, 0.5 - r, 0.25], [0.25, 0.5 - r, 0.5]];
        for row in 1..=3 {
            for col in 1..=3 {
                assert!((up.entry(row, col) - up_rows[row - 1][col - 1]).abs() < 1e-12);
                assert!((lo.entry(row, col) - lo_rows[row - 1][col - 1]).abs() < 1e-12);
            }
        }
        assert_eq!(up.uncertified(), 0);
        assert_eq!(up.primitivity(), Primitivity::Primitive);
    }

    #[test]
    fn pattern_is_banded() {
        let m = builtin("example61", &[]);
        let up = build_matrix(&m, 3, MatrixKind::Upper).unwrap();
        assert_eq!(up.dim(), 27);
        let s = up.to_sparse();
        for row in 1..=27 {
            let ell = (row - 1) % 9 + 1;
            let cols: Vec<usize> = s.row(row - 1).map(|(c, _)| c + 1).collect();
            assert_eq!(cols, ((ell - 1) * 3 + 1..=ell * 3).collect::<Vec<_>>());
        }
        assert!(pattern_power_is_positive(&s, 3));
    }

    #[test]
    fn children_refine_parents() {
        let m = builtin("example61", &[]);
        let (u2, l2) = build_matrices(&m, 2).unwrap();
        let (u3, l3) = build_matrices(&m, 3).unwrap();
        for i in 1..=3 {
            for j in 1..=9 {
                let kids = (3 * (j - 1) + 1)..=(3 * j);
                let mx = kids.clone().map(|c| u3.basic(i, c)).fold(0.0, f64::max);
                let mn = kids.map(|c| l3.basic(i, c)).fold(1.0, f64::min);
                assert!((mx - u2.basic(i, j)).abs() < 1e-12);
                assert!((mn - l2.basic(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_scalings() {
        let m = builtin("affine", &[("n", "3"), ("d", "0.4, -0.4, 0.4"), ("y", "0, 1, 0, 1")]);
        let g = gamma_summary(&m, 2).unwrap();
        assert!(g.constant && !g.nonnegative_scalings);
        assert!((g.gamma_star.hi - 1.2).abs() < 1e-12);
        let s = rho_sequence(&m, 3, 1e-10).unwrap();
        for l in &s.levels {
            assert!((l.upper.value - 1.2).abs() < 1e-9 && (l.lower.value - 1.2).abs() < 1e-9);
        }
        assert!((s.rho_s.unwrap() - 1.2).abs() < 1e-9);
    }

    #[test]
    fn example_gamma() {
        let m = builtin("example61", &[]);
        let g = gamma_summary(&m, 3).unwrap();
        assert!((g.gamma_star.mid() - 1.75).abs() < 1e-12);
        assert!((g.gamma_lower_star.mid() - 1.25).abs() < 1e-12);
        assert!((g.lipschitz_gamma - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        assert!(!g.constant);
        for w in g.levels.windows(2) {
            assert!(w[1].upper <= w[0].upper + 1e-15 && w[1].lower >= w[0].lower - 1e-15);
        }
    }

    #[test]
    fn example_radii_are_monotone_and_sandwiched() {
        let m = builtin("example61", &[]);
        let s = rho_sequence(&m, 5, DEFAULT_TOL).unwrap();
        assert!(s.violations.is_empty());
        for l in &s.levels {
            assert!(l.upper.converged && l.lower.converged);
            assert!(l.gamma.lower <= l.lower.value + 1e-9);
            assert!(l.lower.value <= l.upper.value);
            assert!(l.upper.value <= l.gamma.upper + 1e-9);
        }
        assert!(s.rho_s.is_none());
        assert!(s.extrapolation.unwrap().heuristic);
    }

    #[test]
    fn weierstrass_gamma_is_constant() {
        let m = builtin("weierstrass", &[("lambda", "0.6")]);
        let g = gamma_summary(&m, 1).unwrap();
        assert!(g.constant);
        assert!((g.gamma_star.mid() - 1.8).abs() < 1e-12);
        assert_eq!(g.lipschitz_gamma, 0.0);
    }

    #[test]
    fn coordinate_export() {
        let m = builtin("example61", &[]);
        let up = build_matrix(&m, 1, MatrixKind::Upper).unwrap();
        let mut out = Vec::new();
        up.write_coordinate(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        let header: serde_json::Value =
            serde_json::from_str(lines.next().unwrap().trim_start_matches("# ")).unwrap();
        assert_eq!(header["kind"], "upper");
        assert_eq!(header["dimension"], 3);
        assert_eq!(lines.next().unwrap(), "1 1 7.5000000000000000e-1");
        assert_eq!(lines.count(), 8);
    }
}
