//! Values of the interpolation function on N-adic grids, computed by
//! forward refinement through `f(L_i(x)) = S_i(x)·f(x) + q_i(x)`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::FifModel;

/// Default cap on the number of grid intervals, `N^k ≤ 2^24`.
pub const MAX_GRID_POINTS: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("level {level} needs {points} grid points, above the budget of {budget}")]
    Capacity {
        level: u32,
        points: u128,
        budget: usize,
    },
}

/// `f` at `x_0 + j·|I|/N^k`, `j = 0..=N^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues {
    level: u32,
    n: usize,
    x0: f64,
    len: f64,
    values: Vec<f64>,
    /// Largest disagreement seen between a copied coarse value and the
    /// value the recursion gives at the same point.
    residual: f64,
}

impl GridValues {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of cells, `N^k`.
    pub fn cells(&self) -> usize {
        self.values.len() - 1
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + (j as f64 / self.cells() as f64) * self.len
    }

    /// Maximum over all levels so far of `|S_i(x)f(x) + q_i(x) − f(L_i(x))|`
    /// at points carried over from the coarser grid.
    pub fn recursion_residual(&self) -> f64 {
        self.residual
    }

    /// Values of the coarser grid at `level ≤ self.level()`, taken by stride.
    pub fn restrict(&self, level: u32) -> Vec<f64> {
        assert!(level <= self.level, "cannot restrict to a finer level");
        let stride = self.n.pow(self.level - level);
        self.values.iter().step_by(stride).copied().collect()
    }

    /// Values on the closed level-`level` cell `j` (0-based), including both
    /// end points.
    pub fn cell(&self, level: u32, j: usize) -> &[f64] {
        let stride = self.n.pow(self.level - level);
        &self.values[j * stride..=(j + 1) * stride]
    }

    /// `(x, f(x))` pairs in ascending `x`.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        (0..self.values.len()).map(|j| (self.x(j), self.values[j])).collect()
    }

    /// One refinement step to level `k + 1`.
    pub fn refine(&self, model: &FifModel) -> GridValues {
        let n = self.n;
        let prev_cells = self.cells();
        let cells = prev_cells * n;
        let old = &self.values;
        let prev = |j: usize| self.x(j);
        let mapped = |t: usize| {
            let i = (t / prev_cells).min(n - 1) + 1;
            let j = t - (i - 1) * prev_cells;
            let x = prev(j);
            model.scaling(i).eval(x) * old[j] + model.offset(i).eval(x)
        };
        let values: Vec<f64> = (0..=cells)
            .into_par_iter()
            .map(|t| if t % n == 0 { old[t / n] } else { mapped(t) })
            .collect();
        // Points that were already on the coarse grid, reached again through
        // the map whose image starts at them (and, at the right end, the last map).
        let residual = (0..=prev_cells)
            .into_par_iter()
            .map(|m| {
                let t = m * n;
                let mut r: f64 = 0.0;
                if t < cells {
                    r = r.max((mapped(t) - old[m]).abs());
                }
                if t > 0 && t.is_multiple_of(prev_cells) {
                    // right end of the image of W_{t/prev_cells}
                    let i = t / prev_cells;
                    let x = prev(prev_cells);
                    let v = model.scaling(i).eval(x) * old[prev_cells] + model.offset(i).eval(x);
                    r = r.max((v - old[m]).abs());
                }
                r
            })
            .reduce(|| 0.0, f64::max);
        GridValues {
            level: self.level + 1,
            n,
            x0: self.x0,
            len: self.len,
            values,
            residual: self.residual.max(residual),
        }
    }
}

fn check_capacity(n: usize, level: u32, budget: usize) -> Result<(), EngineError> {
    let points = (n as u128).checked_pow(level).unwrap_or(u128::MAX);
    if points > budget as u128 {
        return Err(EngineError::Capacity {
            level,
            points,
            budget,
        });
    }
    Ok(())
}

/// Grid values at level `k`: `k = 0` gives `(y_0, y_N)`, `k = 1` the knot
/// values, each further level one refinement sweep.
pub fn grid_values(model: &FifModel, k: u32) -> Result<GridValues, EngineError> {
    grid_values_with_budget(model, k, MAX_GRID_POINTS)
}

pub fn grid_values_with_budget(
    model: &FifModel,
    k: u32,
    budget: usize,
) -> Result<GridValues, EngineError> {
    let data = model.data();
    let n = data.n();
    check_capacity(n, k, budget)?;
    let y = data.y();
    let base = |level, values| GridValues {
        level,
        n,
        x0: data.interval().lo,
        len: data.interval().width(),
        values,
        residual: 0.0,
    };
    if k == 0 {
        return Ok(base(0, vec![y[0], y[n]]));
    }
    let mut grid = base(1, y.to_vec());
    while grid.level < k {
        grid = grid.refine(model);
    }
    Ok(grid)
}

/// `(x, f(x))` at the `N^k + 1` level-`k` grid points.
pub fn sample_graph(model: &FifModel, k: u32) -> Result<Vec<(f64, f64)>, EngineError> {
    Ok(grid_values(model, k)?.samples())
}

/// Write samples as two CSV columns `x,f` with 17 significant digits.
pub fn write_samples_csv<W: Write>(out: &mut W, samples: &[(f64, f64)]) -> io::Result<()> {
    writeln!(out, "x,f")?;
    for (x, f) in samples {
        writeln!(out, "{x:.16e},{f:.16e}")?;
    }
    Ok(())
}

/// A-priori bounds used by the oscillation estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngineBounds {
    /// Bound on `max |f|`.
    pub m_f: f64,
    /// `max_i max_I |q_i|`.
    pub q_star: f64,
    /// `max_i max_I |S_i|`.
    pub s_star: f64,
    /// `max_i` of the Lipschitz bounds of `S_i` on `I`.
    pub lambda_s: f64,
    /// `2·M_f·λ_S`.
    pub beta: f64,
}

/// Bounds on `f` and the model functions. `M_f` is the geometric-series
/// bound `q*/(1 − S*)`, raised to `max |y_i|` if that were larger.
pub fn engine_bounds(model: &FifModel) -> EngineBounds {
    let dom = model.interval();
    let max_abs = |fs: &[crate::funcs::ExprFunction]| {
        fs.iter().map(|f| f.extrema_abs(dom).max.hi).fold(0.0, f64::max)
    };
    let q_star = max_abs(model.offsets());
    let s_star = max_abs(model.scalings());
    let y_max = model.data().y().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let m_f = (q_star / (1.0 - s_star)).max(y_max);
    let lambda_s = model
        .scalings()
        .iter()
        .map(|s| s.lipschitz_bound(dom))
        .fold(0.0, f64::max);
    EngineBounds {
        m_f,
        q_star,
        s_star,
        lambda_s,
        beta: 2.0 * m_f * lambda_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::ExprFunction;
    use crate::model::{builtin_model, validate_model, weierstrass_series, ModelConfig};

    fn builtin(name: &str, kv: &[(&str, &str)]) -> FifModel {
        let p = kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        validate_model(&builtin_model(name, &p).unwrap().config).unwrap()
    }

    #[test]
    fn knot_level_is_the_data() {
        let m = builtin("example61", &[]);
        assert_eq!(grid_values(&m, 1).unwrap().values(), &[2.0, 0.5, 0.5, 2.0]);
        assert_eq!(grid_values(&m, 0).unwrap().values(), &[2.0, 2.0]);
    }

    #[test]
    fn zero_scaling_collapses_to_offsets() {
        let cfg = ModelConfig::from_toml(
            r#"
            [model]
            n = 2
            y = [0.0, 0.5, 0.0]
            [scaling]
            s1 = "0"
            s2 = "0"
            [offsets]
            q1 = "sin(pi*x/2)/2"
            q2 = "cos(pi*x/2)/2"
            "#,
        )
        .unwrap();
        let m = validate_model(&cfg).unwrap();
        let g = grid_values(&m, 2).unwrap();
        for t in 0..=4 {
            if t % 2 == 1 {
                let i = t / 2 + 1;
                let x = (t - (i - 1) * 2) as f64 / 2.0;
                assert_eq!(g.values()[t], m.offset(i).eval(x));
            }
        }
    }

    #[test]
    fn weierstrass_grid_matches_series() {
        let m = builtin("weierstrass", &[("lambda", "0.5")]);
        let phi = ExprFunction::parse("cos(2*pi*x)").unwrap();
        let g = grid_values(&m, 7).unwrap();
        assert!((g.values()[0] - 2.0).abs() < 1e-12);
        for j in (0..=g.cells()).step_by(37) {
            let s = weierstrass_series(&phi, 0.5, 3, j as u64, 7);
            assert!((g.values()[j] - s).abs() < 1e-9, "j = {j}");
        }
    }

    #[test]
    fn nesting_is_exact_and_residual_small() {
        let m = builtin("example61", &[]);
        let g6 = grid_values(&m, 6).unwrap();
        let g8 = grid_values(&m, 8).unwrap();
        assert_eq!(g8.restrict(6), g6.values());
        assert!(g8.recursion_residual() < 1e-12);
        assert_eq!(g8.cell(6, 2).len(), 10);
        assert_eq!(g8.cell(6, 2)[0], g6.values()[2]);
    }

    #[test]
    fn capacity_is_enforced() {
        let m = builtin("example61", &[]);
        assert!(matches!(
            grid_values(&m, 16),
            Err(EngineError::Capacity { level: 16, .. })
        ));
        assert!(grid_values_with_budget(&m, 4, 80).is_err());
    }

    #[test]
    fn example_bounds() {
        let m = builtin("example61", &[]);
        let b = engine_bounds(&m);
        assert_eq!((b.q_star, b.s_star, b.m_f), (1.0, 0.75, 4.0));
        assert!((b.lambda_s - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((b.beta - 4.0 * std::f64::consts::PI).abs() < 1e-11);
        let samples = sample_graph(&m, 6).unwrap();
        assert_eq!(samples.len(), 730);
        assert!(samples.iter().all(|&(_, f)| f.abs() <= b.m_f + 1e-9));
        assert!(samples.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn zero_scaling_bounds_and_line() {
        let m = builtin("affine", &[("d", "0, 0")]);
        let b = engine_bounds(&m);
        assert_eq!(b.lambda_s, 0.0);
        assert_eq!(b.beta, 0.0);
        assert_eq!(b.m_f, 1.0);
        for (x, f) in sample_graph(&m, 5).unwrap() {
            assert!((x - f).abs() < 1e-15);
        }
        let c = builtin("affine", &[("d", "0.3, -0.2"), ("y", "1, 1, 1")]);
        assert!(sample_graph(&c, 6).unwrap().iter().all(|&(_, f)| (f - 1.0).abs() < 1e-15));
    }

    #[test]
    fn csv_has_seventeen_digits() {
        let mut out = Vec::new();
        write_samples_csv(&mut out, &[(1.0 / 3.0, -0.5)]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "x,f\n3.3333333333333331e-1,-5.0000000000000000e-1\n");
    }
}
