//! Oscillation sums of the interpolation function over N-adic cells, the
//! cell-wise oscillation vectors, and the divergence-of-variation check.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{engine_bounds, grid_values, EngineBounds, EngineError, GridValues};
use crate::funcs::{Expr, ExprFunction};
use crate::matrices::{self, MatrixError, ScalingMatrix};
use crate::model::FifModel;

/// Extra grid levels used below each cell by default.
pub const DEFAULT_REFINEMENT: u32 = 4;

/// Consecutive levels over which `O_k` must agree before variation is
/// called bounded.
const STABLE_LEVELS: usize = 3;
const STABLE_TOL: f64 = 1e-9;

/// Upper bound on `O(f, J)` for every level-`level` cell `J`, from
/// `O(f, L_i(D)) ≤ S*·O(f, D) + O(q_i, D) + β|D|` started at `2·M_f`.
pub fn cell_oscillation_bound(model: &FifModel, bounds: &EngineBounds, level: u32) -> f64 {
    let dom = model.interval();
    let lambda_q = model
        .offsets()
        .iter()
        .map(|q| q.lipschitz_bound(dom))
        .fold(0.0, f64::max);
    let n = model.n() as f64;
    let cap = 2.0 * bounds.m_f;
    let mut w = cap;
    let mut width = dom.width();
    for _ in 0..level {
        let q_osc = (lambda_q * width).min(2.0 * bounds.q_star);
        w = (bounds.s_star * w + q_osc + bounds.beta * width).min(cap);
        width /= n;
    }
    w
}

/// Per-cell `max − min` of the grid over the level-`k` cells, read from a
/// grid at level `grid.level() ≥ k` through points of level `level`.
fn cell_oscillations(grid: &GridValues, k: u32, level: u32) -> Vec<f64> {
    debug_assert!(k <= level && level <= grid.level());
    let n = grid.n();
    let stride = n.pow(grid.level() - level);
    let span = n.pow(level - k) * stride;
    let values = grid.values();
    (0..n.pow(k))
        .into_par_iter()
        .map(|j| {
            let (mn, mx) = values[j * span..=(j + 1) * span]
                .iter()
                .step_by(stride)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            mx - mn
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationSum {
    pub k: u32,
    pub refinement: u32,
    /// Grid value of `O_k`, a lower bound of the true value.
    pub value: f64,
    /// Certified upper bound of the true value.
    pub upper: f64,
}

impl OscillationSum {
    pub fn gap(&self) -> f64 {
        self.upper - self.value
    }
}

fn sum_from_cells(cells: &[f64], k: u32, refinement: u32, per_cell: f64, cap: f64) -> OscillationSum {
    OscillationSum {
        k,
        refinement,
        value: cells.iter().sum(),
        upper: cells.iter().map(|c| (c + 2.0 * per_cell).min(cap)).sum(),
    }
}

/// `O_k(f, I)` approximated on the grid of level `k + r`.
pub fn oscillation_sum(model: &FifModel, k: u32, refinement: u32) -> Result<OscillationSum, EngineError> {
    let grid = grid_values(model, k + refinement)?;
    let bounds = engine_bounds(model);
    let w = cell_oscillation_bound(model, &bounds, k + refinement);
    let cells = cell_oscillations(&grid, k, k + refinement);
    Ok(sum_from_cells(&cells, k, refinement, w, 2.0 * bounds.m_f))
}

/// `O_k` for `k = 1..=k_max`, each on its own grid level `k + r`, all read
/// from one grid.
pub fn oscillation_table(
    model: &FifModel,
    k_max: u32,
    refinement: u32,
) -> Result<Vec<OscillationSum>, EngineError> {
    let grid = grid_values(model, k_max + refinement)?;
    let bounds = engine_bounds(model);
    Ok((1..=k_max)
        .map(|k| {
            let w = cell_oscillation_bound(model, &bounds, k + refinement);
            let cells = cell_oscillations(&grid, k, k + refinement);
            sum_from_cells(&cells, k, refinement, w, 2.0 * bounds.m_f)
        })
        .collect())
}

/// Entry `j` is `O_p(f, I_j^k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationVector {
    pub k: u32,
    pub p: u32,
    pub refinement: u32,
    pub entries: Vec<f64>,
    /// Certified upper bounds of the entries.
    pub upper: Vec<f64>,
}

impl OscillationVector {
    pub fn norm1(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Largest `upper − entry`.
    pub fn max_gap(&self) -> f64 {
        self.upper
            .iter()
            .zip(&self.entries)
            .map(|(u, e)| u - e)
            .fold(0.0, f64::max)
    }
}

pub fn oscillation_vector(
    model: &FifModel,
    k: u32,
    p: u32,
    refinement: u32,
) -> Result<OscillationVector, EngineError> {
    let level = k + p + refinement;
    let grid = grid_values(model, level)?;
    let bounds = engine_bounds(model);
    let w = cell_oscillation_bound(model, &bounds, level);
    let cap = 2.0 * bounds.m_f;
    let fine = cell_oscillations(&grid, k + p, level);
    let block = model.n().pow(p);
    let entries = fine.chunks(block).map(|c| c.iter().sum()).collect();
    let upper = fine
        .chunks(block)
        .map(|c| c.iter().map(|v| (v + 2.0 * w).min(cap)).sum())
        .collect();
    Ok(OscillationVector {
        k,
        p,
        refinement,
        entries,
        upper,
    })
}

/// `E = Σ_i Var(q_i, I) + β·N·|I|`, the additive constant in
/// `γ_*·O_k − E ≤ O_{k+1} ≤ γ*·O_k + E`.
pub fn scalar_recursion_constant(model: &FifModel) -> f64 {
    let dom = model.interval();
    let var: f64 = model.offsets().iter().map(|q| q.variation_bound(dom)).sum();
    var + engine_bounds(model).beta * model.n() as f64 * dom.width()
}

/// `u_{(i−1)N^{k−1}+ℓ} = β·N^{1−k}·|I| + Var(q_i, I_ℓ^{k−1})`.
pub fn u_vector(model: &FifModel, k: u32) -> Vec<f64> {
    assert!(k >= 1);
    let beta = engine_bounds(model).beta;
    let n = model.n();
    let parents = n.pow(k - 1);
    let width = model.interval().width() / parents as f64;
    (0..n * parents)
        .into_par_iter()
        .map(|r| {
            let i = r / parents + 1;
            let cell = matrices::cell(model, k - 1, r % parents);
            beta * width + model.offset(i).variation_bound(cell)
        })
        .collect()
}

/// `(−u + M̲·v, u + M̄·v)`, the bounds the recursion puts on the vector at
/// depth `p + 1` given the vector `v` at depth `p`.
pub fn vector_recursion_bounds(
    upper: &ScalingMatrix,
    lower: &ScalingMatrix,
    u: &[f64],
    v: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let apply = |m: &ScalingMatrix, row: usize| -> f64 {
        m.row_support(row).map(|c| m.entry(row, c) * v[c - 1]).sum()
    };
    (1..=u.len())
        .map(|row| (apply(lower, row) - u[row - 1], apply(upper, row) + u[row - 1]))
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Divergent,
    Bounded,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Threshold `(2·M_f·λ_S·N|I| + Σ Var(q_i))/(γ_* − 1)`.
    General,
    /// Threshold `(λ'·M_f·|I| + Var(Σ q_i))/(γ_* − 1)`, for nonnegative `S_i`.
    Nonnegative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceCertificate {
    pub verdict: Verdict,
    /// Smallest level whose oscillation sum exceeds the threshold.
    pub k0: Option<u32>,
    /// The threshold that was crossed, or the smallest applicable one.
    pub threshold: Option<f64>,
    pub criterion: Option<Criterion>,
    pub threshold_general: Option<f64>,
    pub threshold_nonnegative: Option<f64>,
    pub gamma_lower_star: f64,
    pub gamma_star: f64,
    pub refinement: u32,
    pub table: Vec<OscillationSum>,
    pub reason: String,
}

impl DivergenceCertificate {
    /// Grid value of `O_{k0}` when divergent.
    pub fn crossing_value(&self) -> Option<f64> {
        self.k0.map(|k| self.table[k as usize - 1].value)
    }

    /// CSV with columns `k,o_k,o_k_upper,threshold_general,threshold_nonnegative,verdict`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |t| format!("{t:.16e}"));
        let verdict = serde_json::to_value(self.verdict).map_err(io::Error::other)?;
        writeln!(out, "k,o_k,o_k_upper,threshold_general,threshold_nonnegative,verdict")?;
        for row in &self.table {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{},{},{}",
                row.k,
                row.value,
                row.upper,
                opt(self.threshold_general),
                opt(self.threshold_nonnegative),
                verdict.as_str().unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OscillationError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Divergence check with grid values at level `k` for each `O_k`.
pub fn divergence_check(model: &FifModel, k_max: u32) -> Result<DivergenceCertificate, OscillationError> {
    divergence_check_with(model, k_max, 0)
}

pub fn divergence_check_with(
    model: &FifModel,
    k_max: u32,
    refinement: u32,
) -> Result<DivergenceCertificate, OscillationError> {
    assert!(k_max >= 1);
    let dom = model.interval();
    let gamma = matrices::sum_function(model);
    let (g_lo, g_hi) = gamma.function.extrema(dom);
    let (gamma_lower_star, gamma_star) = (g_lo.lo, g_hi.hi);
    let table = oscillation_table(model, k_max, refinement)?;
    let mut cert = DivergenceCertificate {
        verdict: Verdict::Undetermined,
        k0: None,
        threshold: None,
        criterion: None,
        threshold_general: None,
        threshold_nonnegative: None,
        gamma_lower_star,
        gamma_star,
        refinement,
        table,
        reason: String::new(),
    };
    if gamma_lower_star > 1.0 {
        let b = engine_bounds(model);
        let n = model.n() as f64;
        let excess = gamma_lower_star - 1.0;
        let var_q: f64 = model.offsets().iter().map(|q| q.variation_bound(dom)).sum();
        let general = (b.beta * n * dom.width() + var_q) / excess;
        cert.threshold_general = Some(general);
        let mut options = vec![(general, Criterion::General)];
        if gamma.nonnegative_scalings {
            let q_sum = model
                .offsets()
                .iter()
                .map(|q| q.expr().clone())
                .reduce(|a, b| Expr::Add(Box::new(a), Box::new(b)))
                .expect("at least two maps");
            let var_sum = ExprFunction::new(q_sum, dom).variation_bound(dom);
            let lambda_gamma = gamma.function.lipschitz_bound(dom);
            let nonneg = (lambda_gamma * b.m_f * dom.width() + var_sum) / excess;
            cert.threshold_nonnegative = Some(nonneg);
            options.push((nonneg, Criterion::Nonnegative));
        }
        let (threshold, criterion) = options
            .into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("general threshold always present");
        cert.threshold = Some(threshold);
        cert.criterion = Some(criterion);
        if let Some(row) = cert.table.iter().find(|r| r.value > threshold) {
            cert.verdict = Verdict::Divergent;
            cert.k0 = Some(row.k);
            cert.reason = format!("O_{} = {} exceeds {threshold}", row.k, row.value);
        } else {
            cert.reason = format!("no O_k with k ≤ {k_max} exceeds {threshold}");
        }
        return Ok(cert);
    }
    let values: Vec<f64> = cert.table.iter().map(|r| r.value).collect();
    let stable = values.len() >= STABLE_LEVELS
        && values[values.len() - STABLE_LEVELS..]
            .windows(2)
            .all(|w| (w[1] - w[0]).abs() <= STABLE_TOL * w[1].abs().max(1.0));
    if stable && gamma_star < 1.0 {
        cert.verdict = Verdict::Bounded;
        cert.reason = format!("O_k settled over the last {STABLE_LEVELS} levels and max γ = {gamma_star} < 1");
    } else {
        cert.reason = format!("min γ = {gamma_lower_star} ≤ 1, the threshold criterion does not apply");
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::build_matrices;
    use crate::model::{builtin_model, validate_model};

    fn builtin(name: &str, kv: &[(&str, &str)]) -> FifModel {
        let p = kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        validate_model(&builtin_model(name, &p).unwrap().config).unwrap()
    }

    #[test]
    fn line_telescopes() {
        let m = builtin("affine", &[("n", "3"), ("d", "0, 0, 0"), ("y", "0, 0.3333333333333333, 0.6666666666666666, 1")]);
        for k in 1..4 {
            let o = oscillation_sum(&m, k, 2).unwrap();
            assert!((o.value - 1.0).abs() < 1e-12);
        }
        let v = oscillation_vector(&m, 1, 1, 0).unwrap();
        for e in &v.entries {
            assert!((e - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_model_is_bounded() {
        let m = builtin("affine", &[("d", "0.3, -0.2"), ("y", "1, 1, 1")]);
        assert_eq!(oscillation_sum(&m, 3, 2).unwrap().value, 0.0);
        let c = divergence_check(&m, 6).unwrap();
        assert_eq!(c.verdict, Verdict::Bounded);
    }

    #[test]
    fn example_crosses_at_six() {
        let m = builtin("example61", &[]);
        let c = divergence_check(&m, 8).unwrap();
        assert_eq!(c.verdict, Verdict::Divergent);
        assert_eq!(c.k0, Some(6));
        assert_eq!(c.criterion, Some(Criterion::Nonnegative));
        assert!((c.threshold.unwrap() - 8.0 * std::f64::consts::PI).abs() < 1e-9);
        assert!(c.threshold_general.unwrap() > c.threshold.unwrap());
        let o6 = oscillation_sum(&m, 6, 4).unwrap();
        assert!(o6.value > 8.0 * std::f64::consts::PI);
        assert!(o6.upper >= o6.value);
        assert!(c.table.windows(2).all(|w| w[1].value >= w[0].value));
    }

    #[test]
    fn weierstrass_threshold_is_zero() {
        let m = builtin("weierstrass", &[("lambda", "0.6")]);
        let c = divergence_check(&m, 3).unwrap();
        assert_eq!(c.verdict, Verdict::Divergent);
        assert_eq!(c.k0, Some(1));
        assert!(c.threshold.unwrap().abs() < 1e-12);
    }

    #[test]
    fn vector_norm_is_the_finer_sum() {
        let m = builtin("example61", &[]);
        for (k, p) in [(1, 1), (2, 3), (3, 2)] {
            let v = oscillation_vector(&m, k, p, 2).unwrap();
            let o = oscillation_sum(&m, k + p, 2).unwrap();
            assert!((v.norm1() - o.value).abs() <= 1e-12 * o.value);
        }
    }

    #[test]
    fn vector_recursion_holds() {
        let m = builtin("example61", &[]);
        for k in 1..=2 {
            let (up, lo) = build_matrices(&m, k).unwrap();
            let u = u_vector(&m, k);
            for p in 1..=2 {
                let v = oscillation_vector(&m, k, p, 3).unwrap();
                let next = oscillation_vector(&m, k, p + 1, 2).unwrap();
                let (lb, ub) = vector_recursion_bounds(&up, &lo, &u, &v.entries);
                for r in 0..u.len() {
                    assert!(next.entries[r] <= ub[r] + 1e-12);
                    assert!(lb[r] <= next.upper[r]);
                }
            }
        }
    }

    #[test]
    fn csv_layout() {
        let m = builtin("example61", &[]);
        let c = divergence_check(&m, 2).unwrap();
        let mut out = Vec::new();
        c.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().ends_with(",undetermined"));
    }
}
