//! Box-dimension bounds of the graph from the sum function, from the
//! scaling-matrix radii, and an empirical box count for comparison.

use serde::Serialize;
use thiserror::Error;

use crate::engine::{grid_values, EngineError, MAX_GRID_POINTS};
use crate::funcs::{Expr, ExprFunction, IntervalBound, ZeroCount};
use crate::matrices::{gamma_summary, rho_sequence, MatrixError, SpectralSummary, SumFunctionSummary};
use crate::model::FifModel;
use crate::oscillation::{divergence_check, DivergenceCertificate, OscillationError, Verdict};

/// Slack allowed when comparing bounds from different estimators.
const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerSource {
    /// Graphs of continuous functions have dimension at least 1.
    Continuity,
    Gamma,
    Rho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperSource {
    Trivial,
    Gamma,
    Rho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactSource {
    /// `γ` constant.
    ConstantGamma,
    /// `γ` and `Σ q_i` constant, `f` not constant.
    ConstantOffsetSum,
    /// Every `|S_i|` positive, so both radius limits agree.
    RhoEqual,
    /// The rigorous lower and upper bounds coincide.
    BoundsMeet,
}

/// The estimate a hypothesis belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimate {
    GammaLower,
    ConstantGamma,
    ConstantOffsetSum,
    RhoUpper,
    RhoLower,
    RhoEqual,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub estimate: Estimate,
    pub condition: String,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound<S> {
    pub value: f64,
    pub source: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exact {
    pub value: f64,
    pub source: ExactSource,
    /// Interval known to contain the dimension.
    pub enclosure: [f64; 2],
}

/// Bounds one estimator family can justify on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct PartialVerdict {
    pub lower: Option<Bound<LowerSource>>,
    pub upper: Option<Bound<UpperSource>>,
    pub exact: Option<Exact>,
    pub hypotheses: Vec<Hypothesis>,
    pub notes: Vec<String>,
}

impl PartialVerdict {
    fn check(&mut self, estimate: Estimate, condition: impl Into<String>, holds: bool) -> bool {
        self.hypotheses.push(Hypothesis {
            estimate,
            condition: condition.into(),
            holds,
        });
        holds
    }

    fn all_hold(&self, estimate: Estimate) -> bool {
        self.hypotheses
            .iter()
            .filter(|h| h.estimate == estimate)
            .all(|h| h.holds)
    }
}

fn log_dim(base: f64, n: usize) -> f64 {
    1.0 + base.ln() / (n as f64).ln()
}

/// Zero structure of each scaling function on the interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingStructure {
    pub zeros: Vec<ZeroCount>,
    /// `Some(true)` if identically zero on some subinterval, `None` if
    /// undecided.
    pub vanishes_on_subinterval: Vec<Option<bool>>,
    pub min_abs: Vec<IntervalBound>,
}

impl ScalingStructure {
    pub fn all_positive(&self) -> bool {
        self.min_abs.iter().all(|m| m.lo > 0.0)
    }

    pub fn finitely_many_zeros(&self) -> bool {
        self.all_positive() || self.zeros.iter().all(|z| matches!(z, ZeroCount::Exact(_)))
    }

    pub fn nowhere_locally_zero(&self) -> bool {
        self.all_positive() || self.vanishes_on_subinterval.iter().all(|v| *v == Some(false))
    }
}

pub fn scaling_structure(model: &FifModel) -> ScalingStructure {
    let dom = model.interval();
    let s = model.scalings();
    ScalingStructure {
        zeros: s.iter().map(|f| f.count_zeros(dom)).collect(),
        vanishes_on_subinterval: s.iter().map(ExprFunction::vanishes_on_subinterval).collect(),
        min_abs: s.iter().map(|f| f.extrema_abs(dom).min).collect(),
    }
}

/// Bounds from the extrema of `γ = Σ|S_i|`.
pub fn dim_bounds_gamma(
    model: &FifModel,
    gamma: &SumFunctionSummary,
    cert: &DivergenceCertificate,
) -> PartialVerdict {
    let n = model.n();
    let mut pv = PartialVerdict {
        upper: Some(Bound {
            value: log_dim(gamma.gamma_star.hi, n).max(1.0),
            source: UpperSource::Gamma,
        }),
        ..Default::default()
    };
    let divergent = cert.verdict == Verdict::Divergent;
    let g_lo = gamma.gamma_lower_star.lo;
    let a = pv.check(Estimate::GammaLower, "min γ > 1", g_lo > 1.0);
    let b = pv.check(Estimate::GammaLower, "variation of f is infinite", divergent);
    if a && b {
        pv.lower = Some(Bound {
            value: log_dim(g_lo, n),
            source: LowerSource::Gamma,
        });
    }

    let constant = pv.check(Estimate::ConstantOffsetSum, "γ is constant", gamma.constant);
    pv.check(Estimate::ConstantGamma, "γ is constant", gamma.constant);
    if !constant {
        return pv;
    }
    let g0 = gamma.gamma_star.mid();
    let dom = model.interval();
    let q_sum = model
        .offsets()
        .iter()
        .map(|q| q.expr().clone())
        .reduce(|a, b| Expr::Add(Box::new(a), Box::new(b)))
        .expect("at least two maps");
    let q_sum = ExprFunction::new(q_sum, dom);
    let (qmn, qmx) = q_sum.extrema(dom);
    let q_const = qmn.certified && qmx.certified && qmx.hi - qmn.lo < 1e-12;
    let nonconstant_f = cert.table.iter().any(|r| r.value > 0.0);
    let one = Exact {
        value: 1.0,
        source: ExactSource::ConstantGamma,
        enclosure: [1.0, 1.0],
    };
    let above_one = |source| Exact {
        value: log_dim(g0, n),
        source,
        enclosure: [log_dim(gamma.gamma_lower_star.lo, n), log_dim(gamma.gamma_star.hi, n)],
    };
    pv.check(Estimate::ConstantOffsetSum, "Σ q_i is constant", q_const);
    pv.check(Estimate::ConstantOffsetSum, "f is not constant", nonconstant_f);
    if g0 <= 1.0 {
        pv.exact = Some(one);
    } else if q_const && nonconstant_f {
        pv.exact = Some(above_one(ExactSource::ConstantOffsetSum));
    } else if divergent {
        pv.check(Estimate::ConstantGamma, "variation of f is infinite", true);
        pv.exact = Some(above_one(ExactSource::ConstantGamma));
    } else if cert.verdict == Verdict::Bounded {
        pv.exact = Some(one);
    } else {
        pv.check(Estimate::ConstantGamma, "variation of f is decided", false);
        pv.notes.push("γ is constant but the variation of f is undecided".into());
    }
    pv
}

/// Bounds from the radii of the deepest scaling matrices.
pub fn dim_bounds_rho(
    model: &FifModel,
    spectral: &SpectralSummary,
    cert: &DivergenceCertificate,
    structure: &ScalingStructure,
) -> PartialVerdict {
    let n = model.n();
    let mut pv = PartialVerdict::default();
    let deepest = spectral.deepest();
    let (rho_lo, rho_hi) = (deepest.lower.lower, deepest.upper.upper);
    let divergent = cert.verdict == Verdict::Divergent;

    if pv.check(
        Estimate::RhoUpper,
        "no S_i vanishes on a subinterval",
        structure.nowhere_locally_zero(),
    ) {
        pv.upper = Some(Bound {
            value: log_dim(rho_hi, n).max(1.0),
            source: UpperSource::Rho,
        });
    } else {
        pv.notes.push("radius upper bound omitted: some S_i may vanish on a subinterval".into());
    }

    let a = pv.check(Estimate::RhoLower, "variation of f is infinite", divergent);
    let b = pv.check(Estimate::RhoLower, "min γ ≥ 1", cert.gamma_lower_star >= 1.0);
    let c = pv.check(
        Estimate::RhoLower,
        "each S_i has finitely many zeros",
        structure.finitely_many_zeros(),
    );
    if a && b && c {
        pv.lower = Some(Bound {
            value: log_dim(rho_lo, n),
            source: LowerSource::Rho,
        });
    } else {
        pv.notes.push("radius lower bound omitted: hypotheses not met".into());
    }

    if !pv.check(Estimate::RhoEqual, "every |S_i| is positive", structure.all_positive()) {
        return pv;
    }
    let one = Exact {
        value: 1.0,
        source: ExactSource::RhoEqual,
        enclosure: [1.0, 1.0],
    };
    if rho_hi <= 1.0 || cert.verdict == Verdict::Bounded {
        pv.exact = Some(one);
    } else if pv.check(Estimate::RhoEqual, "variation of f is infinite", divergent)
        && pv.check(Estimate::RhoEqual, "common radius limit > 1", rho_lo > 1.0)
    {
        let rho = spectral
            .rho_s
            .unwrap_or(0.5 * (deepest.lower.value + deepest.upper.value));
        pv.lower = Some(Bound {
            value: log_dim(rho_lo, n),
            source: LowerSource::Rho,
        });
        pv.exact = Some(Exact {
            value: log_dim(rho, n),
            source: ExactSource::RhoEqual,
            enclosure: [log_dim(rho_lo, n), log_dim(rho_hi, n)],
        });
    }
    pv
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoxCountError {
    #[error("{len} samples do not form an N-adic grid for N = {n}")]
    NotNAdic { len: usize, n: usize },
    #[error("samples at level {sample_level} cannot resolve level {k_max}; need level {}", k_max + 2)]
    InsufficientResolution { sample_level: u32, k_max: u32 },
    #[error("empty or reversed level range [{0}, {1}]")]
    BadRange(u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxCountLevel {
    pub k: u32,
    pub epsilon: f64,
    /// Number of `ε`-lattice squares met by the graph.
    pub count: u64,
    /// Sum over columns of `max − min`.
    pub oscillation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxCount {
    pub k_range: [u32; 2],
    pub sample_level: u32,
    pub levels: Vec<BoxCountLevel>,
    /// Least-squares slope of `log N(ε_k)` against `k·log N`.
    pub estimate: f64,
    /// Smallest and largest slope between consecutive levels.
    pub window: [f64; 2],
    /// `1 + log(O_k + 1)/(k·log N)` at the last level.
    pub oscillation_estimate: f64,
}

/// Count lattice squares of side `ε_k = |I|/N^k` met by the graph, column
/// by column, from samples on an N-adic grid.
pub fn boxcount_dimension(samples: &[(f64, f64)], n: usize, k_range: [u32; 2]) -> Result<BoxCount, BoxCountError> {
    let [k_min, k_max] = k_range;
    if k_min >= k_max {
        return Err(BoxCountError::BadRange(k_min, k_max));
    }
    let cells = samples.len().saturating_sub(1);
    let mut level = 0u32;
    let mut size = 1usize;
    while size < cells {
        size *= n;
        level += 1;
    }
    if cells == 0 || size != cells {
        return Err(BoxCountError::NotNAdic {
            len: samples.len(),
            n,
        });
    }
    if level < k_max + 2 {
        return Err(BoxCountError::InsufficientResolution {
            sample_level: level,
            k_max,
        });
    }
    let width = samples[cells].0 - samples[0].0;
    let ln_n = (n as f64).ln();
    let levels: Vec<BoxCountLevel> = (k_min..=k_max)
        .map(|k| {
            let cols = n.pow(k);
            let eps = width / cols as f64;
            let span = cells / cols;
            let (count, oscillation) = (0..cols)
                .map(|c| {
                    let (mn, mx) = samples[c * span..=(c + 1) * span]
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.1), b.max(s.1)));
                    (((mx / eps).floor() - (mn / eps).floor()) as u64 + 1, mx - mn)
                })
                .fold((0u64, 0.0), |(a, b), (c, o)| (a + c, b + o));
            BoxCountLevel {
                k,
                epsilon: eps,
                count,
                oscillation,
            }
        })
        .collect();
    let xs: Vec<f64> = levels.iter().map(|l| l.k as f64 * ln_n).collect();
    let ys: Vec<f64> = levels.iter().map(|l| (l.count as f64).ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slopes: Vec<f64> = ys.windows(2).map(|w| (w[1] - w[0]) / ln_n).collect();
    let last = levels.last().expect("nonempty range");
    Ok(BoxCount {
        k_range,
        sample_level: level,
        estimate: sxy / sxx,
        window: [
            slopes.iter().copied().fold(f64::INFINITY, f64::min),
            slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ],
        oscillation_estimate: 1.0 + (last.oscillation + 1.0).ln() / (last.k as f64 * ln_n),
        levels,
    })
}

/// Grid level used for box counting up to `k_max`: four levels finer when
/// the budget allows, never less than two.
pub fn boxcount_sample_level(n: usize, k_max: u32) -> u32 {
    let mut level = k_max + 2;
    while level < k_max + 4 && (n as u128).pow(level + 1) <= MAX_GRID_POINTS as u128 {
        level += 1;
    }
    level
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionVerdict {
    pub lower_bound: Bound<LowerSource>,
    pub upper_bound: Bound<UpperSource>,
    pub exact: Option<Exact>,
    pub hypotheses: Vec<Hypothesis>,
    pub notes: Vec<String>,
    pub gamma_path: Option<PartialVerdict>,
    pub rho_path: Option<PartialVerdict>,
    /// Annotation only; never used to tighten the bounds.
    pub empirical: Option<BoxCount>,
}

impl DimensionVerdict {
    /// Whether every hypothesis of the result that fixed the exact value
    /// was certified.
    pub fn exact_hypotheses_hold(&self) -> bool {
        let Some(exact) = self.exact else { return false };
        let (path, estimate) = match exact.source {
            ExactSource::BoundsMeet => return true,
            ExactSource::ConstantGamma => (&self.gamma_path, Estimate::ConstantGamma),
            ExactSource::ConstantOffsetSum => (&self.gamma_path, Estimate::ConstantOffsetSum),
            ExactSource::RhoEqual => (&self.rho_path, Estimate::RhoEqual),
        };
        path.as_ref().is_some_and(|p| p.all_hold(estimate))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdicts serialize")
    }
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("estimators disagree: {reason}\n{dump}")]
    Inconsistent { reason: String, dump: String },
}

/// Combine the partial results: tightest bounds win, an exact value is
/// kept only from a result whose hypotheses were all certified.
pub fn assemble_verdict(
    gamma_path: Option<PartialVerdict>,
    rho_path: Option<PartialVerdict>,
    empirical: Option<BoxCount>,
) -> Result<DimensionVerdict, AssemblyError> {
    let paths: Vec<&PartialVerdict> = gamma_path.iter().chain(rho_path.iter()).collect();
    let mut lower = Bound {
        value: 1.0,
        source: LowerSource::Continuity,
    };
    let mut upper = Bound {
        value: 2.0,
        source: UpperSource::Trivial,
    };
    for p in &paths {
        if let Some(l) = p.lower.filter(|l| l.value > lower.value) {
            lower = l;
        }
        if let Some(u) = p.upper.filter(|u| u.value < upper.value) {
            upper = u;
        }
    }
    let mut exact = paths.iter().find_map(|p| p.exact);
    let mut verdict = DimensionVerdict {
        lower_bound: lower,
        upper_bound: upper,
        exact: None,
        hypotheses: paths.iter().flat_map(|p| p.hypotheses.clone()).collect(),
        notes: paths.iter().flat_map(|p| p.notes.clone()).collect(),
        gamma_path: gamma_path.clone(),
        rho_path: rho_path.clone(),
        empirical,
    };
    let fail = |reason: String, v: &DimensionVerdict| AssemblyError::Inconsistent {
        reason,
        dump: v.to_json(),
    };
    if lower.value > upper.value + CONSISTENCY_TOL {
        return Err(fail(format!("lower bound {} above upper bound {}", lower.value, upper.value), &verdict));
    }
    for e in paths.iter().filter_map(|p| p.exact) {
        if e.value < lower.value - CONSISTENCY_TOL || e.value > upper.value + CONSISTENCY_TOL {
            return Err(fail(
                format!("exact value {} outside [{}, {}]", e.value, lower.value, upper.value),
                &verdict,
            ));
        }
    }
    if exact.is_none() && upper.value - lower.value <= CONSISTENCY_TOL {
        exact = Some(Exact {
            value: lower.value,
            source: ExactSource::BoundsMeet,
            enclosure: [lower.value, upper.value],
        });
    }
    verdict.exact = exact;
    Ok(verdict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Methods {
    pub gamma: bool,
    pub rho: bool,
    pub boxcount: bool,
}

impl Methods {
    pub const ALL: Methods = Methods {
        gamma: true,
        rho: true,
        boxcount: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    /// Deepest matrix level.
    pub k_max: u32,
    /// Deepest level of the divergence check.
    pub osc_k_max: u32,
    pub tol: f64,
    pub boxcount_range: [u32; 2],
    pub methods: Methods,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            k_max: 8,
            osc_k_max: 8,
            tol: crate::matrices::DEFAULT_TOL,
            boxcount_range: [4, 9],
            methods: Methods::ALL,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    BoxCount(#[from] BoxCountError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

impl From<OscillationError> for AnalysisError {
    fn from(e: OscillationError) -> Self {
        match e {
            OscillationError::Engine(e) => Self::Engine(e),
            OscillationError::Matrix(e) => Self::Matrix(e),
        }
    }
}

/// Intermediate results of a full run, kept for export.
#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub verdict: DimensionVerdict,
    pub divergence: DivergenceCertificate,
    pub gamma: Option<SumFunctionSummary>,
    pub spectral: Option<SpectralSummary>,
    pub structure: ScalingStructure,
}

pub fn analyze(model: &FifModel, opts: &AnalysisOptions) -> Result<Analysis, AnalysisError> {
    let divergence = divergence_check(model, opts.osc_k_max)?;
    let structure = scaling_structure(model);
    let gamma = opts
        .methods
        .gamma
        .then(|| gamma_summary(model, opts.k_max))
        .transpose()?;
    let spectral = opts
        .methods
        .rho
        .then(|| rho_sequence(model, opts.k_max, opts.tol))
        .transpose()?;
    if let Some(s) = &spectral {
        s.ensure_monotone()?;
    }
    let empirical = if opts.methods.boxcount {
        let [_, hi] = opts.boxcount_range;
        let grid = grid_values(model, boxcount_sample_level(model.n(), hi))?;
        Some(boxcount_dimension(&grid.samples(), model.n(), opts.boxcount_range)?)
    } else {
        None
    };
    let gamma_path = gamma.as_ref().map(|g| dim_bounds_gamma(model, g, &divergence));
    let rho_path = spectral
        .as_ref()
        .map(|s| dim_bounds_rho(model, s, &divergence, &structure));
    let verdict = assemble_verdict(gamma_path, rho_path, empirical)?;
    Ok(Analysis {
        verdict,
        divergence,
        gamma,
        spectral,
        structure,
    })
}

impl Analysis {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("analysis serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::sample_graph;
    use crate::model::{builtin_model, validate_model};

    fn builtin(name: &str, kv: &[(&str, &str)]) -> FifModel {
        let p = kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        validate_model(&builtin_model(name, &p).unwrap().config).unwrap()
    }

    fn fast() -> AnalysisOptions {
        AnalysisOptions {
            k_max: 4,
            osc_k_max: 6,
            boxcount_range: [3, 5],
            ..Default::default()
        }
    }

    #[test]
    fn line_counts_to_one() {
        let m = builtin("affine", &[("n", "3"), ("d", "0, 0, 0"), ("y", "0, 0.3333333333333333, 0.6666666666666666, 1")]);
        let b = boxcount_dimension(&sample_graph(&m, 9).unwrap(), 3, [4, 7]).unwrap();
        assert!((b.estimate - 1.0).abs() < 0.02);
        assert!(b.levels.iter().all(|l| l.count >= 3u64.pow(l.k)));
    }

    #[test]
    fn resolution_and_shape_errors() {
        let m = builtin("example61", &[]);
        let s = sample_graph(&m, 5).unwrap();
        assert!(matches!(
            boxcount_dimension(&s, 3, [2, 4]),
            Err(BoxCountError::InsufficientResolution { .. })
        ));
        assert!(matches!(boxcount_dimension(&s[..20], 3, [1, 2]), Err(BoxCountError::NotNAdic { .. })));
        assert!(matches!(boxcount_dimension(&s, 3, [2, 2]), Err(BoxCountError::BadRange(2, 2))));
    }

    #[test]
    fn example_gamma_bounds() {
        let m = builtin("example61", &[]);
        let a = analyze(&m, &AnalysisOptions { methods: Methods { rho: false, boxcount: false, gamma: true }, ..fast() }).unwrap();
        let g = a.verdict.gamma_path.unwrap();
        assert!((g.upper.unwrap().value - (1.0 + 1.75f64.ln() / 3f64.ln())).abs() < 1e-9);
        assert!((g.lower.unwrap().value - (1.0 + 1.25f64.ln() / 3f64.ln())).abs() < 1e-9);
        assert!(g.exact.is_none());
    }

    #[test]
    fn example_rho_is_exact() {
        let m = builtin("example61", &[]);
        let a = analyze(&m, &AnalysisOptions { boxcount_range: [3, 5], ..Default::default() }).unwrap();
        let e = a.verdict.exact.unwrap();
        assert_eq!(e.source, ExactSource::RhoEqual);
        assert!((1.374..=1.384).contains(&e.value));
        assert!(a.verdict.exact_hypotheses_hold());
        assert_eq!(a.divergence.k0, Some(6));
        assert!(a.verdict.lower_bound.value <= e.value && e.value <= a.verdict.upper_bound.value);
    }

    #[test]
    fn weierstrass_paths_agree() {
        let m = builtin("weierstrass", &[("lambda", "0.6")]);
        let a = analyze(&m, &fast()).unwrap();
        let want = 2.0 + 0.6f64.ln() / 3f64.ln();
        let g = a.verdict.gamma_path.as_ref().unwrap().exact.unwrap();
        let r = a.verdict.rho_path.as_ref().unwrap().exact.unwrap();
        assert_eq!(g.source, ExactSource::ConstantOffsetSum);
        assert!((g.value - want).abs() < 1e-9 && (r.value - want).abs() < 1e-6);
        assert!(a.verdict.exact_hypotheses_hold());
    }

    #[test]
    fn small_scaling_gives_one() {
        let m = builtin("affine", &[("n", "3"), ("d", "0.2, -0.3, 0.1"), ("y", "0, 1, -1, 0.5")]);
        let a = analyze(&m, &fast()).unwrap();
        let e = a.verdict.exact.unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(a.verdict.upper_bound.value, 1.0);
    }

    #[test]
    fn sign_changes_give_bounds_only() {
        let cfg = crate::model::ModelConfig::from_toml(
            r#"
            [model]
            n = 2
            y = [0.0, 0.3, 0.0]
            [scaling]
            s1 = "0.45*cos(2*pi*x)"
            s2 = "0.4*sin(pi*x)"
            [offsets]
            q1 = "0.3*x"
            q2 = "0.3*(1 - x)"
            "#,
        )
        .unwrap();
        let m = validate_model(&cfg).unwrap();
        let a = analyze(&m, &fast()).unwrap();
        assert!(a.verdict.exact.is_none() || a.verdict.exact.unwrap().value == 1.0);
        let r = a.verdict.rho_path.as_ref().unwrap();
        assert!(r.hypotheses.iter().any(|h| h.estimate == Estimate::RhoEqual && !h.holds));
    }

    #[test]
    fn inconsistent_bounds_are_flagged() {
        let lo = PartialVerdict {
            lower: Some(Bound { value: 1.6, source: LowerSource::Gamma }),
            ..Default::default()
        };
        let hi = PartialVerdict {
            upper: Some(Bound { value: 1.4, source: UpperSource::Rho }),
            ..Default::default()
        };
        let err = assemble_verdict(Some(lo), Some(hi), None).unwrap_err();
        assert!(err.to_string().contains("lower bound"));
    }
}
