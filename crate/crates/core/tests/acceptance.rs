//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line straight to
//! stderr (bypassing the test harness capture) before asserting.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fifdim_core::dimension::{analyze, boxcount_dimension, boxcount_sample_level, AnalysisOptions, ExactSource};
use fifdim_core::engine::grid_values;
use fifdim_core::matrices::{
    build_matrices, gamma_summary, rho_sequence, spectral_radius, SparseMatrix, DEFAULT_TOL,
};
use fifdim_core::model::{builtin_model, validate_model, FifModel, ModelConfig};
use fifdim_core::oscillation::{
    oscillation_sum, oscillation_vector, scalar_recursion_constant, u_vector, vector_recursion_bounds, Verdict,
};

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "acceptance criterion {n:>2} [{status}] {name}: {detail}");
}

fn builtin(name: &str, kv: &[(&str, &str)]) -> FifModel {
    let p = kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    validate_model(&builtin_model(name, &p).unwrap().config).unwrap()
}

fn example() -> FifModel {
    builtin("example61", &[])
}

/// Random valid models on [0, 1]: sinusoidal or affine scalings with
/// `|a| + |b| ≤ 0.9`, offsets an affine fix-up plus a bump vanishing at
/// both ends.
fn random_models(count: usize, seed: u64) -> Vec<FifModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n: usize = rng.random_range(2..=3);
            let y: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut scaling = std::collections::BTreeMap::new();
            let mut offsets = std::collections::BTreeMap::new();
            for i in 1..=n {
                let a: f64 = rng.random_range(-0.45..0.45);
                let b: f64 = rng.random_range(-0.45..0.45);
                let s = if rng.random_bool(0.7) {
                    let w: u32 = rng.random_range(1..=3);
                    let c: f64 = rng.random_range(0.0..1.0);
                    format!("({a:?}) + ({b:?})*sin(2*pi*({w}*x + {c:?}))")
                } else {
                    format!("({a:?}) + ({b:?})*x")
                };
                let sf = fifdim_core::funcs::ExprFunction::parse(&s).unwrap();
                let lo = y[i - 1] - sf.eval(0.0) * y[0];
                let hi = y[i] - sf.eval(1.0) * y[n];
                let bump: f64 = rng.random_range(-0.5..0.5);
                offsets.insert(
                    format!("q{i}"),
                    format!("({lo:?}) + ({:?})*x + ({bump:?})*sin(pi*x)", hi - lo),
                );
                scaling.insert(format!("s{i}"), s);
            }
            let cfg = ModelConfig {
                model: fifdim_core::model::ModelSection {
                    name: Some("random".into()),
                    n,
                    interval: Some([0.0, 1.0]),
                    knots: None,
                    y,
                },
                scaling,
                offsets,
                tables: Default::default(),
            };
            validate_model(&cfg).expect("random model validates")
        })
        .collect()
}

#[test]
fn criterion_01_radius_table() {
    const REFERENCE: [(u32, f64, f64); 6] = [
        (1, 1.95688, 1.05567),
        (2, 1.68984, 1.33590),
        (4, 1.53627, 1.49577),
        (5, 1.52277, 1.50926),
        (7, 1.51675, 1.51525),
        (8, 1.51625, 1.51575),
    ];
    let start = Instant::now();
    let s = rho_sequence(&example(), 8, DEFAULT_TOL).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let mut misses = Vec::new();
    for (k, up, lo) in REFERENCE {
        let l = &s.levels[k as usize - 1];
        for (kind, got, want) in [("upper", l.upper.value, up), ("lower", l.lower.value, lo)] {
            if (got - want).abs() > 5e-4 {
                misses.push(format!("k={k} {kind} {got:.5} vs {want:.5}"));
            }
        }
    }
    let pass = misses.is_empty() && elapsed < 10.0;
    let detail = if misses.is_empty() {
        format!("12/12 radii within 5e-4 in {elapsed:.2} s")
    } else {
        format!("{}/12 within 5e-4 in {elapsed:.2} s; off: {}", 12 - misses.len(), misses.join(", "))
    };
    report(1, "radius table", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_02_first_level_entries() {
    let (up, lo) = build_matrices(&example(), 1).unwrap();
    let r = 3f64.sqrt() / 8.0;
    let up_rows = [[0.75, 0.5 + r, 0.5], [0.75, 0.5 + r, 0.5], [0.5, 0.5 + r, 0.75]];
    let lo_rows = [[0.5, 0.5 - r, 0.25], [0.5, 0.5 - r, 0.25], [0.25, 0.5 - r, 0.5]];
    let mut worst: f64 = 0.0;
    for row in 1..=3 {
        for col in 1..=3 {
            worst = worst
                .max((up.entry(row, col) - up_rows[row - 1][col - 1]).abs())
                .max((lo.entry(row, col) - lo_rows[row - 1][col - 1]).abs());
        }
    }
    let pass = worst <= 1e-12;
    let detail = format!("largest entry error {worst:.2e}");
    report(2, "first-level matrix entries", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_03_sum_function_extrema() {
    let g = gamma_summary(&example(), 1).unwrap();
    let (lo, hi) = (g.gamma_lower_star.mid(), g.gamma_star.mid());
    let pass = (lo - 1.25).abs() <= 1e-9 && (hi - 1.75).abs() <= 1e-9;
    let detail = format!("min γ = {lo:.12}, max γ = {hi:.12}");
    report(3, "sum function extrema", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_04_dimension_verdict() {
    let a = analyze(&example(), &AnalysisOptions::default()).unwrap();
    let v = &a.verdict;
    let exact = v.exact.map(|e| e.value).unwrap_or(f64::NAN);
    let threshold = a.divergence.threshold.unwrap_or(f64::NAN);
    let pass = (1.374..=1.384).contains(&exact)
        && v.exact_hypotheses_hold()
        && v.exact.map(|e| e.source) == Some(ExactSource::RhoEqual)
        && a.divergence.verdict == Verdict::Divergent
        && a.divergence.k0 == Some(6)
        && (threshold - 8.0 * PI).abs() < 1e-9;
    let detail = format!(
        "dim = {exact:.5} in [{:.5}, {:.5}], hypotheses hold: {}, k0 = {:?}, threshold = {threshold:.6}",
        v.exact.map_or(f64::NAN, |e| e.enclosure[0]),
        v.exact.map_or(f64::NAN, |e| e.enclosure[1]),
        v.exact_hypotheses_hold(),
        a.divergence.k0
    );
    report(4, "dimension verdict", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_05_divergence_certificate() {
    let o = oscillation_sum(&example(), 6, 4).unwrap();
    let pass = o.value > 8.0 * PI;
    let detail = format!("O_6 = {:.4} (r = 4) against 8π = {:.4}", o.value, 8.0 * PI);
    report(5, "divergence certificate", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_06_monotone_radii() {
    let mut models = vec![example()];
    models.extend(random_models(20, 6));
    let mut failures = Vec::new();
    for (idx, m) in models.iter().enumerate() {
        let s = rho_sequence(m, 6, DEFAULT_TOL).unwrap();
        for w in s.levels.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if b.upper.value > a.upper.value + 1e-6 || b.lower.value < a.lower.value - 1e-6 {
                failures.push(format!("model {idx} k={}: monotonicity", a.k));
            }
        }
        for l in &s.levels[..5] {
            let ok = l.gamma.lower <= l.lower.value + 1e-6
                && l.lower.value <= l.upper.value + 1e-6
                && l.upper.value <= l.gamma.upper + 1e-6;
            if !ok {
                failures.push(format!("model {idx} k={}: sandwich", l.k));
            }
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!("{} models, k = 1..5, monotone and sandwiched", models.len())
    } else {
        failures.join("; ")
    };
    report(6, "monotone radii", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_07_weierstrass_closed_form() {
    let mut lines = Vec::new();
    let mut pass = true;
    for lambda in ["0.5", "0.6", "0.8"] {
        let m = builtin("weierstrass", &[("lambda", lambda)]);
        let lam: f64 = lambda.parse().unwrap();
        let want = 2.0 + lam.ln() / 3f64.ln();
        let opts = AnalysisOptions {
            k_max: 4,
            osc_k_max: 4,
            ..Default::default()
        };
        let a = analyze(&m, &opts).unwrap();
        let g = a.verdict.gamma_path.as_ref().and_then(|p| p.exact).map_or(f64::NAN, |e| e.value);
        let r = a.verdict.rho_path.as_ref().and_then(|p| p.exact).map_or(f64::NAN, |e| e.value);
        let b = a.verdict.empirical.as_ref().map_or(f64::NAN, |b| b.estimate);
        let ok = (g - r).abs() <= 1e-6 && (g - want).abs() <= 1e-6 && (b - want).abs() <= 0.1;
        pass &= ok;
        lines.push(format!("λ={lambda}: gamma {g:.7}, rho {r:.7}, box {b:.4}, formula {want:.7}"));
    }
    let detail = lines.join("; ");
    report(7, "weierstrass closed form", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_08_self_affinity_and_nesting() {
    let mut models = vec![
        example(),
        builtin("weierstrass", &[("lambda", "0.5")]),
        builtin("weierstrass", &[("lambda", "0.6")]),
        builtin("weierstrass", &[("lambda", "0.8")]),
        builtin("affine", &[("n", "3"), ("d", "0.4, -0.3, 0.6")]),
    ];
    models.extend(random_models(20, 8));
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let (mut worst_res, mut worst_nest): (f64, f64) = (0.0, 0.0);
    for m in &models {
        let n = m.n();
        let k = if n == 2 { 12 } else { 8 };
        let coarse = grid_values(m, k).unwrap();
        let fine = coarse.refine(m);
        for _ in 0..10_000 {
            let i = rng.random_range(1..=n);
            let j = rng.random_range(0..=coarse.cells());
            let x = coarse.x(j);
            let lhs = fine.values()[(i - 1) * coarse.cells() + j];
            let rhs = m.scaling(i).eval(x) * coarse.values()[j] + m.offset(i).eval(x);
            worst_res = worst_res.max((lhs - rhs).abs());
        }
        let restricted = fine.restrict(k);
        for (a, b) in restricted.iter().zip(coarse.values()) {
            worst_nest = worst_nest.max((a - b).abs());
        }
    }
    let pass = worst_res <= 1e-9 && worst_nest <= 1e-12;
    let detail = format!(
        "{} models, 10^4 points each: residual {worst_res:.2e}, nesting {worst_nest:.2e}",
        models.len()
    );
    report(8, "self-affinity and nesting", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_09_scalar_recursion() {
    let m = example();
    let g = gamma_summary(&m, 1).unwrap();
    let (g_lo, g_hi) = (g.gamma_lower_star.lo, g.gamma_star.hi);
    let e = scalar_recursion_constant(&m);
    let o: Vec<_> = (1..=9).map(|k| oscillation_sum(&m, k, 4).unwrap()).collect();
    let (mut pass, mut tight) = (true, true);
    for k in 0..8 {
        let (a, b) = (&o[k], &o[k + 1]);
        pass &= g_lo * a.value - e <= b.upper && b.value <= g_hi * a.upper + e;
        tight &= g_lo * a.value - e <= b.value && b.value <= g_hi * a.value + e;
    }
    let detail = format!("k = 1..8, E = {e:.4}; holds with zero slack: {tight}");
    report(9, "scalar oscillation recursion", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_10_vector_recursion() {
    let m = example();
    let (mut pass, mut tight, mut checked) = (true, true, 0);
    for k in 1..=3 {
        let (up, lo) = build_matrices(&m, k).unwrap();
        let u = u_vector(&m, k);
        for p in 1..=3 {
            let v = oscillation_vector(&m, k, p, 4).unwrap();
            let next = oscillation_vector(&m, k, p + 1, 4).unwrap();
            let (_, ub) = vector_recursion_bounds(&up, &lo, &u, &v.upper);
            let (lb, ub0) = vector_recursion_bounds(&up, &lo, &u, &v.entries);
            for r in 0..u.len() {
                pass &= next.entries[r] <= ub[r] && lb[r] <= next.upper[r];
                tight &= next.entries[r] <= ub0[r] && lb[r] <= next.entries[r];
                checked += 1;
            }
        }
    }
    let detail = format!("{checked} entries for k, p ≤ 3; holds with zero slack: {tight}");
    report(10, "vector oscillation recursion", pass, &detail);
    assert!(pass, "{detail}");
}

fn dense_radius(m: &SparseMatrix) -> f64 {
    let d = m.to_dense();
    let n = d.len();
    let mat = DMatrix::from_fn(n, n, |r, c| d[r][c]);
    mat.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_11_dense_oracle() {
    let mut mats: Vec<SparseMatrix> = Vec::new();
    let mut models = vec![example()];
    models.extend(random_models(10, 11));
    for m in &models {
        let k_top = if m.n() == 2 { 6 } else { 4 };
        for k in 1..=k_top {
            let (up, lo) = build_matrices(m, k).unwrap();
            mats.push(up.to_sparse());
            mats.push(lo.to_sparse());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    for _ in 0..30 {
        let n = rng.random_range(1..=81);
        let density: f64 = rng.random_range(0.02..1.0);
        let rows = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| if rng.random_bool(density) { rng.random_range(0.0..2.0) / n as f64 } else { 0.0 })
                    .collect()
            })
            .collect::<Vec<Vec<f64>>>();
        mats.push(SparseMatrix::from_dense(&rows));
    }
    let mut worst: f64 = 0.0;
    for m in &mats {
        let got = spectral_radius(m, 1e-11).value;
        worst = worst.max((got - dense_radius(m)).abs());
    }
    let pass = worst <= 1e-6;
    let detail = format!("{} matrices up to dimension 81, largest difference {worst:.2e}", mats.len());
    report(11, "dense eigenvalue oracle", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn boxcount_follows_the_example() {
    let m = example();
    let level = boxcount_sample_level(3, 9);
    let b = boxcount_dimension(&grid_values(&m, level).unwrap().samples(), 3, [4, 9]).unwrap();
    assert!((b.estimate - 1.379).abs() < 0.1, "{}", b.estimate);
}
