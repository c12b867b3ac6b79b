use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use fifdim_core::dimension::{analyze, boxcount_dimension, boxcount_sample_level, AnalysisOptions, BoxCount, Exact, Methods};
use fifdim_core::engine::{grid_values, write_samples_csv};
use fifdim_core::matrices::{build_matrices, rho_sequence, MatrixKind, Primitivity, SpectralEstimate};
use fifdim_core::oscillation::{divergence_check_with, Verdict};

use crate::report::{emit, load_model, timed, CliError, RunReport};
use crate::{Format, KindArg, Method, ModelArgs, Output};

fn params(kv: &[(&'static str, String)]) -> BTreeMap<&'static str, String> {
    kv.iter().cloned().collect()
}

fn utf8(buf: Vec<u8>) -> String {
    String::from_utf8(buf).expect("writers emit UTF-8")
}

pub fn validate(args: &ModelArgs) -> Result<(), CliError> {
    let loaded = load_model(args)?;
    println!(
        "ok: {} with {} maps on [{}, {}]",
        loaded.model.name(),
        loaded.model.n(),
        loaded.model.interval().lo,
        loaded.model.interval().hi
    );
    Ok(())
}

pub fn eval(args: &ModelArgs, level: u32, output: &Output) -> Result<(), CliError> {
    let loaded = load_model(args)?;
    let grid = timed("grid", || grid_values(&loaded.model, level))?;
    let samples = grid.samples();
    match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            write_samples_csv(&mut buf, &samples)?;
            emit(output, &utf8(buf))
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Samples {
                level: u32,
                recursion_residual: f64,
                samples: Vec<(f64, f64)>,
            }
            let out = Samples {
                level,
                recursion_residual: grid.recursion_residual(),
                samples,
            };
            let report = RunReport::new("eval", &loaded, params(&[("level", level.to_string())]), out);
            emit(output, &report.to_json())
        }
    }
}

pub fn osc(args: &ModelArgs, kmax: u32, refine: u32, output: &Output) -> Result<(), CliError> {
    let loaded = load_model(args)?;
    let cert = timed("oscillation", || divergence_check_with(&loaded.model, kmax, refine))?;
    match cert.verdict {
        Verdict::Divergent => eprintln!(
            "verdict: divergent, O_{} = {:.5} exceeds {:.5}",
            cert.k0.unwrap_or_default(),
            cert.crossing_value().unwrap_or_default(),
            cert.threshold.unwrap_or_default()
        ),
        _ => eprintln!("verdict: {:?}, {}", cert.verdict, cert.reason),
    }
    match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            cert.write_csv(&mut buf)?;
            emit(output, &utf8(buf))
        }
        Format::Json => {
            let p = params(&[("kmax", kmax.to_string()), ("refine", refine.to_string())]);
            emit(output, &RunReport::new("osc", &loaded, p, cert).to_json())
        }
    }
}

pub fn matrices(args: &ModelArgs, level: u32, kind: KindArg, tol: f64, output: &Output) -> Result<(), CliError> {
    if level == 0 {
        return Err(CliError::Usage("--level must be at least 1".into()));
    }
    let loaded = load_model(args)?;
    let (upper, lower) = timed("matrices", || build_matrices(&loaded.model, level))?;
    let m = match kind {
        KindArg::Upper => upper,
        KindArg::Lower => lower,
    };
    match output.format {
        None | Some(Format::Csv) => {
            let mut buf = Vec::new();
            m.write_coordinate(&mut buf)?;
            emit(output, &utf8(buf))
        }
        Some(Format::Json) => {
            #[derive(Serialize)]
            struct Summary {
                k: u32,
                kind: MatrixKind,
                dimension: usize,
                max_enclosure_width: f64,
                uncertified_entries: usize,
                pattern: Primitivity,
                spectral_radius: SpectralEstimate,
                column_sums: [f64; 2],
            }
            let sums = m.column_sums();
            let out = Summary {
                k: level,
                kind: m.kind(),
                dimension: m.dim(),
                max_enclosure_width: m.max_width(),
                uncertified_entries: m.uncertified(),
                pattern: m.primitivity(),
                spectral_radius: m.spectral_radius(tol),
                column_sums: [
                    sums.iter().copied().fold(f64::INFINITY, f64::min),
                    sums.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                ],
            };
            let p = params(&[("level", level.to_string()), ("tol", tol.to_string())]);
            emit(output, &RunReport::new("matrices", &loaded, p, out).to_json())
        }
    }
}

pub fn rho(args: &ModelArgs, kmax: u32, tol: f64, output: &Output) -> Result<(), CliError> {
    if kmax == 0 {
        return Err(CliError::Usage("--kmax must be at least 1".into()));
    }
    let loaded = load_model(args)?;
    let summary = timed("spectral radii", || rho_sequence(&loaded.model, kmax, tol))?;
    for v in &summary.violations {
        eprintln!("error: {v}");
    }
    match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            summary.write_radii_csv(&mut buf)?;
            emit(output, &utf8(buf))?;
        }
        Format::Json => {
            let p = params(&[("kmax", kmax.to_string()), ("tol", tol.to_string())]);
            emit(output, &RunReport::new("rho", &loaded, p, &summary).to_json())?;
        }
    }
    summary.ensure_monotone()?;
    Ok(())
}

pub fn dim(args: &ModelArgs, method: Method, kmax: u32, tol: f64, output: &Output) -> Result<(), CliError> {
    if kmax == 0 {
        return Err(CliError::Usage("--kmax must be at least 1".into()));
    }
    let loaded = load_model(args)?;
    let methods = match method {
        Method::All => Methods::ALL,
        Method::Gamma => Methods { gamma: true, rho: false, boxcount: false },
        Method::Rho => Methods { gamma: false, rho: true, boxcount: false },
        Method::Boxcount => Methods { gamma: false, rho: false, boxcount: true },
    };
    let opts = AnalysisOptions {
        k_max: kmax,
        osc_k_max: kmax,
        tol,
        methods,
        ..Default::default()
    };
    let analysis = timed("analysis", || analyze(&loaded.model, &opts))?;
    let v = &analysis.verdict;
    match v.exact {
        Some(e) => eprintln!("dim_B = {:.5} ({:?})", e.value, e.source),
        None => eprintln!("dim_B in [{:.5}, {:.5}]", v.lower_bound.value, v.upper_bound.value),
    }
    let p = params(&[
        ("method", format!("{method:?}").to_lowercase()),
        ("kmax", kmax.to_string()),
        ("tol", tol.to_string()),
    ]);
    emit(output, &RunReport::new("dim", &loaded, p, &analysis).to_json())
}

pub fn boxcount(args: &ModelArgs, kmin: u32, kmax: u32, output: &Output) -> Result<(), CliError> {
    let loaded = load_model(args)?;
    let n = loaded.model.n();
    let level = boxcount_sample_level(n, kmax);
    let grid = timed("grid", || grid_values(&loaded.model, level))?;
    let b: BoxCount = timed("box count", || boxcount_dimension(&grid.samples(), n, [kmin, kmax]))?;
    eprintln!("estimate {:.5}, window [{:.5}, {:.5}]", b.estimate, b.window[0], b.window[1]);
    match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("k,epsilon,count,oscillation\n");
            for l in &b.levels {
                let _ = writeln!(s, "{},{:.16e},{},{:.16e}", l.k, l.epsilon, l.count, l.oscillation);
            }
            emit(output, &s)
        }
        Format::Json => {
            let p = params(&[("kmin", kmin.to_string()), ("kmax", kmax.to_string()), ("sample_level", level.to_string())]);
            emit(output, &RunReport::new("boxcount", &loaded, p, &b).to_json())
        }
    }
}

/// Reference radii of the three-map example, `(k, upper, lower)`, and its
/// reference dimension.
const REFERENCE_RADII: [(u32, f64, f64); 6] = [
    (1, 1.95688, 1.05567),
    (2, 1.68984, 1.33590),
    (4, 1.53627, 1.49577),
    (5, 1.52277, 1.50926),
    (7, 1.51675, 1.51525),
    (8, 1.51625, 1.51575),
];
const REFERENCE_DIM: f64 = 1.379;
const RADIUS_TOL: f64 = 5e-4;

#[derive(Serialize)]
struct ComparisonRow {
    k: u32,
    kind: MatrixKind,
    computed: f64,
    reference: f64,
    delta: f64,
    within_tolerance: bool,
}

#[derive(Serialize)]
struct Reproduction {
    rows: Vec<ComparisonRow>,
    matched: usize,
    tolerance: f64,
    dimension: Option<Exact>,
    reference_dimension: f64,
    divergence_level: Option<u32>,
    threshold: Option<f64>,
}

pub fn reproduce(example: &str, tol: f64, output: &Output) -> Result<(), CliError> {
    if example != "example61" {
        return Err(CliError::Usage(format!("no reference data for `{example}` (only example61)")));
    }
    let args = ModelArgs {
        model: "builtin:example61".into(),
        params: Vec::new(),
    };
    let loaded = load_model(&args)?;
    let opts = AnalysisOptions {
        tol,
        ..Default::default()
    };
    let analysis = timed("analysis", || analyze(&loaded.model, &opts))?;
    let spectral = analysis.spectral.as_ref().expect("all methods requested");
    let mut rows = Vec::new();
    for (k, up, lo) in REFERENCE_RADII {
        let level = &spectral.levels[k as usize - 1];
        for (kind, computed, reference) in [(MatrixKind::Upper, level.upper.value, up), (MatrixKind::Lower, level.lower.value, lo)] {
            let delta = computed - reference;
            rows.push(ComparisonRow {
                k,
                kind,
                computed,
                reference,
                delta,
                within_tolerance: delta.abs() <= RADIUS_TOL,
            });
        }
    }
    let rep = Reproduction {
        matched: rows.iter().filter(|r| r.within_tolerance).count(),
        rows,
        tolerance: RADIUS_TOL,
        dimension: analysis.verdict.exact,
        reference_dimension: REFERENCE_DIM,
        divergence_level: analysis.divergence.k0,
        threshold: analysis.divergence.threshold,
    };
    match output.format {
        Some(Format::Json) => {
            let p = params(&[("tol", tol.to_string())]);
            emit(output, &RunReport::new("reproduce", &loaded, p, &rep).to_json())
        }
        _ => {
            let mut s = String::new();
            let _ = writeln!(s, "spectral radii of the level-k scaling matrices, example61");
            let _ = writeln!(s, " k  kind   computed  reference     delta");
            for r in &rep.rows {
                let _ = writeln!(
                    s,
                    "{:>2}  {:<5}  {:.5}   {:.5}  {:+.5}  {}",
                    r.k,
                    r.kind,
                    r.computed,
                    r.reference,
                    r.delta,
                    if r.within_tolerance { "ok" } else { "MISMATCH" }
                );
            }
            let _ = writeln!(s, "{} of {} radii within {:e}", rep.matched, rep.rows.len(), RADIUS_TOL);
            if let (Some(k0), Some(t)) = (rep.divergence_level, rep.threshold) {
                let _ = writeln!(s, "variation diverges: O_{k0} exceeds {t:.5}");
            }
            match rep.dimension {
                Some(e) => {
                    let _ = writeln!(
                        s,
                        "box dimension {:.5} in [{:.5}, {:.5}], reference {REFERENCE_DIM}",
                        e.value, e.enclosure[0], e.enclosure[1]
                    );
                }
                None => {
                    let _ = writeln!(s, "box dimension not determined");
                }
            }
            emit(output, &s)
        }
    }
}
