use std::collections::BTreeMap;

use thiserror::Error;

use super::config::{ModelConfig, ModelSection};
use crate::funcs::{ExprFunction, ParseError};

pub const BUILTIN_NAMES: [&str; 3] = ["example61", "weierstrass", "affine"];

/// Series tail below which the Weierstrass sum is truncated.
const SERIES_TAIL: f64 = 1e-15;

#[derive(Debug, Error, PartialEq)]
pub enum BuiltinError {
    #[error("unknown builtin model `{0}` (expected one of example61, weierstrass, affine)")]
    UnknownName(String),
    #[error("builtin `{model}` takes no parameter `{key}`")]
    UnknownParam { model: String, key: String },
    #[error("parameter `{key}`: {reason}")]
    BadParam { key: String, reason: String },
}

/// A built-in model description with any warnings about its parameters.
#[derive(Debug, Clone)]
pub struct BuiltinModel {
    pub config: ModelConfig,
    pub warnings: Vec<String>,
}

struct Params<'a> {
    model: &'a str,
    raw: &'a BTreeMap<String, String>,
}

impl Params<'_> {
    fn check_keys(&self, allowed: &[&str]) -> Result<(), BuiltinError> {
        match self.raw.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(BuiltinError::UnknownParam {
                model: self.model.to_string(),
                key: k.clone(),
            }),
            None => Ok(()),
        }
    }

    fn bad(key: &str, reason: impl ToString) -> BuiltinError {
        BuiltinError::BadParam {
            key: key.to_string(),
            reason: reason.to_string(),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, BuiltinError> {
        self.raw
            .get(key)
            .map_or(Ok(default), |v| v.trim().parse().map_err(|e| Self::bad(key, e)))
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, BuiltinError> {
        self.raw
            .get(key)
            .map_or(Ok(default), |v| v.trim().parse().map_err(|e| Self::bad(key, e)))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, BuiltinError> {
        self.raw
            .get(key)
            .map(|v| {
                v.trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| Self::bad(key, e)))
                    .collect()
            })
            .transpose()
    }
}

/// Look up a built-in model by name.
///
/// * `example61`: three maps on `[0, 1]` with sinusoidal scaling.
/// * `weierstrass`: `n` (3), `lambda` (0.6), `phi` (`cos(2*pi*x)`, must be
///   1-periodic). Graph of `Σ λ^k φ(N^k x)`.
/// * `affine`: `n` (2), `d` (list of constant scalings, default all 0.5),
///   `y` (default `i/N`), `interval` (default `[0, 1]`).
pub fn builtin_model(
    name: &str,
    params: &BTreeMap<String, String>,
) -> Result<BuiltinModel, BuiltinError> {
    let p = Params { model: name, raw: params };
    match name {
        "example61" => {
            p.check_keys(&[])?;
            Ok(BuiltinModel {
                config: example61(),
                warnings: Vec::new(),
            })
        }
        "weierstrass" => {
            p.check_keys(&["n", "lambda", "phi"])?;
            let n = p.usize("n", 3)?;
            let lambda = p.f64("lambda", 0.6)?;
            let phi = params.get("phi").map_or("cos(2*pi*x)", String::as_str);
            weierstrass(n, lambda, phi)
        }
        "affine" => {
            p.check_keys(&["n", "d", "y", "interval"])?;
            let n = p.usize("n", 2)?;
            let d = p.list("d")?.unwrap_or_else(|| vec![0.5; n]);
            let y = p
                .list("y")?
                .unwrap_or_else(|| (0..=n).map(|i| i as f64 / n as f64).collect());
            let interval = match p.list("interval")?.as_deref() {
                None => [0.0, 1.0],
                Some(&[a, b]) => [a, b],
                Some(_) => return Err(Params::bad("interval", "expected two numbers")),
            };
            affine(n, &d, &y, interval)
        }
        other => Err(BuiltinError::UnknownName(other.to_string())),
    }
}

/// Knot values of the three-map sinusoidal example. These are the unique
/// values meeting the endpoint conditions for its `S_i` and `q_i`.
pub const EXAMPLE61_Y: [f64; 4] = [2.0, 0.5, 0.5, 2.0];

fn example61() -> ModelConfig {
    let s_up = "0.5 + sin(2*pi*x)/4".to_string();
    let s_down = "0.5 - sin(2*pi*x)/4".to_string();
    ModelConfig {
        model: ModelSection {
            name: Some("example61".into()),
            n: 3,
            interval: Some([0.0, 1.0]),
            knots: None,
            y: EXAMPLE61_Y.to_vec(),
        },
        scaling: BTreeMap::from([
            ("s1".into(), s_up.clone()),
            ("s2".into(), s_up),
            ("s3".into(), s_down),
        ]),
        offsets: (1..=3)
            .map(|i| (format!("q{i}"), format!("cos(2*pi*(x + {})/3)", i - 1)))
            .collect(),
        tables: BTreeMap::new(),
    }
}

/// `Σ_k λ^k φ(N^k x)` at `x = p/N^m` for a 1-periodic `φ`, reducing each
/// argument exactly modulo 1 and truncating once `λ^k/(1 − λ) < 1e-15`.
pub fn weierstrass_series(phi: &ExprFunction, lambda: f64, n: u64, p: u64, m: u32) -> f64 {
    assert!((0.0..1.0).contains(&lambda.abs()), "series needs |λ| < 1");
    let modulus = (n as u128).pow(m);
    let mut num = p as u128 % modulus;
    let mut sum = 0.0;
    let mut weight: f64 = 1.0;
    while weight.abs() / (1.0 - lambda.abs()) >= SERIES_TAIL {
        sum += weight * phi.eval(num as f64 / modulus as f64);
        num = num * n as u128 % modulus;
        weight *= lambda;
    }
    sum
}

fn weierstrass(n: usize, lambda: f64, phi_src: &str) -> Result<BuiltinModel, BuiltinError> {
    if n < 2 {
        return Err(Params::bad("n", "must be at least 2"));
    }
    if !(lambda.abs() < 1.0) {
        return Err(Params::bad("lambda", "must satisfy |λ| < 1"));
    }
    let phi = ExprFunction::parse(phi_src).map_err(|e: ParseError| Params::bad("phi", e))?;
    let mut warnings = Vec::new();
    if !(lambda > 1.0 / n as f64) {
        warnings.push(format!(
            "lambda = {lambda} is not in (1/{n}, 1): the graph has box dimension 1"
        ));
    }
    let y = (0..=n)
        .map(|i| weierstrass_series(&phi, lambda, n as u64, i as u64, 1))
        .collect();
    let config = ModelConfig {
        model: ModelSection {
            name: Some(format!("weierstrass(n={n}, lambda={lambda})")),
            n,
            interval: Some([0.0, 1.0]),
            knots: None,
            y,
        },
        scaling: (1..=n).map(|i| (format!("s{i}"), format!("{lambda}"))).collect(),
        offsets: BTreeMap::from([("weierstrass".into(), phi_src.to_string())]),
        tables: BTreeMap::new(),
    };
    Ok(BuiltinModel { config, warnings })
}

fn affine(n: usize, d: &[f64], y: &[f64], interval: [f64; 2]) -> Result<BuiltinModel, BuiltinError> {
    if n < 2 {
        return Err(Params::bad("n", "must be at least 2"));
    }
    if d.len() != n {
        return Err(Params::bad("d", format!("expected {n} values, found {}", d.len())));
    }
    if y.len() != n + 1 {
        return Err(Params::bad("y", format!("expected {} values, found {}", n + 1, y.len())));
    }
    let [x0, xn] = interval;
    let len = xn - x0;
    // q_i is the affine function meeting the endpoint conditions.
    let offsets = (1..=n)
        .map(|i| {
            let a = y[i - 1] - d[i - 1] * y[0];
            let b = (y[i] - d[i - 1] * y[n] - a) / len;
            (format!("q{i}"), format!("({a}) + ({b})*(x - ({x0}))"))
        })
        .collect();
    let config = ModelConfig {
        model: ModelSection {
            name: Some(format!("affine(n={n})")),
            n,
            interval: Some(interval),
            knots: None,
            y: y.to_vec(),
        },
        scaling: (1..=n).map(|i| (format!("s{i}"), format!("({})", d[i - 1]))).collect(),
        offsets,
        tables: BTreeMap::new(),
    };
    Ok(BuiltinModel {
        config,
        warnings: Vec::new(),
    })
}
