use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use fifdim_core::dimension::{AnalysisError, AssemblyError, BoxCountError};
use fifdim_core::engine::EngineError;
use fifdim_core::matrices::MatrixError;
use fifdim_core::model::{builtin_model, validate_model, FifModel, ModelConfig};
use fifdim_core::oscillation::OscillationError;

use crate::{ModelArgs, Output};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Validation(String),
    Capacity(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Validation(m) | CliError::Capacity(m) | CliError::Internal(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::Capacity(e.to_string())
    }
}

impl From<MatrixError> for CliError {
    fn from(e: MatrixError) -> Self {
        match e {
            MatrixError::Capacity { .. } => CliError::Capacity(e.to_string()),
            MatrixError::Monotonicity { .. } => CliError::Internal(e.to_string()),
        }
    }
}

impl From<OscillationError> for CliError {
    fn from(e: OscillationError) -> Self {
        match e {
            OscillationError::Engine(e) => e.into(),
            OscillationError::Matrix(e) => e.into(),
        }
    }
}

impl From<BoxCountError> for CliError {
    fn from(e: BoxCountError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<AssemblyError> for CliError {
    fn from(e: AssemblyError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Engine(e) => e.into(),
            AnalysisError::Matrix(e) => e.into(),
            AnalysisError::BoxCount(e) => e.into(),
            AnalysisError::Assembly(e) => e.into(),
        }
    }
}

pub struct Loaded {
    pub model: FifModel,
    pub config: ModelConfig,
}

/// Read a model file or a `builtin:NAME` reference and validate it.
pub fn load_model(args: &ModelArgs) -> Result<Loaded, CliError> {
    let config = if let Some(name) = args.model.strip_prefix("builtin:") {
        let mut params = BTreeMap::new();
        for p in &args.params {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--param expects KEY=VALUE, got `{p}`")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let b = builtin_model(name, &params).map_err(|e| CliError::Validation(e.to_string()))?;
        for w in &b.warnings {
            eprintln!("warning: {w}");
        }
        b.config
    } else {
        if !args.params.is_empty() {
            return Err(CliError::Usage("--param only applies to builtin models".into()));
        }
        ModelConfig::from_path(Path::new(&args.model)).map_err(|e| CliError::Validation(e.to_string()))?
    };
    let model = validate_model(&config).map_err(|violations| {
        let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        CliError::Validation(format!("invalid model:\n{}", lines.join("\n")))
    })?;
    Ok(Loaded { model, config })
}

/// SHA-256 of the canonical TOML form of the model.
pub fn model_hash(config: &ModelConfig) -> String {
    let text = config.to_toml().unwrap_or_default();
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

#[derive(Serialize)]
pub struct RunReport<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub model: String,
    pub model_hash: String,
    pub parameters: BTreeMap<&'static str, String>,
    pub output: T,
}

impl<T: Serialize> RunReport<T> {
    pub fn new(command: &'static str, loaded: &Loaded, parameters: BTreeMap<&'static str, String>, output: T) -> Self {
        Self {
            tool: "fifdim",
            version: env!("CARGO_PKG_VERSION"),
            command,
            model: loaded.model.name().to_string(),
            model_hash: model_hash(&loaded.config),
            parameters,
            output,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Send text to `--out` or stdout.
pub fn emit(output: &Output, text: &str) -> Result<(), CliError> {
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Wall-clock timing of one stage, reported on stderr so outputs stay
/// byte-identical between runs.
pub fn timed<T>(stage: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let v = f();
    eprintln!("[time] {stage}: {:.3} s", start.elapsed().as_secs_f64());
    v
}
