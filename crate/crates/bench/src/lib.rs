//! Benchmarks live in `benches/`; this crate only exists to host them.

use fifdim_core::model::{builtin_model, validate_model, FifModel};

/// A validated builtin model with default parameters.
pub fn builtin(name: &str) -> FifModel {
    let config = builtin_model(name, &Default::default())
        .expect("builtin exists")
        .config;
    validate_model(&config).expect("builtins validate")
}
