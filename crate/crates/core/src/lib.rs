//! Generalized affine fractal interpolation functions with variable
//! vertical scaling, and estimates of the box dimension of their graphs.

pub mod funcs;
pub mod matrices;
pub mod dimension;
pub mod engine;
pub mod model;
pub mod oscillation;
