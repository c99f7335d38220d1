//! Operator models for self-affine fractals: affine iterated function
//! systems, their invariant measures, the Cuntz isometries they induce on
//! cylinder spaces, and word-expansion approximation of multiplication
//! operators.

pub mod approx;
pub mod cli;
pub mod export;
pub mod expr;
pub mod ifs;
pub mod measure;
pub mod opspace;
pub mod word_algebra;
