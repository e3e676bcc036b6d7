//! Exact computation with Orlicz maximal operators on dyadic grids.
//!
//! Everything operates on nonnegative piecewise-constant functions over the
//! finest cells of a bounded dyadic box, so every integral is a finite sum
//! and every level set is a union of cells. The crate provides:
//!
//! * [`geometry`] — shifted dyadic grids, cubes, exact cell integration;
//! * [`young`] — the Young function family Φ(t) = t^r (1 + log⁺ t)^δ;
//! * [`orlicz`] — Luxemburg averages and the dyadic/full maximal operators;
//! * [`weights`] — Muckenhoupt A₁/A_p/A∞ constants and the b_k scale;
//! * [`decomp`] — Calderón–Zygmund and Ω_k decompositions, principal cubes;
//! * [`harness`] — end-to-end audits of the mixed weak-type inequality;
//! * [`instances`] — seeded generators for certified weight instances.

// Per-axis coordinate arithmetic reads best with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod decomp;
pub mod geometry;
pub mod harness;
pub mod instances;
pub mod io;
pub mod ksum;
pub mod orlicz;
pub mod weights;
pub mod young;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported dimension {0} (supported: 1, 2, 3)")]
    UnsupportedDimension(u8),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("non-finite or negative value at cell {index}: {value}")]
    BadCellValue { index: usize, value: f64 },
    #[error("weight vanishes at cell {0}")]
    ZeroCell(usize),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("cube is finer than the grid cells")]
    CubeTooFine,
    #[error("empty or inverted generation range")]
    EmptyGenRange,
    #[error("instance generator exhausted {attempts} attempts without meeting the caps")]
    GeneratorExhausted { attempts: u32 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
