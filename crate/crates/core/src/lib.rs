//! Exact and sampled computations on measure-preserving systems: systems
//! and their invariant measures, joinings, spectral invariants, the rank-one
//! family `T_a`, and reproducible experiments over them.

pub mod affine;
pub mod arith;
pub mod cocycle;
pub mod doc;
pub mod error;
pub mod experiments;
pub mod joinings;
pub mod measure;
pub mod rank1;
pub mod seed;
pub mod spectral;
pub mod system;

pub use error::{Error, Result};
pub use measure::{MeasureHandle, MonteCarlo};
pub use system::{build_system, Freq, Observable, Point, System, SystemSpec};
