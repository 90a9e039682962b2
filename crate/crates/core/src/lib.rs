//! Asymptotic regularity at infinity for real polynomial maps `f: R^n -> R^p`.
//!
//! The crate computes the pointwise regularity functions (Rabier, Kuo, Gaffney),
//! the indicators that control asymptotic critical values, the chart calculus at
//! infinity, Milnor-set residuals, and the sampling procedures that estimate the
//! sets `K_inf(f)` and `S(f)` of values where the fibration may break down.
//!
//! Everything here is `no_std` + `alloc`. File formats, reports and the CLI live
//! in the `atypical` companion crate.

#![no_std]

extern crate alloc;

pub mod chart;
pub mod curve;

pub mod dd;
pub mod error;
pub mod eval;
pub mod fiber;

pub mod infinity;
pub mod linalg;
pub mod optimize;
pub mod poly;
pub mod polymap;
pub mod regfuncs;
pub mod residuals;
pub mod sampling;
pub mod scanner;

pub use chart::ChartMap;
pub use error::{Error, Result};
pub use infinity::{MilnorResidualEval, PointAtInfinity, RhoSpec};
pub use poly::{Degree, Polynomial};
pub use polymap::{ComplexPolyMap, GaussRational, JacobianEval, PolyMap};
pub use regfuncs::{Extended, RegularityPanel};
pub use scanner::{ClusterKind, Fanout, ScanConfig, Sequential, ValueCluster};
