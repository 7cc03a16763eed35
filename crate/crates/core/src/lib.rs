//! Executable finite models of the axiomatic theory of continuum thermodynamics.
//!
//! Space is a finite voxel grid, bodies are closed unions of cells, and every
//! part of a body is a finite set of cells and faces. Energy, entropy, heat flux
//! and entropy flux are finite signed measures on that algebra, sampled at a
//! finite set of instants. On top of that the crate provides:
//!
//! * [`axioms`]: one executable check per axiom, with numeric witnesses;
//! * [`refmodels`]: an explicit heat-conduction generator whose output satisfies
//!   every axiom, plus targeted mutants that each break exactly one;
//! * [`padoa`] and [`timeless`]: extraction of time (and space) from the other
//!   primitives, a bounded search for Padoa witness pairs, and the timeless
//!   reformulation of the structure;
//! * [`format`] and [`report`]: the model file format and check reports.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the command line uses.

pub mod axioms;
pub mod enumerate;
pub mod format;
pub mod geometry;
pub mod measure;
pub mod padoa;
pub mod refmodels;
pub mod report;
pub mod scalar;
pub mod structure;
pub mod timeless;

pub use axioms::{check_all, check_axiom, AxiomId, CheckConfig, CheckReport, CheckResult, Tolerance, Verdict};
pub use enumerate::EnumConfig;
pub use geometry::{Atom, Axis, CellId, Face, Grid, Orientation, Part, Region, Surface};
pub use measure::GridMeasure;
pub use refmodels::{generate_heat_grid, mutate, HeatParams, MutationTarget};
pub use scalar::Scalar;
pub use structure::{FluxFamily, FluxField, ThermoModel, TimeGrid};

/// Model over `f64`.
pub type Model = ThermoModel<f64>;
/// Grid over `f64`.
pub type Grid64 = Grid<f64>;
/// Measure over `f64`.
pub type Measure = GridMeasure<f64>;
/// Time grid over `f64`.
pub type Times = TimeGrid<f64>;
/// Generator parameters over `f64`.
pub type Params = HeatParams<f64>;
