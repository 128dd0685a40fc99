//! Numerical laboratory for Hamiltonian geodesic flows on surfaces.
//!
//! - [`metric`]: charts, inverse-metric fields, conformal bumps
//! - [`flow`]: implicit-midpoint flow and monodromy
//! - [`poincare`]: sections, return maps, closed orbits, Floquet classification
//! - [`shadowing`]: pseudo-geodesics and shadowing testers
//! - [`twist`]: area-preserving twist maps and non-shadowability certificates

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod error;
pub mod flow;
pub mod metric;
pub mod poincare;
pub mod shadowing;
pub mod state;
pub mod twist;

pub use chart::{Interval, SurfaceChart};
pub use error::{GeoError, Result};
pub use flow::{flow, flow_with_monodromy, renormalize_energy, FlowSettings, MonodromyRecord};
pub use metric::{ConformalBump, MetricField, MetricSpec, RevolutionProfile};
pub use state::{phase_distance, CotangentState, UnitCotangentState};
