//! Sections, return maps, closed orbits and their Floquet data.

pub mod classify;
pub mod hyperbolic;
pub mod orbit;
pub mod perturb;
pub mod returns;
pub mod section;

use serde::{Deserialize, Serialize};

pub use classify::{classify_orbit, classify_trace, ClassifyOptions, OrbitClassification, OrbitKind};
pub use hyperbolic::{certify_hyperbolic_set, local_manifold_seeds, HyperbolicityCertificate};
pub use orbit::{
    find_periodic_orbit, find_periodic_orbit_with, transversal_linear_poincare,
    transversal_linear_poincare_at, ClosedOrbit, OrbitSearchOptions,
};
pub use perturb::{trace_map, trace_perturbation_sweep, SweepEntry, TraceSweep};
pub use returns::{linear_return, return_map};
pub use section::{SectionSpec, TransversalSection};

use crate::error::Result;
use crate::metric::MetricField;

/// Per-orbit JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub period: f64,
    pub residual: f64,
    pub trace: f64,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation_number: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<f64>,
    pub section: SectionSpec,
    pub start: [f64; 4],
    pub period_flagged: bool,
}

impl OrbitReport {
    pub fn new(orbit: &ClosedOrbit, class: &OrbitClassification) -> Self {
        let z = orbit.start.to_vec4();
        Self {
            period: orbit.period,
            residual: orbit.residual,
            trace: class.trace,
            kind: class.kind.name().to_string(),
            rotation_number: class.kind.rotation_number(),
            multiplier: class.kind.multiplier(),
            section: orbit.section,
            start: [z[0], z[1], z[2], z[3]],
            period_flagged: orbit.period_flagged,
        }
    }
}

/// Linear Poincaré map, classification and report for one orbit.
pub fn analyze_orbit(
    metric: &MetricField,
    orbit: &ClosedOrbit,
    opts: &ClassifyOptions,
) -> Result<(nalgebra::Matrix2<f64>, OrbitClassification, OrbitReport)> {
    let dp = transversal_linear_poincare(metric, orbit)?;
    let class = classify_orbit(&dp, opts)?;
    let report = OrbitReport::new(orbit, &class);
    Ok((dp, class, report))
}
