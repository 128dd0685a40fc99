//! Weak shadowing: every chain vertex lies within ε of one true orbit,
//! with no control on timing.

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use super::chain::PseudoGeodesic;
use super::search::{grid_seeds, shadow_search, trace_offsets, SearchBudget, SeedGrid, Verdict};
use crate::error::{GeoError, Result};
use crate::flow::{FlowSettings, MidpointStepper};
use crate::metric::MetricField;
use crate::state::{phase_distance4, UnitCotangentState};

const GOLDEN_ITERS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexDistance {
    pub index: i64,
    pub distance: f64,
    /// Orbit time of the closest approach.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakShadowCheck {
    pub holds: bool,
    pub epsilon: f64,
    pub horizon: f64,
    pub vertices: Vec<VertexDistance>,
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakShadowReport {
    pub verdict: Verdict,
    pub candidate: Option<UnitCotangentState>,
    pub check: Option<WeakShadowCheck>,
    /// Smallest worst-vertex distance over all candidates.
    pub best_worst: f64,
    pub candidates_tried: usize,
    pub grid: Option<SeedGrid>,
    pub note: Option<String>,
}

/// Orbit time span needed to reach every window vertex from any vertex.
pub fn weak_horizon(chain: &PseudoGeodesic) -> f64 {
    let b = chain.breakpoints();
    let span = b[b.len() - 1] - b[0];
    let tmax = chain.times.iter().copied().fold(0.0, f64::max);
    span + tmax
}

/// Closest approach of the orbit of `candidate` over `[-horizon, horizon]`
/// to each window vertex.
pub fn weak_shadow_check(
    metric: &MetricField,
    chain: &PseudoGeodesic,
    epsilon: f64,
    candidate: &UnitCotangentState,
    horizon: f64,
    settings: &FlowSettings,
) -> Result<WeakShadowCheck> {
    if !(epsilon > 0.0 && horizon > 0.0) {
        return Err(GeoError::InvalidInput("ε and horizon must be positive".into()));
    }
    let step = chain.t_min.min(1.0) / 20.0;
    let n = (2.0 * horizon / step).ceil() as usize;
    let offs: Vec<f64> = (0..=n).map(|k| -horizon + 2.0 * horizon * k as f64 / n as f64).collect();
    let (zs, _) = trace_offsets(metric, settings, &candidate.to_vec4(), &offs, false)?;
    let stepper = MidpointStepper::new(metric, *settings);
    let chart = metric.chart();
    let mut vertices = Vec::with_capacity(chain.len());
    for (k, s) in chain.states.iter().enumerate() {
        let target = s.to_vec4();
        let d: Vec<f64> = zs.iter().map(|z| phase_distance4(chart, z, &target)).collect();
        let j = (0..d.len()).min_by(|&a, &b| d[a].total_cmp(&d[b])).expect("samples");
        let lo = j.saturating_sub(1);
        let hi = (j + 1).min(n);
        let (best_t, best_d) = golden_min(
            |s| {
                let z: Vector4<f64> = stepper.flow_raw(&zs[lo], s)?;
                Ok(phase_distance4(chart, &z, &target))
            },
            0.0,
            offs[hi] - offs[lo],
        )?;
        let (time, distance) = if best_d < d[j] {
            (offs[lo] + best_t, best_d)
        } else {
            (offs[j], d[j])
        };
        vertices.push(VertexDistance {
            index: chain.first_index + k as i64,
            distance,
            time,
        });
    }
    let worst = vertices.iter().map(|v| v.distance).fold(0.0, f64::max);
    Ok(WeakShadowCheck {
        holds: worst < epsilon,
        epsilon,
        horizon,
        vertices,
        worst,
    })
}

fn golden_min<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..GOLDEN_ITERS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Tries chain vertices, the strong-search optimum and grid seeds as
/// candidates for [`weak_shadow_check`].
pub fn weak_shadow_search(
    metric: &MetricField,
    chain: &PseudoGeodesic,
    epsilon: f64,
    budget: &SearchBudget,
    settings: &FlowSettings,
) -> Result<WeakShadowReport> {
    budget.validate()?;
    let horizon = weak_horizon(chain);
    let mut tried = 0usize;
    let mut best_worst = f64::INFINITY;
    let mut attempt = |cand: &UnitCotangentState, tried: &mut usize| -> Result<Option<WeakShadowCheck>> {
        *tried += 1;
        match weak_shadow_check(metric, chain, epsilon, cand, horizon, settings) {
            Ok(c) => {
                best_worst = best_worst.min(c.worst);
                Ok(c.holds.then_some(c))
            }
            Err(GeoError::Integration { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let found = |cand: UnitCotangentState, check: WeakShadowCheck, tried: usize, best: f64| WeakShadowReport {
        verdict: Verdict::Found,
        candidate: Some(cand),
        best_worst: best,
        check: Some(check),
        candidates_tried: tried,
        grid: budget.grid,
        note: None,
    };
    for s in &chain.states {
        if let Some(c) = attempt(s, &mut tried)? {
            let w = c.worst;
            return Ok(found(*s, c, tried, w));
        }
    }
    let strong = SearchBudget { grid: None, ..*budget };
    let half = 0.5 * (horizon - chain.times.iter().copied().fold(0.0, f64::max));
    let r = shadow_search(metric, chain, epsilon, half.max(chain.t_min), &strong, settings)?;
    if let Some(p) = r.shadow_point {
        if let Some(c) = attempt(&p, &mut tried)? {
            let w = c.worst;
            return Ok(found(p, c, tried, w));
        }
    }
    let Some(grid) = budget.grid else {
        return Ok(WeakShadowReport {
            verdict: Verdict::Inconclusive,
            candidate: None,
            check: None,
            best_worst,
            candidates_tried: tried,
            grid: None,
            note: Some("no seed grid declared; negative result not certified".into()),
        });
    };
    for z in grid_seeds(metric, &grid) {
        let cand = crate::flow::to_state(metric, &z)?;
        if let Some(c) = attempt(&cand, &mut tried)? {
            let w = c.worst;
            return Ok(found(cand, c, tried, w));
        }
    }
    Ok(WeakShadowReport {
        verdict: Verdict::NotFound,
        candidate: None,
        check: None,
        best_worst,
        candidates_tried: tried,
        grid: Some(grid),
        note: None,
    })
}
