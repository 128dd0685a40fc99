//! Specification instances: two orbit pieces separated by a gap of at
//! least `K`, to be traced by one orbit with `τ = id`.

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use super::search::{
    grid_seeds, shell_point, trace_offsets, Counters, Problem, SearchBudget, SearchEffort, ShadowReport, Verdict,
};
use crate::error::{GeoError, Result};
use crate::flow::{to_state, FlowSettings, MidpointStepper};
use crate::metric::MetricField;
use crate::state::UnitCotangentState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecificationInstance {
    pub intervals: [(f64, f64); 2],
    pub gap: f64,
    pub base_points: [UnitCotangentState; 2],
}

impl SpecificationInstance {
    /// Requires exactly two intervals `[a₁, b₁]`, `[a₂, b₂]` with `a₂ ≥ b₁ + K`.
    pub fn new(intervals: &[(f64, f64)], gap: f64, base_points: &[UnitCotangentState]) -> Result<Self> {
        if intervals.len() != 2 || base_points.len() != 2 {
            return Err(GeoError::InvalidInput(format!(
                "need exactly two intervals and two base points, got {} and {}",
                intervals.len(),
                base_points.len()
            )));
        }
        if !(gap >= 0.0) {
            return Err(GeoError::InvalidInput("gap K must be nonnegative".into()));
        }
        let [(a1, b1), (a2, b2)] = [intervals[0], intervals[1]];
        if !(a1 <= b1 && a2 <= b2) {
            return Err(GeoError::InvalidInput("intervals must satisfy a ≤ b".into()));
        }
        if !(a2 >= b1 + gap) {
            return Err(GeoError::InvalidInput(format!("a₂ = {a2} is closer than K = {gap} to b₁ = {b1}")));
        }
        Ok(Self {
            intervals: [intervals[0], intervals[1]],
            gap,
            base_points: [base_points[0], base_points[1]],
        })
    }

    /// `P(t) = φ^{t - aᵢ}(baseᵢ)` at `step`-spaced times of both intervals.
    fn targets(
        &self,
        metric: &MetricField,
        step: f64,
        settings: &FlowSettings,
    ) -> Result<(Vec<f64>, Vec<Vector4<f64>>)> {
        let mut times = Vec::new();
        let mut targets = Vec::new();
        for ((a, b), base) in self.intervals.iter().zip(&self.base_points) {
            let n = ((b - a) / step).ceil().max(1.0) as usize;
            let offs: Vec<f64> = (0..=n).map(|k| (b - a) * k as f64 / n as f64).collect();
            let (zs, _) = trace_offsets(metric, settings, &base.to_vec4(), &offs, false)?;
            times.extend(offs.iter().map(|s| a + s));
            targets.extend(zs);
        }
        Ok((times, targets))
    }
}

/// Searches for one orbit within ε of both pieces with `τ = id`.
pub fn specification_shadow_search(
    metric: &MetricField,
    spec: &SpecificationInstance,
    epsilon: f64,
    budget: &SearchBudget,
    settings: &FlowSettings,
) -> Result<ShadowReport> {
    budget.validate()?;
    if !(epsilon > 0.0) {
        return Err(GeoError::InvalidInput("ε must be positive".into()));
    }
    let shortest = spec.intervals.iter().map(|(a, b)| b - a).fold(1.0, f64::min);
    let step = shortest.max(1e-3) / 20.0;
    let build = |step: f64| -> Result<Problem<'_>> {
        let (times, targets) = spec.targets(metric, step, settings)?;
        Ok(Problem {
            metric,
            settings: *settings,
            times,
            targets,
            knots: Vec::new(),
            zero: 0,
            rep_eps: budget.rep_eps,
        })
    };
    let problem = build(step)?;
    let horizon = spec.intervals[1].1.abs().max(spec.intervals[0].0.abs());
    let mut effort = SearchEffort {
        samples: problem.times.len(),
        sample_step: step,
        grid: budget.grid,
        ..SearchEffort::default()
    };
    let mut counters = Counters {
        evaluations: 0,
        lm_iterations: 0,
        max_evaluations: budget.max_evaluations,
    };
    let stepper = MidpointStepper::new(metric, *settings);
    let mut seeds = Vec::new();
    for ((a, _), base) in spec.intervals.iter().zip(&spec.base_points) {
        seeds.push(stepper.flow_raw(&base.to_vec4(), -a)?);
    }
    let mut best_sup = f64::INFINITY;
    let mut exhausted = false;
    let mut refine_failed = false;
    let mut try_seed = |z: &Vector4<f64>, counters: &mut Counters, effort: &mut SearchEffort, best_sup: &mut f64| {
        effort.seeds_optimized += 1;
        let Some(fit) = problem.optimize(z, budget, 0.5 * epsilon, counters)? else {
            return Ok::<_, GeoError>(None);
        };
        *best_sup = best_sup.min(fit.sup);
        if !(fit.sup < epsilon) {
            return Ok(None);
        }
        let replay = problem.sup_at(&fit)?;
        let refined = build(step / 4.0)?.sup_at(&fit)?;
        if (replay - fit.sup).abs() > 1e-9 || !(refined < epsilon) {
            refine_failed = true;
            return Ok(None);
        }
        effort.evaluations = counters.evaluations;
        effort.lm_iterations = counters.lm_iterations;
        Ok(Some(ShadowReport {
            verdict: Verdict::Found,
            shadow_point: Some(to_state(metric, &shell_point(metric, &fit.q))?),
            reparam: None,
            achieved_sup: fit.sup,
            epsilon,
            horizon,
            replay_sup: Some(replay),
            refined_sup: Some(refined),
            effort: effort.clone(),
            note: None,
        }))
    };
    for z in &seeds {
        if let Some(r) = try_seed(z, &mut counters, &mut effort, &mut best_sup)? {
            return Ok(r);
        }
    }
    let mut grid_complete = false;
    if let Some(grid) = budget.grid {
        let mut scored = Vec::new();
        for z in grid_seeds(metric, &grid) {
            match problem.screen(&z, &mut counters) {
                Ok(Some(s)) => {
                    effort.seeds_screened += 1;
                    best_sup = best_sup.min(s);
                    scored.push((s, z));
                }
                Ok(None) => {
                    exhausted = true;
                    break;
                }
                Err(GeoError::Integration { .. }) => effort.seeds_screened += 1,
                Err(e) => return Err(e),
            }
        }
        if !exhausted {
            scored.sort_by(|a, b| a.0.total_cmp(&b.0));
            let room = budget.max_seeds.saturating_sub(effort.seeds_optimized);
            for (_, z) in scored.iter().take(budget.optimize_top.min(room)) {
                if let Some(r) = try_seed(z, &mut counters, &mut effort, &mut best_sup)? {
                    return Ok(r);
                }
                if counters.evaluations >= counters.max_evaluations {
                    exhausted = true;
                    break;
                }
            }
            grid_complete = !exhausted;
        }
    } else if counters.evaluations >= counters.max_evaluations {
        exhausted = true;
    }
    effort.evaluations = counters.evaluations;
    effort.lm_iterations = counters.lm_iterations;
    let (verdict, note) = if grid_complete && !refine_failed {
        (Verdict::NotFound, None)
    } else if exhausted {
        (Verdict::Inconclusive, Some("search budget exhausted".to_string()))
    } else if refine_failed {
        (Verdict::Inconclusive, Some("a candidate below ε did not survive refined sampling".to_string()))
    } else {
        (Verdict::Inconclusive, Some("no seed grid declared; negative result not certified".to_string()))
    };
    Ok(ShadowReport {
        verdict,
        shadow_point: None,
        reparam: None,
        achieved_sup: best_sup,
        epsilon,
        horizon,
        replay_sup: None,
        refined_sup: None,
        effort,
        note,
    })
}
