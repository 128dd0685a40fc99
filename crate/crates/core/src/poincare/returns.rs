//! First-return maps, return times and their linearization.

use nalgebra::{Matrix2, Matrix4, Vector4};

use super::section::{frame_at, functional, SectionSpec, TransversalSection, GRAZING_FLUX};
use crate::error::{GeoError, Result};
use crate::flow::{to_state, FlowSettings, MidpointStepper};
use crate::metric::MetricField;
use crate::state::UnitCotangentState;

/// Crossings earlier than this fraction of the target time are ignored.
pub const MIN_RETURN_FRACTION: f64 = 0.1;
/// Scan budget as a multiple of the target time.
pub const RETURN_BUDGET_FACTOR: f64 = 3.0;
/// Target accuracy of the section functional after refinement.
pub const CROSSING_TOL: f64 = 1e-12;

/// A refined crossing: the state is exactly the uniform-step flow of `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub time: f64,
    pub z: Vector4<f64>,
    pub functional: f64,
}

/// Approximate times of oriented crossings in `(t_min, budget]` by a
/// fixed-step scan, up to `max_count` of them.
pub fn scan_crossings(
    metric: &MetricField,
    spec: &SectionSpec,
    z0: &Vector4<f64>,
    settings: &FlowSettings,
    t_min: f64,
    budget: f64,
    max_count: usize,
) -> Result<Vec<f64>> {
    let stepper = MidpointStepper::new(metric, *settings);
    let h = settings.step;
    let half = metric.chart().period(spec.coordinate).map_or(f64::INFINITY, |l| 0.5 * l);
    let o = f64::from(spec.orientation);
    let mut out = Vec::new();
    let mut z = *z0;
    let mut la = functional(metric, spec, &z);
    let mut t = 0.0;
    let mut k = 0usize;
    while t < budget && out.len() < max_count {
        let zn = stepper.step(&z, h).map_err(|e| relocate(e, k, t))?;
        let lb = functional(metric, spec, &zn);
        if t + h >= t_min && o * la < 0.0 && o * lb >= 0.0 && (lb - la).abs() < half {
            out.push(t + h * la / (la - lb));
        }
        z = zn;
        la = lb;
        t += h;
        k += 1;
    }
    Ok(out)
}

fn relocate(e: GeoError, step: usize, time: f64) -> GeoError {
    match e {
        GeoError::Integration {
            update, iterations, ..
        } => GeoError::Integration {
            step,
            time,
            update,
            iterations,
        },
        other => other,
    }
}

/// Newton refinement of a crossing time with the number of uniform substeps
/// held fixed; the substep count is re-derived if the time moves across a
/// step boundary.
pub fn refine_crossing(
    metric: &MetricField,
    spec: &SectionSpec,
    z0: &Vector4<f64>,
    settings: &FlowSettings,
    guess: f64,
) -> Result<Crossing> {
    let stepper = MidpointStepper::new(metric, *settings);
    let k = spec.coordinate;
    let mut s = guess;
    let mut best: Option<Crossing> = None;
    for _ in 0..4 {
        let n = settings.steps_for(s).max(1);
        for _ in 0..16 {
            let z = stepper.advance(z0, s / n as f64, n)?;
            let l = functional(metric, spec, &z);
            let flux = metric.field(&z)[k];
            if flux.abs() < GRAZING_FLUX {
                return Err(GeoError::Transversality { flux });
            }
            let c = Crossing {
                time: s,
                z,
                functional: l,
            };
            if best.is_none_or(|b| l.abs() < b.functional.abs()) {
                best = Some(c);
            }
            if l.abs() <= CROSSING_TOL {
                break;
            }
            s -= l / flux;
            if !(s > 0.0) {
                return Err(GeoError::NoReturn { budget: guess });
            }
        }
        let b = best.expect("at least one evaluation");
        if settings.steps_for(b.time).max(1) == n && b.functional.abs() <= CROSSING_TOL {
            return Ok(b);
        }
        s = b.time;
        best = None;
    }
    let b = best.ok_or(GeoError::NoReturn { budget: guess })?;
    if b.functional.abs() > 1e-10 {
        return Err(GeoError::NoReturn { budget: guess });
    }
    Ok(b)
}

/// The `nth` oriented crossing after `t_min`, refined.
pub fn nth_crossing(
    metric: &MetricField,
    spec: &SectionSpec,
    z0: &Vector4<f64>,
    settings: &FlowSettings,
    t_min: f64,
    budget: f64,
    nth: usize,
) -> Result<Crossing> {
    let times = scan_crossings(metric, spec, z0, settings, t_min, budget, nth)?;
    if times.len() < nth {
        return Err(GeoError::NoReturn { budget });
    }
    refine_crossing(metric, spec, z0, settings, times[nth - 1])
}

/// First return to `section` after `0.1·t_target`, searched up to `3·t_target`.
/// Returns the state on the section and the return time `Θ`.
pub fn return_map(
    metric: &MetricField,
    section: &TransversalSection,
    state: &UnitCotangentState,
    t_target: f64,
    settings: &FlowSettings,
) -> Result<(UnitCotangentState, f64)> {
    settings.validate()?;
    if !(t_target.is_finite() && t_target > 0.0) {
        return Err(GeoError::InvalidInput(format!("target time must be > 0, got {t_target}")));
    }
    let c = nth_crossing(
        metric,
        &section.spec,
        &state.to_vec4(),
        settings,
        MIN_RETURN_FRACTION * t_target,
        RETURN_BUDGET_FACTOR * t_target,
        1,
    )?;
    Ok((to_state(metric, &c.z)?, c.time))
}

/// Compresses a flow derivative `m` from `z0` (on the section) to `z1`
/// (on the section) into the 2×2 map between in-section coordinates,
/// projecting out the flow direction at `z1`.
pub fn compress_monodromy(
    metric: &MetricField,
    spec: &SectionSpec,
    z0: &Vector4<f64>,
    z1: &Vector4<f64>,
    m: &Matrix4<f64>,
) -> Result<Matrix2<f64>> {
    let frame = frame_at(metric, spec, z0)?;
    let k = spec.coordinate;
    let j = spec.free();
    let f1 = metric.field(z1);
    if f1[k].abs() < GRAZING_FLUX {
        return Err(GeoError::Transversality { flux: f1[k] });
    }
    let mut dp = Matrix2::zeros();
    for (c, e) in frame.iter().enumerate() {
        let w = m * e;
        let w = w - f1 * (w[k] / f1[k]);
        dp[(0, c)] = w[j];
        dp[(1, c)] = w[2 + j];
    }
    Ok(dp)
}

/// Return time, state and 2×2 linear Poincaré map for a point on the section.
pub fn linear_return(
    metric: &MetricField,
    section: &TransversalSection,
    state: &UnitCotangentState,
    t_target: f64,
    settings: &FlowSettings,
) -> Result<(UnitCotangentState, f64, Matrix2<f64>)> {
    let (end, theta) = return_map(metric, section, state, t_target, settings)?;
    let z0 = state.to_vec4();
    let (z1, m) = MidpointStepper::new(metric, *settings).flow_raw_with_matrix(&z0, theta)?;
    let dp = compress_monodromy(metric, &section.spec, &z0, &z1, &m)?;
    Ok((end, theta, dp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::renormalize_energy;
    use crate::state::CotangentState;
    use nalgebra::Vector2;
    use std::f64::consts::TAU;

    fn unit(m: &MetricField, x: [f64; 2], p: [f64; 2]) -> UnitCotangentState {
        renormalize_energy(m, &CotangentState::new(x, Vector2::new(p[0], p[1]))).unwrap()
    }

    #[test]
    fn flat_return_is_circumference() {
        let m = MetricField::standard_flat_torus();
        let s = unit(&m, [0.0, 1.0], [1.0, 0.0]);
        let sec = TransversalSection::through(&m, &s, 0).unwrap();
        let (end, theta) = return_map(&m, &sec, &s, 6.0, &FlowSettings::default()).unwrap();
        assert!((theta - TAU).abs() < 1e-10);
        assert!((end.x()[1] - 1.0).abs() < 1e-12);
        assert!((end.p() - s.p()).norm() < 1e-14);
    }

    #[test]
    fn returns_compose() {
        let m = MetricField::torus_of_revolution(2.0, 1.0).unwrap();
        // composition holds up to the O(h²) resampling error of uniform substeps
        let settings = FlowSettings::with_step(0.001);
        let s = unit(&m, [0.0, 0.7], [2.0, 0.5]);
        let sec = TransversalSection::through(&m, &s, 0).unwrap();
        let (a, t1) = return_map(&m, &sec, &s, 20.0, &settings).unwrap();
        let (_, t2) = return_map(&m, &sec, &a, 20.0, &settings).unwrap();
        let c = nth_crossing(&m, &sec.spec, &s.to_vec4(), &settings, 2.0, 100.0, 2).unwrap();
        assert!((c.time - (t1 + t2)).abs() < 1e-9, "{} vs {}", c.time, t1 + t2);
    }

    #[test]
    fn no_return_reported() {
        let m = MetricField::standard_flat_torus();
        let s = unit(&m, [0.0, 1.0], [1.0, 0.0]);
        let sec = TransversalSection::through(&m, &s, 0).unwrap();
        assert!(matches!(
            return_map(&m, &sec, &s, 1.0, &FlowSettings::default()),
            Err(GeoError::NoReturn { .. })
        ));
    }

    #[test]
    fn flat_linear_return_is_shear() {
        let m = MetricField::standard_flat_torus();
        let s = unit(&m, [0.0, 1.0], [1.0, 0.0]);
        let sec = TransversalSection::through(&m, &s, 0).unwrap();
        let (_, _, dp) = linear_return(&m, &sec, &s, 6.0, &FlowSettings::default()).unwrap();
        let ex = Matrix2::new(1.0, TAU, 0.0, 1.0);
        assert!((dp - ex).amax() < 1e-9, "{dp}");
    }
}
