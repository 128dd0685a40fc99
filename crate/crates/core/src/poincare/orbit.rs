//! Closed geodesics by Newton shooting on a coordinate section.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::returns::{compress_monodromy, nth_crossing, scan_crossings};
use super::section::{SectionSpec, TransversalSection};
use crate::error::{GeoError, Result};
use crate::flow::{flow, to_state, FlowSettings, MidpointStepper};
use crate::metric::MetricField;
use crate::state::{phase_distance, UnitCotangentState};

/// Closing tolerance `d(φ^ℓ(start), start)` for a closed orbit.
pub const CLOSURE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSearchOptions {
    pub max_iters: usize,
    /// Target norm of `P^m(y) - y` in section coordinates.
    pub newton_tol: f64,
    /// Relative period deviation from the guess that gets flagged.
    pub period_flag: f64,
    pub samples: usize,
}

impl Default for OrbitSearchOptions {
    fn default() -> Self {
        Self {
            max_iters: 40,
            newton_tol: 1e-11,
            period_flag: 0.1,
            samples: 200,
        }
    }
}

/// A numerically closed geodesic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedOrbit {
    pub start: UnitCotangentState,
    pub period: f64,
    pub residual: f64,
    pub section: SectionSpec,
    /// Number of section crossings in one period.
    pub crossings: usize,
    pub period_flagged: bool,
    pub settings: FlowSettings,
    pub samples: Vec<UnitCotangentState>,
    pub newton_residuals: Vec<f64>,
}

impl ClosedOrbit {
    /// Number of uniform substeps covering one period.
    pub fn steps(&self) -> usize {
        self.settings.steps_for(self.period).max(1)
    }

    /// Minimum phase distance from `z` to the sampled orbit.
    pub fn distance_to(&self, metric: &MetricField, z: &UnitCotangentState) -> f64 {
        self.samples
            .iter()
            .map(|s| phase_distance(metric.chart(), s.state(), z.state()))
            .fold(f64::INFINITY, f64::min)
    }
}

struct Shot {
    start: UnitCotangentState,
    period: f64,
    g: Vector2<f64>,
}

fn shoot(
    metric: &MetricField,
    section: &TransversalSection,
    y: &Vector2<f64>,
    m: usize,
    guess: f64,
    settings: &FlowSettings,
) -> Result<Shot> {
    let start = section.point(metric, y)?;
    let c = nth_crossing(
        metric,
        &section.spec,
        &start.to_vec4(),
        settings,
        0.0,
        1.5 * guess.max(1e-9) + 10.0 * settings.step,
        m,
    )?;
    let g = section.coord_delta(metric, y, &section.coords(&c.z));
    Ok(Shot {
        start,
        period: c.time,
        g,
    })
}

/// 2×2 linear Poincaré map of the `period` flow from a point on the section.
fn section_derivative(
    metric: &MetricField,
    spec: &SectionSpec,
    start: &UnitCotangentState,
    period: f64,
    settings: &FlowSettings,
) -> Result<Matrix2<f64>> {
    let z0 = start.to_vec4();
    let (z1, m) = MidpointStepper::new(metric, *settings).flow_raw_with_matrix(&z0, period)?;
    compress_monodromy(metric, spec, &z0, &z1, &m)
}

fn pinv_solve(j: &Matrix2<f64>, g: &Vector2<f64>) -> Vector2<f64> {
    let svd = j.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (smax * 1e-9).max(1e-300);
    match svd.pseudo_inverse(eps) {
        Ok(p) => p * g,
        Err(_) => Vector2::zeros(),
    }
}

/// Shooting for a closed orbit near `seed` with period close to `period_guess`.
pub fn find_periodic_orbit(
    metric: &MetricField,
    seed: &UnitCotangentState,
    period_guess: f64,
    settings: &FlowSettings,
) -> Result<ClosedOrbit> {
    find_periodic_orbit_with(metric, seed, period_guess, settings, &OrbitSearchOptions::default())
}

pub fn find_periodic_orbit_with(
    metric: &MetricField,
    seed: &UnitCotangentState,
    period_guess: f64,
    settings: &FlowSettings,
    opts: &OrbitSearchOptions,
) -> Result<ClosedOrbit> {
    settings.validate()?;
    if !(period_guess.is_finite() && period_guess > 0.0) {
        return Err(GeoError::InvalidInput(format!("period guess must be > 0, got {period_guess}")));
    }
    let section = TransversalSection::best_through(metric, seed)?;
    let times = scan_crossings(
        metric,
        &section.spec,
        &seed.to_vec4(),
        settings,
        0.0,
        1.5 * period_guess,
        usize::MAX,
    )?;
    let m = times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - period_guess).abs().total_cmp(&(b.1 - period_guess).abs()))
        .map(|(i, _)| i + 1)
        .ok_or(GeoError::NoReturn {
            budget: 1.5 * period_guess,
        })?;
    continue_on_section(metric, &section, seed, m, period_guess, settings, opts)
}

/// Newton shooting for the `m`-crossing closed orbit on a fixed section,
/// seeded by the in-section coordinates of `seed`.
pub fn continue_on_section(
    metric: &MetricField,
    section: &TransversalSection,
    seed: &UnitCotangentState,
    m: usize,
    period_guess: f64,
    settings: &FlowSettings,
    opts: &OrbitSearchOptions,
) -> Result<ClosedOrbit> {
    let mut y = section.coords(&seed.to_vec4());
    let mut residuals = Vec::new();
    let fail = |reason: String, residuals: &Vec<f64>| GeoError::SearchFailure {
        reason,
        residuals: residuals.clone(),
    };
    let mut shot = shoot(metric, section, &y, m, period_guess, settings)
        .map_err(|e| fail(format!("initial shot failed: {e}"), &residuals))?;
    residuals.push(shot.g.norm());
    let mut converged = shot.g.norm() <= opts.newton_tol;
    let mut it = 0;
    while !converged && it < opts.max_iters {
        it += 1;
        let dp = section_derivative(metric, &section.spec, &shot.start, shot.period, settings)
            .map_err(|e| fail(format!("derivative failed: {e}"), &residuals))?;
        let delta = -pinv_solve(&(dp - Matrix2::identity()), &shot.g);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let yt = y + delta * alpha;
            if let Ok(s) = shoot(metric, section, &yt, m, shot.period, settings) {
                if s.g.norm() < shot.g.norm() {
                    accepted = Some((yt, s));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((yn, sn)) = accepted else {
            return Err(fail("line search could not reduce the residual".into(), &residuals));
        };
        y = yn;
        shot = sn;
        residuals.push(shot.g.norm());
        converged = shot.g.norm() <= opts.newton_tol;
    }
    if !converged {
        return Err(fail(format!("no convergence in {} iterations", opts.max_iters), &residuals));
    }
    let mut start = shot.start;
    let mut period = shot.period;
    let mut crossings = m;
    // minimality: a sub-period must be the time of a crossing dividing m
    for d in (1..m).filter(|d| m.is_multiple_of(*d)) {
        let c = nth_crossing(metric, &section.spec, &start.to_vec4(), settings, 0.0, 1.5 * period, d)?;
        if phase_distance(metric.chart(), to_state(metric, &c.z)?.state(), start.state()) <= CLOSURE_TOL {
            period = c.time;
            crossings = d;
            break;
        }
    }
    let end = flow(metric, &start, period, settings)?;
    let residual = phase_distance(metric.chart(), end.state(), start.state());
    if residual > CLOSURE_TOL {
        return Err(fail(
            format!("closure residual {residual:.3e} exceeds {CLOSURE_TOL:e}"),
            &residuals,
        ));
    }
    start = to_state(metric, &start.to_vec4())?;
    let samples = sample_orbit(metric, &start, period, settings, opts.samples)?;
    Ok(ClosedOrbit {
        start,
        period,
        residual,
        section: section.spec,
        crossings,
        period_flagged: (period - period_guess).abs() > opts.period_flag * period_guess,
        settings: *settings,
        samples,
        newton_residuals: residuals,
    })
}

/// States at uniformly spaced substeps along one period.
fn sample_orbit(
    metric: &MetricField,
    start: &UnitCotangentState,
    period: f64,
    settings: &FlowSettings,
    count: usize,
) -> Result<Vec<UnitCotangentState>> {
    let n = settings.steps_for(period).max(1);
    let h = period / n as f64;
    let every = (n / count.max(1)).max(1);
    let stepper = MidpointStepper::new(metric, *settings);
    let mut z = start.to_vec4();
    let mut out = vec![*start];
    for k in 1..n {
        z = stepper.step(&z, h)?;
        if k % every == 0 {
            out.push(to_state(metric, &z)?);
        }
    }
    Ok(out)
}

/// The 2×2 transversal linear Poincaré map of a closed orbit on its own section.
pub fn transversal_linear_poincare(metric: &MetricField, orbit: &ClosedOrbit) -> Result<Matrix2<f64>> {
    let dp = section_derivative(metric, &orbit.section, &orbit.start, orbit.period, &orbit.settings)?;
    check_symplectic(&dp)?;
    Ok(dp)
}

fn check_symplectic(dp: &Matrix2<f64>) -> Result<()> {
    let det = dp.determinant();
    if (det - 1.0).abs() > 1e-5 {
        return Err(GeoError::Frame(format!("linear Poincaré map has det {det:.8}")));
    }
    Ok(())
}

/// Linear Poincaré map on a second section through another point of the
/// same discrete orbit.
///
/// The base point is reached by `round(phase·n)` of the orbit's own
/// substeps, so the closed discrete orbit is unchanged and only the
/// transversal differs. `coordinate` selects the section coordinate, `None`
/// picks the fastest-crossing one.
pub fn transversal_linear_poincare_at(
    metric: &MetricField,
    orbit: &ClosedOrbit,
    phase: f64,
    coordinate: Option<usize>,
) -> Result<(SectionSpec, Matrix2<f64>)> {
    let n = orbit.steps();
    let h = orbit.period / n as f64;
    let k = ((phase.rem_euclid(1.0)) * n as f64).round() as usize % n;
    let stepper = MidpointStepper::new(metric, orbit.settings);
    let z = stepper.advance(&orbit.start.to_vec4(), h, k)?;
    let base = to_state(metric, &z)?;
    let section = match coordinate {
        Some(c) => TransversalSection::through(metric, &base, c)?,
        None => TransversalSection::best_through(metric, &base)?,
    };
    let dp = section_derivative(metric, &section.spec, &base, orbit.period, &orbit.settings)?;
    check_symplectic(&dp)?;
    Ok((section.spec, dp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::renormalize_energy;
    use crate::state::CotangentState;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn flat_orbit_has_circumference_period() {
        let m = MetricField::standard_flat_torus();
        let s = renormalize_energy(&m, &CotangentState::new([0.2, 1.0], Vector2::new(1.0, 0.0))).unwrap();
        let o = find_periodic_orbit(&m, &s, 6.0, &FlowSettings::default()).unwrap();
        assert!((o.period - TAU).abs() < 1e-10);
        assert!(o.residual <= CLOSURE_TOL);
        assert_eq!(o.crossings, 1);
        let dp = transversal_linear_poincare(&m, &o).unwrap();
        assert!((dp.trace() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn inner_equator_period() {
        let m = MetricField::torus_of_revolution(2.0, 1.0).unwrap();
        let s = renormalize_energy(&m, &CotangentState::new([0.0, PI + 1e-4], Vector2::new(1.0, 0.0))).unwrap();
        let o = find_periodic_orbit(&m, &s, 6.0, &FlowSettings::default()).unwrap();
        assert!((o.period - TAU).abs() < 1e-4, "{}", o.period);
        assert!(!o.period_flagged);
        assert!((o.start.x()[1] - PI).abs() < 1e-8);
    }

    #[test]
    fn bad_guess_rejected() {
        let m = MetricField::standard_flat_torus();
        let s = renormalize_energy(&m, &CotangentState::new([0.2, 1.0], Vector2::new(1.0, 0.0))).unwrap();
        assert!(find_periodic_orbit(&m, &s, -1.0, &FlowSettings::default()).is_err());
    }
}
