//! Implicit-midpoint integration of the geodesic flow and of its
//! variational equation.
//!
//! One step solves `z₁ = z₀ + h·f((z₀ + z₁)/2)` by Newton's method. The
//! tangent map of the step is `(I - h/2·J)^{-1} (I + h/2·J)` with `J` the
//! Jacobian of `f` at the converged midpoint, which is the exact derivative
//! of the discrete map and a symplectic matrix.

use std::io::Write;

use nalgebra::{Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::metric::MetricField;
use crate::state::{CotangentState, UnitCotangentState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSettings {
    pub step: f64,
    pub tol: f64,
    pub max_newton_iters: usize,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self {
            step: 0.0025,
            tol: 1e-12,
            max_newton_iters: 20,
        }
    }
}

impl FlowSettings {
    pub fn with_step(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(GeoError::InvalidInput(format!("step must be > 0, got {}", self.step)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(GeoError::InvalidInput(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_newton_iters == 0 {
            return Err(GeoError::InvalidInput("max_newton_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of uniform steps used to cover time `t`.
    pub fn steps_for(&self, t: f64) -> usize {
        (t.abs() / self.step).ceil() as usize
    }
}

/// Derivative of the time-`elapsed` flow map in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyRecord {
    pub end_state: UnitCotangentState,
    pub matrix: Matrix4<f64>,
    pub elapsed: f64,
}

/// Single-step engine bound to one metric.
#[derive(Debug, Clone, Copy)]
pub struct MidpointStepper<'a> {
    pub metric: &'a MetricField,
    pub settings: FlowSettings,
}

impl<'a> MidpointStepper<'a> {
    pub fn new(metric: &'a MetricField, settings: FlowSettings) -> Self {
        Self { metric, settings }
    }

    fn solve(&self, z0: &Vector4<f64>, h: f64) -> std::result::Result<Vector4<f64>, (f64, usize)> {
        let f0 = self.metric.field(z0);
        let mut z1 = z0 + self.metric.field(&(z0 + f0 * (0.5 * h))) * h;
        let mut last = f64::INFINITY;
        for it in 0..self.settings.max_newton_iters {
            let mid = (z0 + z1) * 0.5;
            let (f, jac) = self.metric.field_and_jacobian(&mid);
            let g = z1 - z0 - f * h;
            let dg = Matrix4::identity() - jac * (0.5 * h);
            let Some(delta) = dg.lu().solve(&g) else {
                return Err((f64::NAN, it + 1));
            };
            z1 -= delta;
            last = delta.amax();
            if !last.is_finite() {
                return Err((last, it + 1));
            }
            if last <= self.settings.tol * z1.amax().max(1.0) {
                return Ok(z1);
            }
        }
        Err((last, self.settings.max_newton_iters))
    }

    /// One step of size `h` from an unwrapped phase point.
    pub fn step(&self, z0: &Vector4<f64>, h: f64) -> Result<Vector4<f64>> {
        self.solve(z0, h).map_err(|(update, iterations)| GeoError::Integration {
            step: 0,
            time: 0.0,
            update,
            iterations,
        })
    }

    /// One step together with its tangent map.
    pub fn step_with_matrix(&self, z0: &Vector4<f64>, h: f64) -> Result<(Vector4<f64>, Matrix4<f64>)> {
        let z1 = self.step(z0, h)?;
        let (_, jac) = self.metric.field_and_jacobian(&((z0 + z1) * 0.5));
        let half = jac * (0.5 * h);
        let lhs = Matrix4::identity() - half;
        let rhs = Matrix4::identity() + half;
        let m = lhs
            .lu()
            .solve(&rhs)
            .ok_or(GeoError::Integration {
                step: 0,
                time: 0.0,
                update: f64::NAN,
                iterations: 0,
            })?;
        Ok((z1, m))
    }

    /// `n` uniform steps of size `h`. The point is not wrapped.
    pub fn advance(&self, z0: &Vector4<f64>, h: f64, n: usize) -> Result<Vector4<f64>> {
        let mut z = *z0;
        for k in 0..n {
            z = self.step(&z, h).map_err(|e| locate(e, k, k as f64 * h))?;
        }
        Ok(z)
    }

    /// `n` uniform steps accumulating the tangent map.
    pub fn advance_with_matrix(&self, z0: &Vector4<f64>, h: f64, n: usize) -> Result<(Vector4<f64>, Matrix4<f64>)> {
        let mut z = *z0;
        let mut m = Matrix4::identity();
        for k in 0..n {
            let (z1, s) = self.step_with_matrix(&z, h).map_err(|e| locate(e, k, k as f64 * h))?;
            z = z1;
            m = s * m;
        }
        Ok((z, m))
    }

    /// Time-`t` map using `ceil(|t|/step)` uniform substeps, so that
    /// `flow_raw(-t)` inverts `flow_raw(t)` up to the Newton tolerance.
    pub fn flow_raw(&self, z0: &Vector4<f64>, t: f64) -> Result<Vector4<f64>> {
        let n = self.settings.steps_for(t);
        if n == 0 {
            return Ok(*z0);
        }
        self.advance(z0, t / n as f64, n)
    }

    pub fn flow_raw_with_matrix(&self, z0: &Vector4<f64>, t: f64) -> Result<(Vector4<f64>, Matrix4<f64>)> {
        let n = self.settings.steps_for(t);
        if n == 0 {
            return Ok((*z0, Matrix4::identity()));
        }
        self.advance_with_matrix(z0, t / n as f64, n)
    }
}

fn locate(e: GeoError, step: usize, time: f64) -> GeoError {
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

/// Wraps an integrated phase point back into the chart.
pub fn to_state(metric: &MetricField, z: &Vector4<f64>) -> Result<UnitCotangentState> {
    let x = metric.chart().wrap([z[0], z[1]])?;
    Ok(UnitCotangentState::unchecked(CotangentState::new(x, Vector2::new(z[2], z[3]))))
}

/// `φ^t(state)`.
pub fn flow(
    metric: &MetricField,
    state: &UnitCotangentState,
    t: f64,
    settings: &FlowSettings,
) -> Result<UnitCotangentState> {
    settings.validate()?;
    if !t.is_finite() {
        return Err(GeoError::InvalidInput("flow time must be finite".into()));
    }
    let z = MidpointStepper::new(metric, *settings).flow_raw(&state.to_vec4(), t)?;
    to_state(metric, &z)
}

/// `φ^t(state)` together with `Dφ^t(state)`.
pub fn flow_with_monodromy(
    metric: &MetricField,
    state: &UnitCotangentState,
    t: f64,
    settings: &FlowSettings,
) -> Result<MonodromyRecord> {
    settings.validate()?;
    if !t.is_finite() {
        return Err(GeoError::InvalidInput("flow time must be finite".into()));
    }
    let (z, m) = MidpointStepper::new(metric, *settings).flow_raw_with_matrix(&state.to_vec4(), t)?;
    Ok(MonodromyRecord {
        end_state: to_state(metric, &z)?,
        matrix: m,
        elapsed: t,
    })
}

/// Rescales `p` by a positive factor onto the shell `H = 1/2`.
pub fn renormalize_energy(metric: &MetricField, state: &CotangentState) -> Result<UnitCotangentState> {
    if state.p == Vector2::zeros() {
        return Err(GeoError::Domain("zero momentum has no direction".into()));
    }
    let x = metric.chart().wrap(state.x)?;
    let s = CotangentState::new(x, state.p);
    let h2 = 2.0 * metric.hamiltonian(&s)?;
    if h2 == 1.0 {
        return Ok(UnitCotangentState::unchecked(s));
    }
    let mut p = state.p / h2.sqrt();
    // one correction step removes the last-ulp bias of the square root
    let h2b = 2.0 * metric.hamiltonian(&CotangentState::new(x, p))?;
    p *= 1.0 - 0.5 * (h2b - 1.0);
    Ok(UnitCotangentState::unchecked(CotangentState::new(x, p)))
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub p_u: f64,
    pub p_v: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

/// Samples `φ^t(state)` every `every` time units over `[0, t_end]`.
pub fn sample_trajectory(
    metric: &MetricField,
    state: &UnitCotangentState,
    t_end: f64,
    every: f64,
    settings: &FlowSettings,
) -> Result<Vec<TrajectorySample>> {
    settings.validate()?;
    if !(every > 0.0) || !t_end.is_finite() || t_end < 0.0 {
        return Err(GeoError::InvalidInput("sampling interval must be > 0 and t_end >= 0".into()));
    }
    let stepper = MidpointStepper::new(metric, *settings);
    let chunks = (t_end / every).round().max(1.0) as usize;
    let dt = t_end / chunks as f64;
    let mut z = state.to_vec4();
    let mut out = Vec::with_capacity(chunks + 1);
    let push = |out: &mut Vec<TrajectorySample>, t: f64, z: &Vector4<f64>| -> Result<()> {
        let s = to_state(metric, z)?;
        out.push(TrajectorySample {
            t,
            u: s.x()[0],
            v: s.x()[1],
            p_u: z[2],
            p_v: z[3],
            h: metric.energy_at(z),
        });
        Ok(())
    };
    push(&mut out, 0.0, &z)?;
    for k in 1..=chunks {
        z = stepper.flow_raw(&z, dt)?;
        push(&mut out, k as f64 * dt, &z)?;
    }
    Ok(out)
}

/// Writes samples as CSV with columns `t,u,v,p_u,p_v,H`.
pub fn write_trajectory_csv<W: Write>(out: W, samples: &[TrajectorySample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s)
            .map_err(|e| GeoError::InvalidInput(format!("csv write failed: {e}")))?;
    }
    w.flush()
        .map_err(|e| GeoError::InvalidInput(format!("csv write failed: {e}")))?;
    Ok(())
}
