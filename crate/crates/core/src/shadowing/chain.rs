//! `(δ, T)`-pseudo-geodesics over a finite index window.

use std::io::{BufRead, Write};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::flow::{to_state, FlowSettings, MidpointStepper};
use crate::metric::MetricField;
use crate::state::{phase_distance4, CotangentState, UnitCotangentState};

/// How the finite window stands in for the bi-infinite chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionRule {
    /// Before the first and after the last vertex the chain follows the
    /// true orbit of that vertex, with the terminal flow times repeated.
    StationaryOrbit,
}

/// Chain `[(x_i, p_i), (t_i)]` for `i` in `first_index ..= first_index + len - 1`.
///
/// `times[k]` is the flight time from vertex `first_index + k`; the last one
/// only fixes the index bookkeeping of the forward extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoGeodesic {
    pub first_index: i64,
    pub states: Vec<UnitCotangentState>,
    pub times: Vec<f64>,
    pub delta: f64,
    pub t_min: f64,
    pub extension: ExtensionRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub index: i64,
    pub jump: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainValidation {
    pub valid: bool,
    pub jumps: Vec<JumpRecord>,
    pub max_jump: f64,
    pub min_time: f64,
    /// Indices whose jump is not below `δ`.
    pub bad_jumps: Vec<i64>,
    /// Indices whose flight time is below `T`.
    pub short_times: Vec<i64>,
}

impl PseudoGeodesic {
    /// Builds a chain without checking the `(δ, T)` conditions.
    pub fn from_parts(
        first_index: i64,
        states: Vec<UnitCotangentState>,
        times: Vec<f64>,
        delta: f64,
        t_min: f64,
    ) -> Result<Self> {
        if states.is_empty() || states.len() != times.len() {
            return Err(GeoError::InvalidInput(format!(
                "chain needs one flight time per vertex ({} vertices, {} times)",
                states.len(),
                times.len()
            )));
        }
        let last = first_index + states.len() as i64 - 1;
        if first_index > 0 || last < 0 {
            return Err(GeoError::InvalidInput(format!(
                "index window [{first_index}, {last}] must contain 0"
            )));
        }
        if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(GeoError::InvalidInput("flight times must be positive".into()));
        }
        if !(delta > 0.0 && t_min > 0.0) {
            return Err(GeoError::InvalidInput("δ and T must be positive".into()));
        }
        Ok(Self {
            first_index,
            states,
            times,
            delta,
            t_min,
            extension: ExtensionRule::StationaryOrbit,
        })
    }

    /// Builds a chain and rejects it unless it is a `(δ, T)`-pseudo-geodesic.
    pub fn new(
        metric: &MetricField,
        first_index: i64,
        states: Vec<UnitCotangentState>,
        times: Vec<f64>,
        delta: f64,
        t_min: f64,
        settings: &FlowSettings,
    ) -> Result<Self> {
        let c = Self::from_parts(first_index, states, times, delta, t_min)?;
        let v = validate_chain(metric, &c, delta, t_min, settings)?;
        if !v.valid {
            return Err(GeoError::Construction(format!(
                "not a ({delta}, {t_min}) chain: bad jumps at {:?}, short times at {:?}",
                v.bad_jumps, v.short_times
            )));
        }
        Ok(c)
    }

    /// Samples a true orbit: `x_{i+1} = φ^{t}(x_i)` with constant flight time.
    pub fn from_orbit(
        metric: &MetricField,
        start: &UnitCotangentState,
        first_index: i64,
        len: usize,
        t: f64,
        settings: &FlowSettings,
    ) -> Result<Self> {
        if len == 0 {
            return Err(GeoError::InvalidInput("empty chain".into()));
        }
        let stepper = MidpointStepper::new(metric, *settings);
        let mut states = Vec::with_capacity(len);
        let back = -(first_index as f64) * t;
        let mut z = stepper.flow_raw(&start.to_vec4(), -back)?;
        for k in 0..len {
            if k > 0 {
                z = stepper.flow_raw(&z, t)?;
            }
            states.push(to_state(metric, &z)?);
        }
        // jumps are at roundoff level
        Self::from_parts(first_index, states, vec![t; len], 1e-9, t)
    }

    pub fn last_index(&self) -> i64 {
        self.first_index + self.states.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn vertex(&self, i: i64) -> Option<&UnitCotangentState> {
        let k = i - self.first_index;
        (k >= 0).then(|| self.states.get(k as usize)).flatten()
    }

    /// `t_i`, with the extension rule outside the window.
    pub fn time(&self, i: i64) -> f64 {
        if i < self.first_index {
            self.times[0]
        } else if i > self.last_index() {
            *self.times.last().expect("nonempty")
        } else {
            self.times[(i - self.first_index) as usize]
        }
    }

    /// `ς(i)` for every `i` in `first_index ..= last_index + 1`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let n = self.states.len();
        let mut out = vec![0.0; n + 1];
        let zero = (-self.first_index) as usize;
        for k in zero..n {
            out[k + 1] = out[k] + self.times[k];
        }
        for k in (0..zero).rev() {
            out[k] = out[k + 1] - self.times[k];
        }
        out
    }

    /// Index `i` with `ς(i) ≤ t < ς(i + 1)`, clamped to the window.
    pub fn segment_of(&self, t: f64) -> i64 {
        let b = self.breakpoints();
        let k = b[..b.len() - 1].partition_point(|&s| s <= t);
        self.first_index + (k.max(1) - 1) as i64
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| GeoError::InvalidInput(format!("chain write failed: {e}"));
        writeln!(out, "# delta = {:e}", self.delta).map_err(io)?;
        writeln!(out, "# T = {:e}", self.t_min).map_err(io)?;
        writeln!(out, "# extension = stationary-orbit").map_err(io)?;
        writeln!(out, "i,u,v,p_u,p_v,t_i").map_err(io)?;
        for (k, (s, t)) in self.states.iter().zip(&self.times).enumerate() {
            let z = s.to_vec4();
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e}",
                self.first_index + k as i64,
                z[0],
                z[1],
                z[2],
                z[3],
                t
            )
            .map_err(io)?;
        }
        Ok(())
    }

    /// Reads the text format written by [`PseudoGeodesic::write`]. States must
    /// lie within `1e-6` of the unit shell of `metric`.
    pub fn read<R: BufRead>(metric: &MetricField, input: R) -> Result<Self> {
        let bad = |m: String| GeoError::InvalidInput(format!("chain file: {m}"));
        let mut delta = None;
        let mut t_min = None;
        let mut body = String::new();
        for line in input.lines() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if let Some(h) = line.strip_prefix('#') {
                let Some((k, v)) = h.split_once('=') else {
                    continue;
                };
                match k.trim() {
                    "delta" => delta = Some(v.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
                    "T" => t_min = Some(v.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
                    "extension" if v.trim() != "stationary-orbit" => {
                        return Err(bad(format!("unknown extension rule '{}'", v.trim())))
                    }
                    _ => {}
                }
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let mut first = None;
        let mut states = Vec::new();
        let mut times = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let f = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| bad(format!("missing column {k}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| bad(e.to_string()))
            };
            let i = rec
                .get(0)
                .ok_or_else(|| bad("missing index".into()))?
                .trim()
                .parse::<i64>()
                .map_err(|e| bad(e.to_string()))?;
            let expected = first.map(|f: i64| f + states.len() as i64);
            if expected.is_some_and(|e| e != i) {
                return Err(bad(format!("indices must be consecutive, got {i}")));
            }
            first.get_or_insert(i);
            let s = CotangentState::new([f(1)?, f(2)?], Vector2::new(f(3)?, f(4)?));
            states.push(UnitCotangentState::pin_with_tol(metric, s, 1e-6)?);
            times.push(f(5)?);
        }
        Self::from_parts(
            first.ok_or_else(|| bad("no rows".into()))?,
            states,
            times,
            delta.ok_or_else(|| bad("missing delta header".into()))?,
            t_min.ok_or_else(|| bad("missing T header".into()))?,
        )
    }
}

/// `ς(n)`: `t_0 + … + t_{n-1}` for `n > 0`, `-(t_n + … + t_{-1})` for `n < 0`.
pub fn accumulated_time(chain: &PseudoGeodesic, n: i64) -> f64 {
    if n >= 0 {
        (0..n).map(|i| chain.time(i)).sum()
    } else {
        -(n..0).map(|i| chain.time(i)).sum::<f64>()
    }
}

/// `(x_0, p_0) ⋆ t = φ^{t - ς(i)}(x_i)` for `ς(i) ≤ t < ς(i + 1)`.
pub fn chain_eval(
    metric: &MetricField,
    chain: &PseudoGeodesic,
    t: f64,
    settings: &FlowSettings,
) -> Result<UnitCotangentState> {
    let i = chain.segment_of(t);
    let b = chain.breakpoints();
    let s = b[(i - chain.first_index) as usize];
    let v = chain.vertex(i).expect("segment index inside window");
    let z = MidpointStepper::new(metric, *settings).flow_raw(&v.to_vec4(), t - s)?;
    to_state(metric, &z)
}

/// Checks `t_i ≥ T` for every vertex and `d(φ^{t_i}(x_i), x_{i+1}) < δ`
/// for every jump inside the window.
pub fn validate_chain(
    metric: &MetricField,
    chain: &PseudoGeodesic,
    delta: f64,
    t_min: f64,
    settings: &FlowSettings,
) -> Result<ChainValidation> {
    let stepper = MidpointStepper::new(metric, *settings);
    let mut jumps = Vec::with_capacity(chain.len().saturating_sub(1));
    for k in 0..chain.len().saturating_sub(1) {
        let z = stepper.flow_raw(&chain.states[k].to_vec4(), chain.times[k])?;
        let jump = phase_distance4(metric.chart(), &z, &chain.states[k + 1].to_vec4());
        jumps.push(JumpRecord {
            index: chain.first_index + k as i64,
            jump,
            time: chain.times[k],
        });
    }
    Ok(summarize(chain, jumps, delta, t_min))
}

pub(crate) fn summarize(chain: &PseudoGeodesic, jumps: Vec<JumpRecord>, delta: f64, t_min: f64) -> ChainValidation {
    let bad_jumps: Vec<i64> = jumps.iter().filter(|j| !(j.jump < delta)).map(|j| j.index).collect();
    let short_times: Vec<i64> = chain
        .times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t < t_min)
        .map(|(k, _)| chain.first_index + k as i64)
        .collect();
    ChainValidation {
        valid: bad_jumps.is_empty() && short_times.is_empty(),
        max_jump: jumps.iter().map(|j| j.jump).fold(0.0, f64::max),
        min_time: chain.times.iter().copied().fold(f64::INFINITY, f64::min),
        jumps,
        bad_jumps,
        short_times,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{flow, renormalize_energy};

    fn flat_chain(times: Vec<f64>, first: i64) -> (MetricField, PseudoGeodesic) {
        let m = MetricField::standard_flat_torus();
        let s = renormalize_energy(&m, &CotangentState::new([1.0, 1.0], Vector2::new(0.6, 0.8))).unwrap();
        let n = times.len();
        let mut c = PseudoGeodesic::from_orbit(&m, &s, first, n, 1.0, &FlowSettings::default()).unwrap();
        c.times = times;
        (m, c)
    }

    #[test]
    fn accumulated_time_examples() {
        let (_, c) = flat_chain(vec![4.0, 2.0, 3.0, 5.0], -1);
        assert_eq!(accumulated_time(&c, 0), 0.0);
        assert_eq!(accumulated_time(&c, 2), 5.0);
        assert_eq!(accumulated_time(&c, -1), -4.0);
        // extension times beyond the window
        assert_eq!(accumulated_time(&c, 5), 2.0 + 3.0 + 5.0 + 5.0 + 5.0);
        assert_eq!(accumulated_time(&c, -3), -12.0);
        let b = c.breakpoints();
        assert_eq!(b, vec![-4.0, 0.0, 2.0, 5.0, 10.0]);
    }

    #[test]
    fn chain_eval_at_breakpoint_is_vertex() {
        let m = MetricField::torus_of_revolution(2.0, 1.0).unwrap();
        let s = renormalize_energy(&m, &CotangentState::new([1.0, 1.0], Vector2::new(1.6, 0.3))).unwrap();
        let c = PseudoGeodesic::from_orbit(&m, &s, -2, 5, 1.3, &FlowSettings::default()).unwrap();
        let b = c.breakpoints();
        for (k, &t) in b[..c.len()].iter().enumerate() {
            let e = chain_eval(&m, &c, t, &FlowSettings::default()).unwrap();
            assert_eq!(e, c.states[k]);
        }
    }

    #[test]
    fn true_orbit_chain_matches_flow_on_flat_torus() {
        let m = MetricField::standard_flat_torus();
        let st = FlowSettings::default();
        let s = renormalize_energy(&m, &CotangentState::new([1.0, 1.0], Vector2::new(0.6, 0.8))).unwrap();
        let c = PseudoGeodesic::from_orbit(&m, &s, -3, 7, 0.7, &st).unwrap();
        for k in -40..40 {
            let t = k as f64 * 0.11;
            let a = chain_eval(&m, &c, t, &st).unwrap();
            let b = flow(&m, &s, t, &st).unwrap();
            assert!(crate::state::phase_distance(m.chart(), a.state(), b.state()) < 1e-9);
        }
    }

    #[test]
    fn validation_flags_large_jump() {
        let m = MetricField::standard_flat_torus();
        let st = FlowSettings::default();
        let s = renormalize_energy(&m, &CotangentState::new([1.0, 1.0], Vector2::new(0.6, 0.8))).unwrap();
        let mut c = PseudoGeodesic::from_orbit(&m, &s, 0, 5, 1.0, &st).unwrap();
        let delta = 1e-3;
        assert!(validate_chain(&m, &c, delta, 1.0, &st).unwrap().valid);
        let shift = |s: &UnitCotangentState, d: f64| {
            UnitCotangentState::pin(&m, CotangentState::new([s.x()[0], s.x()[1] + d], s.p())).unwrap()
        };
        let orig = c.states[2];
        c.states[2] = shift(&orig, 0.5 * delta);
        let v = validate_chain(&m, &c, delta, 1.0, &st).unwrap();
        assert!(v.valid);
        c.states[2] = shift(&orig, 2.0 * delta);
        let v = validate_chain(&m, &c, delta, 1.0, &st).unwrap();
        assert!(!v.valid);
        assert_eq!(v.bad_jumps, vec![1, 2]);
        assert!((v.jumps[1].jump - 2.0 * delta).abs() < 1e-12 && (v.jumps[2].jump - 2.0 * delta).abs() < 1e-12);
        assert!(validate_chain(&m, &c, delta, 1.5, &st).unwrap().short_times.len() == 5);
    }

    #[test]
    fn file_round_trip() {
        let m = MetricField::torus_of_revolution(2.0, 1.0).unwrap();
        let s = renormalize_energy(&m, &CotangentState::new([1.0, 1.0], Vector2::new(1.6, 0.3))).unwrap();
        let mut c = PseudoGeodesic::from_orbit(&m, &s, -2, 5, 1.3, &FlowSettings::default()).unwrap();
        c.delta = 1e-3;
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        let back = PseudoGeodesic::read(&m, buf.as_slice()).unwrap();
        assert_eq!(back.first_index, -2);
        assert_eq!(back.delta, 1e-3);
        for (a, b) in back.states.iter().zip(&c.states) {
            assert!((a.to_vec4() - b.to_vec4()).norm() < 1e-14);
        }
    }

    #[test]
    fn window_must_contain_zero() {
        let m = MetricField::standard_flat_torus();
        let s = renormalize_energy(&m, &CotangentState::new([1.0, 1.0], Vector2::new(0.6, 0.8))).unwrap();
        assert!(PseudoGeodesic::from_parts(1, vec![s], vec![1.0], 1e-3, 1.0).is_err());
    }
}
