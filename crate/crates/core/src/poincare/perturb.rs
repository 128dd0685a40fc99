//! Trace map `g ↦ tr DP_g` and its response to conformal bumps.

use serde::{Deserialize, Serialize};

use super::orbit::{continue_on_section, transversal_linear_poincare, ClosedOrbit, OrbitSearchOptions};
use super::section::TransversalSection;
use crate::error::{GeoError, Result};
use crate::flow::renormalize_energy;
use crate::metric::{ConformalBump, MetricField};

/// Trace of the transversal linear Poincaré map of `orbit`.
pub fn trace_map(metric: &MetricField, orbit: &ClosedOrbit) -> Result<f64> {
    Ok(transversal_linear_poincare(metric, orbit)?.trace())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub amplitude: f64,
    pub c2_size: f64,
    pub trace: f64,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSweep {
    pub base_trace: f64,
    pub bump: ConformalBump,
    /// Sorted by amplitude.
    pub entries: Vec<SweepEntry>,
    /// Requested amplitudes that were dropped after a continuation failure.
    pub truncated: Vec<f64>,
    pub failure: Option<String>,
}

impl TraceSweep {
    /// `(min, max)` of the swept traces.
    pub fn trace_range(&self) -> (f64, f64) {
        self.entries.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.trace), hi.max(e.trace))
        })
    }

    pub fn width(&self) -> f64 {
        let (lo, hi) = self.trace_range();
        hi - lo
    }

    /// Whether the swept traces lie strictly on both sides of the base trace.
    pub fn covers_base(&self) -> bool {
        let (lo, hi) = self.trace_range();
        lo < self.base_trace && self.base_trace < hi
    }

    /// Largest `|Δtrace| / |Δamplitude|` between neighbouring entries.
    pub fn max_slope(&self) -> f64 {
        self.entries
            .windows(2)
            .map(|w| ((w[1].trace - w[0].trace) / (w[1].amplitude - w[0].amplitude)).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| GeoError::InvalidInput(format!("csv write failed: {e}"));
        w.write_record(["amplitude", "c2_size", "trace"]).map_err(io)?;
        for e in &self.entries {
            w.write_record([e.amplitude.to_string(), e.c2_size.to_string(), e.trace.to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| GeoError::InvalidInput(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

/// Sweeps `bump` amplitudes, continuing the orbit outward from amplitude 0
/// in each direction and recording `(amplitude, C²-size, trace)`.
///
/// A continuation failure truncates that direction; the dropped amplitudes
/// are reported.
pub fn trace_perturbation_sweep(
    metric: &MetricField,
    orbit: &ClosedOrbit,
    bump: &ConformalBump,
    amplitudes: &[f64],
) -> Result<TraceSweep> {
    if amplitudes.iter().any(|a| !a.is_finite()) {
        return Err(GeoError::InvalidInput("amplitudes must be finite".into()));
    }
    let base_trace = trace_map(metric, orbit)?;
    let section = TransversalSection::through(metric, &orbit.start, orbit.section.coordinate)?;
    let opts = OrbitSearchOptions::default();
    let mut entries = Vec::new();
    let mut truncated = Vec::new();
    let mut failure = None;
    if amplitudes.contains(&0.0) {
        entries.push(SweepEntry {
            amplitude: 0.0,
            c2_size: 0.0,
            trace: base_trace,
            period: orbit.period,
        });
    }
    let mut pos: Vec<f64> = amplitudes.iter().copied().filter(|&a| a > 0.0).collect();
    let mut neg: Vec<f64> = amplitudes.iter().copied().filter(|&a| a < 0.0).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(|a, b| b.total_cmp(a));
    for branch in [pos, neg] {
        let mut prev = orbit.clone();
        for (i, &a) in branch.iter().enumerate() {
            let step = || -> Result<(MetricField, ClosedOrbit)> {
                let g = metric.apply_conformal_bump(bump.with_amplitude(a))?;
                let seed = renormalize_energy(&g, prev.start.state())?;
                let o = continue_on_section(&g, &section, &seed, prev.crossings, prev.period, &orbit.settings, &opts)?;
                Ok((g, o))
            };
            match step().and_then(|(g, o)| {
                let t = trace_map(&g, &o)?;
                Ok((g, o, t))
            }) {
                Ok((g, o, t)) => {
                    entries.push(SweepEntry {
                        amplitude: a,
                        c2_size: g.c2_size(),
                        trace: t,
                        period: o.period,
                    });
                    prev = o;
                }
                Err(e) => {
                    failure.get_or_insert_with(|| format!("continuation failed at amplitude {a}: {e}"));
                    truncated.extend_from_slice(&branch[i..]);
                    break;
                }
            }
        }
    }
    entries.sort_by(|a, b| a.amplitude.total_cmp(&b.amplitude));
    truncated.sort_by(f64::total_cmp);
    Ok(TraceSweep {
        base_trace,
        bump: *bump,
        entries,
        truncated,
        failure,
    })
}
