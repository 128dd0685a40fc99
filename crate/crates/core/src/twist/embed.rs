//! Embedding twist pseudo-orbits as pseudo-geodesics through a section,
//! `x_n = h⁻¹(θ_n, r_n)` with `t_n` the return time at `x_n`.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::map::TwistPoint;
use super::pseudo::TwistPseudoOrbit;
use crate::error::{GeoError, Result};
use crate::flow::FlowSettings;
use crate::metric::{MetricFamily, MetricField};
use crate::poincare::orbit::ClosedOrbit;
use crate::poincare::returns::nth_crossing;
use crate::poincare::section::TransversalSection;
use crate::shadowing::chain::{summarize, ChainValidation, JumpRecord, PseudoGeodesic};
use crate::state::{phase_distance4, UnitCotangentState};

/// `h⁻¹`: annulus to in-section coordinates `(x_j, p_j)`.
pub trait CoordinateMap: Sync {
    fn to_section(&self, p: &TwistPoint) -> Vector2<f64>;
    fn name(&self) -> &'static str;
}

/// Exact conjugacy for a flat torus (`A = I`, sides `L`) and a section
/// `{x_k = c}`: the return map `(x_j, p_j) ↦ (x_j + L_k p_j/|p_k|, p_j)`
/// becomes `(θ + r, r)` with `θ = x_j / L_j` and `r = (L_k/L_j) p_j/|p_k|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatShearMap {
    length_j: f64,
    ratio: f64,
}

impl FlatShearMap {
    pub fn new(metric: &MetricField, section: &TransversalSection) -> Result<Self> {
        if !matches!(metric.family(), MetricFamily::FlatTorus) {
            return Err(GeoError::InvalidInput("flat shear coordinates need a flat torus".into()));
        }
        let k = section.spec.coordinate;
        let j = section.spec.free();
        let chart = metric.chart();
        let (Some(lk), Some(lj)) = (chart.period(k), chart.period(j)) else {
            return Err(GeoError::InvalidInput("flat torus chart must be periodic".into()));
        };
        Ok(Self {
            length_j: lj,
            ratio: lk / lj,
        })
    }

    /// `h`, the inverse of [`CoordinateMap::to_section`].
    pub fn to_annulus(&self, y: &Vector2<f64>) -> TwistPoint {
        let pk = (1.0 - y[1] * y[1]).sqrt();
        TwistPoint::new((y[0] / self.length_j).rem_euclid(1.0), self.ratio * y[1] / pk)
    }
}

impl CoordinateMap for FlatShearMap {
    fn to_section(&self, p: &TwistPoint) -> Vector2<f64> {
        let s = p.r / self.ratio;
        Vector2::new(p.theta * self.length_j, s / (1.0 + s * s).sqrt())
    }

    fn name(&self) -> &'static str {
        "flat-shear"
    }
}

/// `(θ, r) ↦ y₀ + √(2 s r) (cos 2πθ, sin 2πθ)`, area-preserving up to the
/// constant `2πs`, centered on the closed orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticPolarMap {
    pub center: Vector2<f64>,
    pub scale: f64,
}

impl SymplecticPolarMap {
    pub fn new(section: &TransversalSection, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(GeoError::InvalidInput("polar scale must be positive".into()));
        }
        Ok(Self {
            center: section.coords(&section.base.to_vec4()),
            scale,
        })
    }
}

impl CoordinateMap for SymplecticPolarMap {
    fn to_section(&self, p: &TwistPoint) -> Vector2<f64> {
        let rho = (2.0 * self.scale * p.r.max(0.0)).sqrt();
        let (s, c) = (TAU * p.theta).sin_cos();
        self.center + rho * Vector2::new(c, s)
    }

    fn name(&self) -> &'static str {
        "symplectic-polar"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedChain {
    pub chain: PseudoGeodesic,
    pub validation: ChainValidation,
    pub coordinate_map: String,
    /// Period `ℓ` of the closed orbit.
    pub period: f64,
    pub return_times: Vec<f64>,
    /// `max |t_n/ℓ - 1|`.
    pub eta: f64,
    /// Measured `max` jump, reported as `δ`.
    pub delta: f64,
    pub t_min: f64,
    /// Sampled Lipschitz constant of `h⁻¹` on the pseudo-orbit's band.
    pub lipschitz: f64,
    pub max_twist_jump: f64,
}

/// Largest operator norm of `Dh⁻¹` over a grid of the band `[r_lo, r_hi]`.
pub fn sample_lipschitz(map: &dyn CoordinateMap, r_lo: f64, r_hi: f64, n: usize) -> f64 {
    let h = 1e-6;
    let mut best: f64 = 0.0;
    for i in 0..n {
        for k in 0..n {
            let p = TwistPoint::new(i as f64 / n as f64, r_lo + (r_hi - r_lo) * (k as f64 + 0.5) / n as f64);
            let d = |dt: f64, dr: f64| {
                (map.to_section(&TwistPoint::new(p.theta + dt, p.r + dr))
                    - map.to_section(&TwistPoint::new(p.theta - dt, p.r - dr)))
                    / (2.0 * h)
            };
            let (a, b) = (d(h, 0.0), d(0.0, h));
            let m = Matrix2::from_columns(&[a, b]);
            best = best.max(m.singular_values().max());
        }
    }
    best
}

/// Builds the chain `x_n = h⁻¹(θ_n, r_n)` on the section through the
/// closed orbit, with `t_n` from the return-time solver.
pub fn embed_as_pseudo_geodesic(
    metric: &MetricField,
    orbit: &ClosedOrbit,
    section: &TransversalSection,
    po: &TwistPseudoOrbit,
    map: &dyn CoordinateMap,
    settings: &FlowSettings,
) -> Result<EmbeddedChain> {
    if po.is_empty() {
        return Err(GeoError::InvalidInput("empty pseudo-orbit".into()));
    }
    let ell = orbit.period;
    let m = orbit.crossings.max(1);
    let states: Vec<UnitCotangentState> = po
        .points
        .par_iter()
        .enumerate()
        .map(|(n, p)| {
            section
                .point(metric, &map.to_section(p))
                .map_err(|e| GeoError::Construction(format!("vertex {n} not on the section: {e}")))
        })
        .collect::<Result<_>>()?;
    let returns: Vec<(nalgebra::Vector4<f64>, f64)> = states
        .par_iter()
        .enumerate()
        .map(|(n, s)| {
            nth_crossing(metric, &section.spec, &s.to_vec4(), settings, 0.1 * ell / m as f64, 3.0 * ell, m)
                .map(|c| (c.z, c.time))
                .map_err(|e| GeoError::Construction(format!("return map failed at vertex {n}: {e}")))
        })
        .collect::<Result<_>>()?;
    let times: Vec<f64> = returns.iter().map(|r| r.1).collect();
    let jumps: Vec<JumpRecord> = (0..states.len() - 1)
        .map(|k| JumpRecord {
            index: k as i64,
            jump: phase_distance4(metric.chart(), &returns[k].0, &states[k + 1].to_vec4()),
            time: times[k],
        })
        .collect();
    let measured = jumps.iter().map(|j| j.jump).fold(0.0, f64::max);
    // strict inequality needs a margin above the measured maximum
    let delta = measured * (1.0 + 1e-9) + 1e-15;
    let t_min = 0.5 * ell;
    let chain = PseudoGeodesic::from_parts(0, states, times.clone(), delta, t_min)?;
    let validation = summarize(&chain, jumps, delta, t_min);
    let eta = times.iter().map(|t| (t / ell - 1.0).abs()).fold(0.0, f64::max);
    let (r_lo, r_hi) = po
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.r), b.max(p.r)));
    let lipschitz = sample_lipschitz(map, r_lo, r_hi.max(r_lo + 1e-9), 32);
    Ok(EmbeddedChain {
        chain,
        validation,
        coordinate_map: map.name().to_string(),
        period: ell,
        return_times: times,
        eta,
        delta: measured,
        t_min,
        lipschitz,
        max_twist_jump: po.jump_log.iter().map(|j| j.size).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::renormalize_energy;
    use crate::poincare::orbit::find_periodic_orbit;
    use crate::state::CotangentState;
    use crate::twist::map::TwistMapParams;

    fn flat_setup() -> (MetricField, ClosedOrbit, TransversalSection, FlatShearMap) {
        let m = MetricField::standard_flat_torus();
        let fs = FlowSettings::default();
        let s = renormalize_energy(&m, &CotangentState::new([0.5, 0.0], Vector2::new(1.0, 0.0))).unwrap();
        let o = find_periodic_orbit(&m, &s, TAU, &fs).unwrap();
        let sec = TransversalSection::through(&m, &o.start, o.section.coordinate).unwrap();
        let h = FlatShearMap::new(&m, &sec).unwrap();
        (m, o, sec, h)
    }

    #[test]
    fn flat_shear_round_trip() {
        let (_, _, _, h) = flat_setup();
        let p = TwistPoint::new(0.3, 0.7);
        let q = h.to_annulus(&h.to_section(&p));
        assert!((q.theta - p.theta).abs() < 1e-14 && (q.r - p.r).abs() < 1e-14);
    }

    #[test]
    fn zero_jump_orbit_embeds_at_integrator_scale() {
        let (m, o, sec, h) = flat_setup();
        let tw = TwistMapParams::integrable(1.0, 0.0, 1.0).unwrap();
        let po = TwistPseudoOrbit::true_orbit(&tw, TwistPoint::new(0.1, 0.2), 12);
        let e = embed_as_pseudo_geodesic(&m, &o, &sec, &po, &h, &FlowSettings::default()).unwrap();
        assert!(e.delta < 1e-9, "δ = {:e}", e.delta);
        assert!(e.validation.valid);
        let expect = TAU * (1.0f64 + 0.04).sqrt();
        assert!(e.return_times.iter().all(|t| (t - expect).abs() < 1e-9));
    }

    #[test]
    fn ladder_jumps_bounded_by_lipschitz() {
        use crate::twist::circle::InvariantCircleEstimate;
        use crate::twist::pseudo::{build_climbing_pseudo_orbit, ClimbOptions};
        let (m, o, sec, h) = flat_setup();
        let tw = TwistMapParams::integrable(1.0, 0.0, 1.0).unwrap();
        let c: Vec<_> = [0.2, 0.21, 0.22].iter().map(|&r| InvariantCircleEstimate::flat(&tw, r, 32)).collect();
        let opts = ClimbOptions { min_spacing: 3, tail: 3, ..ClimbOptions::default() };
        let po = build_climbing_pseudo_orbit(&tw, &c, 0.004, &opts).unwrap();
        let e = embed_as_pseudo_geodesic(&m, &o, &sec, &po, &h, &FlowSettings::default()).unwrap();
        assert!(e.delta <= e.lipschitz * e.max_twist_jump * 1.01 + 1e-9);
        assert!(e.delta > 0.0);
    }
}
