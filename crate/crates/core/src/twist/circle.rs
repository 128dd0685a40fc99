//! Invariant-circle detection by bisection on the rotation number along a
//! vertical line, followed by a graph fit of the resulting orbit.

use serde::{Deserialize, Serialize};

use super::map::{circle_distance, TwistMapParams, TwistPoint};
use super::rotation::rotation_unchecked;
use crate::error::{GeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircleOptions {
    /// Angle of the vertical line searched.
    pub theta0: f64,
    /// Iterations per rotation-number evaluation.
    pub rho_iters: usize,
    pub bisection_steps: usize,
    /// Orbit length used for the graph fit.
    pub fit_iters: usize,
    /// Uniform `θ` grid of the reported graph.
    pub grid: usize,
}

impl Default for CircleOptions {
    fn default() -> Self {
        Self {
            theta0: 0.0,
            rho_iters: 20_000,
            bisection_steps: 60,
            fit_iters: 200_000,
            grid: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCircleEstimate {
    pub rotation_number: f64,
    /// Uniform grid `θ_j = j / len`.
    pub graph_samples: Vec<f64>,
    /// `sup_j |π Q(θ_j, ψ(θ_j)) - ψ(θ'_j)|`.
    pub invariance_residual: f64,
    pub lipschitz_bound: f64,
    pub anchor: TwistPoint,
    /// Dense sorted orbit used for interpolation.
    #[serde(skip)]
    nodes: Vec<(f64, f64)>,
}

/// Orbit whose radial excursion rules out a graph at the target rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportWitness {
    pub start: TwistPoint,
    pub iterations: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Band the orbit was supposed to stay in (graph fit amplitude plus tolerance).
    pub residual: f64,
    pub rotation_number: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum CircleDetection {
    Found(InvariantCircleEstimate),
    AbsentAtResolution(TransportWitness),
}

impl CircleDetection {
    pub fn circle(&self) -> Option<&InvariantCircleEstimate> {
        match self {
            Self::Found(c) => Some(c),
            Self::AbsentAtResolution(_) => None,
        }
    }
}

fn interp_nodes(nodes: &[(f64, f64)], theta: f64) -> f64 {
    let t = theta.rem_euclid(1.0);
    let n = nodes.len();
    if n == 1 {
        return nodes[0].1;
    }
    let k = nodes.partition_point(|&(s, _)| s <= t);
    let (a, b) = if k == 0 || k == n {
        let (l, h) = (nodes[n - 1], nodes[0]);
        (l, (h.0 + 1.0, h.1))
    } else {
        (nodes[k - 1], nodes[k])
    };
    let tt = if t < a.0 { t + 1.0 } else { t };
    let lam = if b.0 > a.0 { (tt - a.0) / (b.0 - a.0) } else { 0.0 };
    a.1 + lam * (b.1 - a.1)
}

impl InvariantCircleEstimate {
    /// Builds the graph from orbit points sorted by angle.
    pub(crate) fn from_orbit(params: &TwistMapParams, anchor: TwistPoint, rho: f64, pts: Vec<TwistPoint>, grid: usize) -> Self {
        let mut nodes: Vec<(f64, f64)> = pts.iter().map(|p| (p.theta, p.r)).collect();
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        nodes.dedup_by(|a, b| a.0 == b.0);
        let mut lip: f64 = 0.0;
        for w in nodes.windows(2) {
            let dt = w[1].0 - w[0].0;
            if dt > 0.0 {
                lip = lip.max((w[1].1 - w[0].1).abs() / dt);
            }
        }
        let mut est = Self {
            rotation_number: rho,
            graph_samples: Vec::new(),
            invariance_residual: 0.0,
            lipschitz_bound: lip,
            anchor,
            nodes,
        };
        est.graph_samples = (0..grid).map(|j| est.psi(j as f64 / grid as f64)).collect();
        est.invariance_residual = (0..grid)
            .map(|j| {
                let t = j as f64 / grid as f64;
                let img = params.apply(&TwistPoint::new(t, est.graph_samples[j]));
                (img.r - est.psi(img.theta)).abs()
            })
            .fold(0.0, f64::max);
        if !est.invariance_residual.is_finite() {
            est.invariance_residual = f64::INFINITY;
        }
        est
    }

    /// Exact circle `r = r0` of an integrable map.
    pub fn flat(params: &TwistMapParams, r0: f64, grid: usize) -> Self {
        let anchor = TwistPoint::new(0.0, r0);
        Self::from_orbit(params, anchor, params.tau() * r0, vec![anchor], grid)
    }

    /// `ψ(θ)`, interpolating the fitted orbit.
    pub fn psi(&self, theta: f64) -> f64 {
        interp_nodes(&self.nodes, theta)
    }

    pub fn mean_radius(&self) -> f64 {
        self.graph_samples.iter().sum::<f64>() / self.graph_samples.len() as f64
    }

    /// Set distance `min max(|Δθ|, |Δr|)` between the two graphs on their grids.
    pub fn distance(&self, other: &Self) -> f64 {
        let (n, m) = (self.graph_samples.len(), other.graph_samples.len());
        let mut best = f64::INFINITY;
        for i in 0..n {
            let ti = i as f64 / n as f64;
            for j in 0..m {
                let tj = j as f64 / m as f64;
                let d = circle_distance(ti, tj).max((self.graph_samples[i] - other.graph_samples[j]).abs());
                best = best.min(d);
            }
        }
        best
    }
}

/// Looks for an invariant circle with rotation number `target_rho` and
/// invariance residual at most `tolerance`.
pub fn detect_invariant_circle(
    params: &TwistMapParams,
    target_rho: f64,
    tolerance: f64,
    opts: &CircleOptions,
) -> Result<CircleDetection> {
    if !(tolerance > 0.0) {
        return Err(GeoError::InvalidInput("tolerance must be positive".into()));
    }
    if opts.rho_iters == 0 || opts.fit_iters == 0 || opts.grid < 2 {
        return Err(GeoError::InvalidInput("circle options need positive iteration counts".into()));
    }
    let sign = params.tau().signum();
    let rho = |r: f64| rotation_unchecked(params, &TwistPoint::new(opts.theta0, r), opts.rho_iters).0;
    let (mut lo, mut hi) = (params.r_lo, params.r_hi);
    let (flo, fhi) = (sign * (rho(lo) - target_rho), sign * (rho(hi) - target_rho));
    if !(flo <= 0.0 && fhi >= 0.0) {
        return Err(GeoError::InvalidInput(format!(
            "target rotation {target_rho} outside the twist range of the annulus"
        )));
    }
    for _ in 0..opts.bisection_steps {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if sign * (rho(mid) - target_rho) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let anchor = TwistPoint::new(opts.theta0.rem_euclid(1.0), 0.5 * (lo + hi));
    let mut pts = Vec::with_capacity(opts.fit_iters);
    let mut x = anchor;
    for _ in 0..opts.fit_iters {
        pts.push(x);
        x = params.apply(&x);
        if !x.r.is_finite() {
            break;
        }
    }
    let (r_min, r_max) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.r), b.max(p.r)));
    let measured = rotation_unchecked(params, &anchor, opts.rho_iters).0;
    if params.is_integrable() {
        return Ok(CircleDetection::Found(InvariantCircleEstimate::flat(params, anchor.r, opts.grid)));
    }
    let est = InvariantCircleEstimate::from_orbit(params, anchor, measured, pts.clone(), opts.grid);
    if est.invariance_residual <= tolerance && r_min >= params.r_lo && r_max <= params.r_hi {
        Ok(CircleDetection::Found(est))
    } else {
        Ok(CircleDetection::AbsentAtResolution(TransportWitness {
            start: anchor,
            iterations: pts.len(),
            r_min,
            r_max,
            residual: est.invariance_residual,
            rotation_number: measured,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: f64 = 0.618_033_988_749_894_9;

    #[test]
    fn integrable_circle_is_exact() {
        let p = TwistMapParams::integrable(2.0, 0.0, 1.0).unwrap();
        let c = detect_invariant_circle(&p, 0.7, 1e-10, &CircleOptions::default()).unwrap();
        let c = c.circle().unwrap();
        assert!((c.anchor.r - 0.35).abs() < 1e-12);
        assert_eq!(c.invariance_residual, 0.0);
        assert!(c.graph_samples.iter().all(|&r| r == c.anchor.r));
    }

    #[test]
    fn golden_circle_at_small_k() {
        let p = TwistMapParams::standard_map(0.3, 0.0, 1.0).unwrap();
        let d = detect_invariant_circle(&p, GOLDEN, 1e-8, &CircleOptions::default()).unwrap();
        let c = d.circle().expect("circle");
        assert!(c.invariance_residual <= 1e-8, "{}", c.invariance_residual);
        assert!((c.rotation_number - GOLDEN).abs() < 1e-9);
    }

    #[test]
    fn golden_circle_absent_past_breakup() {
        let p = TwistMapParams::standard_map(1.2, 0.0, 1.0).unwrap();
        let d = detect_invariant_circle(&p, GOLDEN, 1e-8, &CircleOptions::default()).unwrap();
        match d {
            CircleDetection::AbsentAtResolution(w) => assert!(w.r_max - w.r_min > 0.1),
            CircleDetection::Found(c) => panic!("unexpected circle, residual {}", c.invariance_residual),
        }
    }
}
