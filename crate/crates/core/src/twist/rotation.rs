//! Rotation numbers from lifted angular increments.

use serde::{Deserialize, Serialize};

use super::map::{TwistMapParams, TwistPoint};
use crate::error::{GeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    /// Weighted Birkhoff average; converges much faster than `1/N` on
    /// quasi-periodic orbits.
    pub rho: f64,
    /// Plain Birkhoff average of the increments.
    pub birkhoff: f64,
    /// `1/N` bound for the plain average.
    pub error_bar: f64,
    pub iterations: usize,
    /// The orbit left the annulus before `N` steps.
    pub partial: bool,
}

/// `exp(-1/(s(1-s)))` on `(0, 1)`.
#[inline]
fn bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

/// Averages of `θ_{n+1} - θ_n` (lifted) along `N` steps from `point`,
/// without checking the annulus.
pub(crate) fn rotation_unchecked(params: &TwistMapParams, point: &TwistPoint, n: usize) -> (f64, f64) {
    let mut x = *point;
    let mut plain = 0.0;
    let mut wsum = 0.0;
    let mut acc = 0.0;
    for i in 0..n {
        let (d, r1) = params.advance(x.theta, x.r);
        plain += d;
        let w = bump((i as f64 + 0.5) / n as f64);
        acc += w * d;
        wsum += w;
        x = TwistPoint::new((x.theta + d).rem_euclid(1.0), r1);
    }
    (acc / wsum, plain / n as f64)
}

pub fn rotation_number(params: &TwistMapParams, point: &TwistPoint, n: usize) -> Result<RotationEstimate> {
    if n == 0 {
        return Err(GeoError::InvalidInput("need at least one iteration".into()));
    }
    if !params.contains(point.r) {
        return Err(GeoError::Domain(format!("start r = {} outside the annulus", point.r)));
    }
    let mut x = *point;
    let mut plain = 0.0;
    let mut wsum = 0.0;
    let mut acc = 0.0;
    let mut done = 0;
    for i in 0..n {
        let (d, r1) = params.advance(x.theta, x.r);
        if !(d.is_finite() && params.contains(r1)) {
            break;
        }
        plain += d;
        let w = bump((i as f64 + 0.5) / n as f64);
        acc += w * d;
        wsum += w;
        x = TwistPoint::new((x.theta + d).rem_euclid(1.0), r1);
        done += 1;
    }
    if done == 0 {
        return Err(GeoError::Domain("orbit left the annulus immediately".into()));
    }
    let birkhoff = plain / done as f64;
    let partial = done < n;
    Ok(RotationEstimate {
        // the weight window assumes the full run
        rho: if partial || wsum == 0.0 { birkhoff } else { acc / wsum },
        birkhoff,
        error_bar: 1.0 / done as f64,
        iterations: done,
        partial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: f64 = 0.618_033_988_749_894_9;

    #[test]
    fn integrable_rotation_is_tau_r() {
        let p = TwistMapParams::integrable(1.7, 0.0, 1.0).unwrap();
        let e = rotation_number(&p, &TwistPoint::new(0.3, 0.4), 1000).unwrap();
        assert!((e.birkhoff - 1.7 * 0.4).abs() <= e.error_bar);
        assert!((e.rho - 1.7 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn rigid_golden_rotation() {
        let p = TwistMapParams::integrable(1.0, 0.0, 1.0).unwrap();
        let e = rotation_number(&p, &TwistPoint::new(0.0, GOLDEN), 10_000).unwrap();
        assert!((e.birkhoff - GOLDEN).abs() <= e.error_bar);
        assert!((e.rho - 0.618_033_988_7).abs() < 1e-10);
    }

    #[test]
    fn partial_estimate_flagged() {
        let p = TwistMapParams::standard_map(1.5, 0.0, 0.3).unwrap();
        let e = rotation_number(&p, &TwistPoint::new(0.5, 0.29), 1000).unwrap();
        assert!(e.partial && e.iterations >= 1 && e.iterations < 1000);
    }

    #[test]
    fn weights_vanish_at_ends() {
        assert_eq!(bump(0.0), 0.0);
        assert_eq!(bump(1.0), 0.0);
        assert!(bump(0.5) > 0.0);
    }
}
