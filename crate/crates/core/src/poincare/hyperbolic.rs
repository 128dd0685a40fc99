//! Uniform-hyperbolicity certificates for finite sets of closed orbits.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::classify::{classify_orbit, ClassifyOptions};
use super::orbit::ClosedOrbit;
use crate::error::{GeoError, Result};

/// Unit eigenvector of a 2×2 matrix for a real eigenvalue, sign-normalized
/// so that its largest component is positive.
fn eigenvector(dp: &Matrix2<f64>, lam: f64) -> Vector2<f64> {
    let (a, b, c, d) = (dp[(0, 0)], dp[(0, 1)], dp[(1, 0)], dp[(1, 1)]);
    let v1 = Vector2::new(b, lam - a);
    let v2 = Vector2::new(lam - d, c);
    let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
    let v = v / v.norm();
    let big = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
    if big < 0.0 {
        -v
    } else {
        v
    }
}

/// Unit stable and unstable eigen-directions of a hyperbolic `dp`.
pub fn local_manifold_seeds(dp: &Matrix2<f64>) -> Result<(Vector2<f64>, Vector2<f64>)> {
    let c = classify_orbit(dp, &ClassifyOptions::default())?;
    let lam = c
        .kind
        .multiplier()
        .ok_or_else(|| GeoError::Refused(format!("orbit is {}, not hyperbolic", c.kind.name())))?;
    Ok((eigenvector(dp, 1.0 / lam), eigenvector(dp, lam)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedOrbit {
    pub period: f64,
    pub multiplier: f64,
    pub stable: [f64; 2],
    pub unstable: [f64; 2],
    /// `‖DP v_s‖^{m/ℓ}`.
    pub contraction: f64,
    /// `‖DP^{-1} v_u‖^{m/ℓ}`.
    pub expansion_inv: f64,
    pub margin_stable: f64,
    pub margin_unstable: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityCertificate {
    pub theta: f64,
    pub m: f64,
    pub holds: bool,
    pub empty: bool,
    pub orbits: Vec<CertifiedOrbit>,
}

/// Checks `‖DP^m|E^s‖ ≤ θ` and `‖DP^{-m}|E^u‖ ≤ θ` for every orbit, scaling
/// each orbit's one-period rates to time `m` by fractional powers.
pub fn certify_hyperbolic_set(
    orbits: &[(ClosedOrbit, Matrix2<f64>)],
    theta: f64,
    m: f64,
) -> Result<HyperbolicityCertificate> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(GeoError::InvalidInput(format!("theta must lie in (0, 1), got {theta}")));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(GeoError::InvalidInput(format!("m must be > 0, got {m}")));
    }
    let mut out = Vec::with_capacity(orbits.len());
    for (orbit, dp) in orbits {
        let (vs, vu) = local_manifold_seeds(dp).map_err(|e| match e {
            GeoError::Refused(s) => GeoError::Refused(format!("orbit of period {:.6}: {s}", orbit.period)),
            other => other,
        })?;
        let lam = classify_orbit(dp, &ClassifyOptions::default())?
            .kind
            .multiplier()
            .expect("hyperbolic");
        let inv = dp
            .try_inverse()
            .ok_or_else(|| GeoError::Refused("singular linear Poincaré map".into()))?;
        let power = m / orbit.period;
        let contraction = (dp * vs).norm().powf(power);
        let expansion_inv = (inv * vu).norm().powf(power);
        out.push(CertifiedOrbit {
            period: orbit.period,
            multiplier: lam,
            stable: [vs[0], vs[1]],
            unstable: [vu[0], vu[1]],
            contraction,
            expansion_inv,
            margin_stable: theta - contraction,
            margin_unstable: theta - expansion_inv,
        });
    }
    let holds = out.iter().all(|o| o.margin_stable >= 0.0 && o.margin_unstable >= 0.0);
    Ok(HyperbolicityCertificate {
        theta,
        m,
        holds,
        empty: out.is_empty(),
        orbits: out,
    })
}
