//! Floquet type of a 2×2 area-preserving linear map.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{GeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyOptions {
    /// Largest denominator tried by the rational sieve.
    pub denominator_bound: u32,
    /// `|ρ - p/q|` at or below this counts as rational.
    pub sieve_tol: f64,
    /// Half-width of the parabolic band around `|trace| = 2`.
    pub band: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            denominator_bound: 64,
            sieve_tol: 1e-10,
            band: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum OrbitKind {
    Hyperbolic {
        multiplier: f64,
    },
    EllipticIrrational {
        rotation_number: f64,
    },
    EllipticRationalOrUnresolved {
        rotation_number: f64,
        /// The detected `p/q` (0/0 when none was singled out).
        numerator: u32,
        denominator: u32,
        denominator_bound: u32,
    },
    Parabolic {
        sign: i8,
    },
}

impl OrbitKind {
    pub fn name(&self) -> &'static str {
        match self {
            OrbitKind::Hyperbolic { .. } => "Hyperbolic",
            OrbitKind::EllipticIrrational { .. } => "EllipticIrrational",
            OrbitKind::EllipticRationalOrUnresolved { .. } => "EllipticRationalOrUnresolved",
            OrbitKind::Parabolic { .. } => "Parabolic",
        }
    }

    pub fn is_hyperbolic(&self) -> bool {
        matches!(self, OrbitKind::Hyperbolic { .. })
    }

    pub fn is_elliptic(&self) -> bool {
        matches!(
            self,
            OrbitKind::EllipticIrrational { .. } | OrbitKind::EllipticRationalOrUnresolved { .. }
        )
    }

    pub fn rotation_number(&self) -> Option<f64> {
        match *self {
            OrbitKind::EllipticIrrational { rotation_number }
            | OrbitKind::EllipticRationalOrUnresolved { rotation_number, .. } => Some(rotation_number),
            _ => None,
        }
    }

    pub fn multiplier(&self) -> Option<f64> {
        match *self {
            OrbitKind::Hyperbolic { multiplier } => Some(multiplier),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitClassification {
    pub kind: OrbitKind,
    pub trace: f64,
    pub determinant: f64,
    /// Eigenvalues as `(re, im)` pairs.
    pub eigenvalues: [(f64, f64); 2],
}

/// Classifies `dp` by its trace.
///
/// `|tr| > 2 + band` is hyperbolic with `λ + 1/λ = tr`, `|λ| > 1`;
/// `|tr| < 2 - band` is elliptic with `ρ = arccos(tr/2)/2π ∈ (0, 1/2)`;
/// everything else is parabolic.
pub fn classify_orbit(dp: &Matrix2<f64>, opts: &ClassifyOptions) -> Result<OrbitClassification> {
    let det = dp.determinant();
    if !det.is_finite() || (det - 1.0).abs() > 1e-4 {
        return Err(GeoError::InvalidInput(format!(
            "not area preserving: det = {det:.8}"
        )));
    }
    let tr = dp.trace();
    Ok(classify_trace(tr, det, opts))
}

pub fn classify_trace(tr: f64, det: f64, opts: &ClassifyOptions) -> OrbitClassification {
    let (kind, eigenvalues) = if tr.abs() > 2.0 + opts.band {
        let s = tr.signum();
        let lam = 0.5 * (tr + s * (tr * tr - 4.0).sqrt());
        (OrbitKind::Hyperbolic { multiplier: lam }, [(lam, 0.0), (1.0 / lam, 0.0)])
    } else if tr.abs() < 2.0 - opts.band {
        let rho = (0.5 * tr).acos() / TAU;
        let im = (1.0 - 0.25 * tr * tr).sqrt();
        let eig = [(0.5 * tr, im), (0.5 * tr, -im)];
        let kind = match rational_sieve(rho, opts.denominator_bound, opts.sieve_tol) {
            Some((p, q)) => OrbitKind::EllipticRationalOrUnresolved {
                rotation_number: rho,
                numerator: p,
                denominator: q,
                denominator_bound: opts.denominator_bound,
            },
            None => OrbitKind::EllipticIrrational { rotation_number: rho },
        };
        (kind, eig)
    } else {
        let sign = if tr >= 0.0 { 1 } else { -1 };
        let e = f64::from(sign);
        (OrbitKind::Parabolic { sign }, [(e, 0.0), (e, 0.0)])
    };
    OrbitClassification {
        kind,
        trace: tr,
        determinant: det,
        eigenvalues,
    }
}

/// Continued-fraction convergents `p/q` of `x ∈ [0, 1)` with `q ≤ bound`,
/// returning the first within `tol`. For `tol < 1/(2·bound²)` every such
/// fraction is a convergent, so checking convergents is exhaustive.
pub fn rational_sieve(x: f64, bound: u32, tol: f64) -> Option<(u32, u32)> {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > u64::from(bound) {
            break;
        }
        if (x - p2 as f64 / q2 as f64).abs() <= tol {
            return Some((p2 as u32, q2 as u32));
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a as f64;
        if frac <= 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    if tol >= 0.5 / f64::from(bound).powi(2) {
        // tolerance too loose for the convergent argument; check every denominator
        for q in 1..=bound {
            let p = (x * f64::from(q)).round();
            if (x - p / f64::from(q)).abs() <= tol {
                return Some((p as u32, q));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn brute(x: f64, bound: u32, tol: f64) -> bool {
        (1..=bound).any(|q| {
            let p = (x * f64::from(q)).round();
            (x - p / f64::from(q)).abs() <= tol
        })
    }

    #[test]
    fn hyperbolic_multiplier() {
        let t = 2.0 * (2.0 * PI).cosh();
        let c = classify_trace(t, 1.0, &ClassifyOptions::default());
        let lam = c.kind.multiplier().unwrap();
        assert!((lam / (2.0 * PI).exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_trace_hyperbolic() {
        let c = classify_trace(-3.0, 1.0, &ClassifyOptions::default());
        let lam = c.kind.multiplier().unwrap();
        assert!(lam < -1.0 && (lam + 1.0 / lam + 3.0).abs() < 1e-12);
    }

    #[test]
    fn trace_two_is_parabolic() {
        let c = classify_orbit(&Matrix2::identity(), &ClassifyOptions::default()).unwrap();
        assert_eq!(c.kind, OrbitKind::Parabolic { sign: 1 });
        let c = classify_trace(-2.0, 1.0, &ClassifyOptions::default());
        assert_eq!(c.kind, OrbitKind::Parabolic { sign: -1 });
    }

    #[test]
    fn outer_equator_trace_is_irrational() {
        let t = 2.0 * (2.0 * PI * 3f64.sqrt()).cos();
        let c = classify_trace(t, 1.0, &ClassifyOptions::default());
        let rho = c.kind.rotation_number().unwrap();
        assert!(matches!(c.kind, OrbitKind::EllipticIrrational { .. }));
        // ρ ≡ ±√3 (mod 1)
        let frac = 3f64.sqrt().fract();
        assert!((rho - frac).abs() < 1e-12 || (rho - (1.0 - frac)).abs() < 1e-12);
    }

    #[test]
    fn rational_rotation_detected() {
        let t = 2.0 * (2.0 * PI / 5.0).cos();
        let c = classify_trace(t, 1.0, &ClassifyOptions::default());
        match c.kind {
            OrbitKind::EllipticRationalOrUnresolved {
                numerator, denominator, ..
            } => assert_eq!((numerator, denominator), (1, 5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn det_far_from_one_rejected() {
        let dp = Matrix2::new(2.0, 0.0, 0.0, 1.0);
        assert!(classify_orbit(&dp, &ClassifyOptions::default()).is_err());
    }

    #[test]
    fn sieve_matches_brute_force() {
        let mut x = 0.1234567f64;
        for _ in 0..5000 {
            x = (x * 997.0 + 0.3187).fract();
            for &v in &[x, (x * 40.0).round() / 40.0, (x * 63.0).round() / 63.0 + 3e-11] {
                assert_eq!(rational_sieve(v, 64, 1e-10).is_some(), brute(v, 64, 1e-10), "{v}");
            }
        }
    }

    #[test]
    fn loose_tolerance_falls_back_to_brute_force() {
        for k in 0..1000 {
            let x = k as f64 / 1000.0;
            assert_eq!(rational_sieve(x, 10, 1e-2).is_some(), brute(x, 10, 1e-2), "{x}");
        }
    }
}
