//! Area-preserving twist maps of the annulus `𝕋 × [r_lo, r_hi]`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{GeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TwistFamily {
    /// `(θ + τr, r)`.
    Integrable { tau: f64 },
    /// Normal form with `F, G = O(r)` from the generating function
    /// `S(θ, r') = θr' + τr'²/2 + b r'² sin(2πθ)/(2π)`.
    NormalForm { tau: f64, b: f64 },
    /// Chirikov standard map, generated by
    /// `h(θ, θ') = (θ' - θ)²/2 + k cos(2πθ)/(4π²)`:
    /// `r' = r + k sin(2πθ)/(2π)`, `θ' = θ + r'`.
    StandardMap { k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistMapParams {
    pub family: TwistFamily,
    pub r_lo: f64,
    pub r_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistPoint {
    pub theta: f64,
    pub r: f64,
}

impl TwistPoint {
    pub fn new(theta: f64, r: f64) -> Self {
        Self { theta, r }
    }
}

/// One map application. `inside` is false when the image left the annulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistStep {
    pub point: TwistPoint,
    /// Unreduced angular advance `θ' - θ`.
    pub advance: f64,
    pub jacobian: Matrix2<f64>,
    pub inside: bool,
}

/// Angular distance on `ℝ/ℤ`.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// `max(|Δθ|_𝕋, |Δr|)`.
pub fn annulus_distance(a: &TwistPoint, b: &TwistPoint) -> f64 {
    circle_distance(a.theta, b.theta).max((a.r - b.r).abs())
}

impl TwistMapParams {
    pub fn new(family: TwistFamily, r_lo: f64, r_hi: f64) -> Result<Self> {
        let p = Self { family, r_lo, r_hi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_lo.is_finite() && self.r_hi.is_finite() && self.r_lo < self.r_hi) {
            return Err(GeoError::InvalidInput(format!(
                "annulus needs r_lo < r_hi, got [{}, {}]",
                self.r_lo, self.r_hi
            )));
        }
        match self.family {
            TwistFamily::Integrable { tau } | TwistFamily::NormalForm { tau, .. } if !(tau != 0.0 && tau.is_finite()) => {
                Err(GeoError::InvalidInput("twist τ must be nonzero".into()))
            }
            TwistFamily::NormalForm { b, .. } if !b.is_finite() => Err(GeoError::InvalidInput("b must be finite".into())),
            TwistFamily::NormalForm { b, .. } if self.r_lo < 0.0 || 4.0 * b.abs() * self.r_hi >= 1.0 => {
                Err(GeoError::InvalidInput(
                    "normal form needs 0 ≤ r_lo and 4|b| r_hi < 1 for the generating function to be defined".into(),
                ))
            }
            TwistFamily::StandardMap { k } if !k.is_finite() => Err(GeoError::InvalidInput("k must be finite".into())),
            _ => Ok(()),
        }
    }

    pub fn integrable(tau: f64, r_lo: f64, r_hi: f64) -> Result<Self> {
        Self::new(TwistFamily::Integrable { tau }, r_lo, r_hi)
    }

    pub fn standard_map(k: f64, r_lo: f64, r_hi: f64) -> Result<Self> {
        Self::new(TwistFamily::StandardMap { k }, r_lo, r_hi)
    }

    pub fn normal_form(tau: f64, b: f64, r_lo: f64, r_hi: f64) -> Result<Self> {
        Self::new(TwistFamily::NormalForm { tau, b }, r_lo, r_hi)
    }

    /// Twist coefficient `∂θ'/∂r` at `r = 0`.
    pub fn tau(&self) -> f64 {
        match self.family {
            TwistFamily::Integrable { tau } | TwistFamily::NormalForm { tau, .. } => tau,
            TwistFamily::StandardMap { .. } => 1.0,
        }
    }

    pub fn is_integrable(&self) -> bool {
        matches!(self.family, TwistFamily::Integrable { .. })
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.r_lo && r <= self.r_hi
    }

    /// `(θ' - θ, r')` without reducing `θ`; NaN where the map is undefined.
    #[inline]
    pub fn advance(&self, theta: f64, r: f64) -> (f64, f64) {
        match self.family {
            TwistFamily::Integrable { tau } => (tau * r, r),
            TwistFamily::StandardMap { k } => {
                let r1 = r + k * (TAU * theta).sin() / TAU;
                (r1, r1)
            }
            TwistFamily::NormalForm { tau, b } => {
                let (s, c) = (TAU * theta).sin_cos();
                let disc = 1.0 + 4.0 * b * c * r;
                if !(disc > 0.0) {
                    return (f64::NAN, f64::NAN);
                }
                let r1 = 2.0 * r / (1.0 + disc.sqrt());
                (tau * r1 + b / PI * r1 * s, r1)
            }
        }
    }

    /// Image with `θ` reduced to `[0, 1)`.
    #[inline]
    pub fn apply(&self, p: &TwistPoint) -> TwistPoint {
        let (d, r1) = self.advance(p.theta, p.r);
        TwistPoint::new((p.theta + d).rem_euclid(1.0), r1)
    }

    /// `∂(θ', r')/∂(θ, r)`.
    pub fn jacobian(&self, p: &TwistPoint) -> Matrix2<f64> {
        match self.family {
            TwistFamily::Integrable { tau } => Matrix2::new(1.0, tau, 0.0, 1.0),
            TwistFamily::StandardMap { k } => {
                let kc = k * (TAU * p.theta).cos();
                Matrix2::new(1.0 + kc, 1.0, kc, 1.0)
            }
            TwistFamily::NormalForm { tau, b } => {
                let (s, c) = (TAU * p.theta).sin_cos();
                let (_, r1) = self.advance(p.theta, p.r);
                // r = r' + b cos(2πθ) r'² implicitly
                let denom = 1.0 + 2.0 * b * c * r1;
                let r1_r = 1.0 / denom;
                let r1_t = TAU * b * s * r1 * r1 / denom;
                let coef = tau + b * s / PI;
                Matrix2::new(
                    1.0 + coef * r1_t + 2.0 * b * c * r1,
                    coef * r1_r,
                    r1_t,
                    r1_r,
                )
            }
        }
    }
}

/// One step with jacobian and domain-exit flag.
pub fn twist_step(params: &TwistMapParams, point: &TwistPoint) -> Result<TwistStep> {
    if !params.contains(point.r) || !point.theta.is_finite() {
        return Err(GeoError::Domain(format!(
            "point r = {} outside the annulus [{}, {}]",
            point.r, params.r_lo, params.r_hi
        )));
    }
    let (d, r1) = params.advance(point.theta, point.r);
    if !(d.is_finite() && r1.is_finite()) {
        return Err(GeoError::Domain("map undefined at this point".into()));
    }
    let image = TwistPoint::new((point.theta + d).rem_euclid(1.0), r1);
    Ok(TwistStep {
        point: image,
        advance: d,
        jacobian: params.jacobian(point),
        inside: params.contains(r1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_jacobian(p: &TwistMapParams, x: &TwistPoint) -> Matrix2<f64> {
        let h = 1e-6;
        let f = |t: f64, r: f64| {
            let (d, r1) = p.advance(t, r);
            (t + d, r1)
        };
        let (a, b) = (f(x.theta + h, x.r), f(x.theta - h, x.r));
        let (c, d) = (f(x.theta, x.r + h), f(x.theta, x.r - h));
        Matrix2::new(
            (a.0 - b.0) / (2.0 * h),
            (c.0 - d.0) / (2.0 * h),
            (a.1 - b.1) / (2.0 * h),
            (c.1 - d.1) / (2.0 * h),
        )
    }

    #[test]
    fn normal_form_fixes_r_zero() {
        let p = TwistMapParams::normal_form(1.3, 0.2, 0.0, 1.0).unwrap();
        for t in [0.0, 0.17, 0.5, 0.93] {
            let s = twist_step(&p, &TwistPoint::new(t, 0.0)).unwrap();
            assert_eq!(s.point, TwistPoint::new(t, 0.0));
        }
    }

    #[test]
    fn integrable_iterates_compose() {
        let p = TwistMapParams::integrable(0.7, 0.0, 2.0).unwrap();
        let mut x = TwistPoint::new(0.1, 0.45);
        for _ in 0..25 {
            x = p.apply(&x);
        }
        assert!(circle_distance(x.theta, 0.1 + 25.0 * 0.7 * 0.45) < 1e-12);
        assert_eq!(x.r, 0.45);
    }

    #[test]
    fn exit_is_flagged_not_raised() {
        let p = TwistMapParams::standard_map(0.9, 0.0, 0.1).unwrap();
        let s = twist_step(&p, &TwistPoint::new(0.25, 0.09)).unwrap();
        assert!(!s.inside);
        assert!(twist_step(&p, &TwistPoint::new(0.25, 0.5)).is_err());
    }

    #[test]
    fn standard_map_area_preserving_at_many_points() {
        let p = TwistMapParams::standard_map(0.9, -1.0, 2.0).unwrap();
        for i in 0..100 {
            for j in 0..100 {
                let x = TwistPoint::new(i as f64 / 100.0, -1.0 + 3.0 * j as f64 / 100.0);
                assert!((p.jacobian(&x).determinant() - 1.0).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn jacobians_are_exact_and_unimodular(
            t in 0.0f64..1.0, r in 0.0f64..1.0, tau in 0.2f64..2.0, b in -0.2f64..0.2, k in 0.0f64..2.0,
        ) {
            for p in [
                TwistMapParams::integrable(tau, 0.0, 1.0).unwrap(),
                TwistMapParams::normal_form(tau, b, 0.0, 1.0).unwrap(),
                TwistMapParams::standard_map(k, 0.0, 1.0).unwrap(),
            ] {
                let x = TwistPoint::new(t, r);
                let j = p.jacobian(&x);
                prop_assert!((j.determinant() - 1.0).abs() < 1e-10);
                prop_assert!((j - fd_jacobian(&p, &x)).amax() < 1e-6);
            }
        }
    }
}
