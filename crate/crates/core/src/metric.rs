//! Riemannian metrics on single-chart surfaces, written through the
//! contravariant matrix field `A(x)` (the inverse metric).
//!
//! `g_x(v, v) = <A(x)^{-1} v, v>` and the generated Hamiltonian is
//! `H(x, p) = ½ <A(x) p, p>`. Every family provides `A` together with its
//! first and second coordinate derivatives in closed form, which the
//! integrator needs for the variational equation.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::chart::{Interval, SurfaceChart};
use crate::error::{GeoError, Result};
use crate::state::CotangentState;

/// `A`, `∂A/∂x_i` and `∂²A/∂x_i∂x_j` at one chart point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricJet {
    pub a: Matrix2<f64>,
    pub da: [Matrix2<f64>; 2],
    pub dda: [[Matrix2<f64>; 2]; 2],
}

impl MetricJet {
    fn constant(a: Matrix2<f64>) -> Self {
        Self {
            a,
            da: [Matrix2::zeros(); 2],
            dda: [[Matrix2::zeros(); 2]; 2],
        }
    }
}

/// Profile of a surface of revolution, `ds² = minor² dv² + f(v)² du²` with
/// `f(v) = major + minor·cos v + ripple·cos 2v`.
///
/// `v` is an angle; arc length along a meridian is `minor·v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevolutionProfile {
    pub major: f64,
    pub minor: f64,
    #[serde(default)]
    pub ripple: f64,
}

impl RevolutionProfile {
    pub fn torus(major: f64, minor: f64) -> Self {
        Self {
            major,
            minor,
            ripple: 0.0,
        }
    }

    /// `(f, f', f'')` at `v`.
    pub fn radius_jet(&self, v: f64) -> (f64, f64, f64) {
        let (s1, c1) = v.sin_cos();
        let (s2, c2) = (2.0 * v).sin_cos();
        let f = self.major + self.minor * c1 + self.ripple * c2;
        let f1 = -self.minor * s1 - 2.0 * self.ripple * s2;
        let f2 = -self.minor * c1 - 4.0 * self.ripple * c2;
        (f, f1, f2)
    }

    /// Lower bound on `f` over the circle (triangle inequality).
    fn min_radius_bound(&self) -> f64 {
        self.major - self.minor.abs() - self.ripple.abs()
    }
}

/// Compactly supported conformal perturbation `g' = e^{2·amplitude·φ} g`.
///
/// `φ(x) = exp(1 - 1/(1 - s²))` with `s = |x - center| / radius`, so `φ` is
/// C^∞, equals 1 at the center and vanishes identically for `s ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalBump {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
}

impl ConformalBump {
    pub fn new(center: [f64; 2], radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeoError::InvalidInput(format!("bump radius must be > 0, got {radius}")));
        }
        if !amplitude.is_finite() || !center.iter().all(|c| c.is_finite()) {
            return Err(GeoError::InvalidInput("bump parameters must be finite".into()));
        }
        Ok(Self {
            center,
            radius,
            amplitude,
        })
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self { amplitude, ..*self }
    }

    /// Profile value with gradient and Hessian in chart coordinates.
    /// Returns `None` outside the support.
    pub fn profile_jet(&self, chart: &SurfaceChart, x: [f64; 2]) -> Option<(f64, [f64; 2], [[f64; 2]; 2])> {
        let d = chart.delta(self.center, x);
        let r2 = self.radius * self.radius;
        let q = (d[0] * d[0] + d[1] * d[1]) / r2;
        if q >= 1.0 {
            return None;
        }
        let g = 1.0 / (1.0 - q);
        let phi = (1.0 - g).exp();
        if phi == 0.0 {
            return None;
        }
        let phi_q = -phi * g * g;
        let phi_qq = phi * g.powi(4) - 2.0 * phi * g.powi(3);
        let q_i = [2.0 * d[0] / r2, 2.0 * d[1] / r2];
        let grad = [phi_q * q_i[0], phi_q * q_i[1]];
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { 2.0 / r2 } else { 0.0 };
                hess[i][j] = phi_qq * q_i[i] * q_i[j] + phi_q * delta;
            }
        }
        Some((phi, grad, hess))
    }

    /// Bump profile value `φ(x)`.
    pub fn profile(&self, chart: &SurfaceChart, x: [f64; 2]) -> f64 {
        self.profile_jet(chart, x).map_or(0.0, |j| j.0)
    }

    /// Covariant conformal factor `e^{2·amplitude·φ(x)}`.
    pub fn conformal_factor(&self, chart: &SurfaceChart, x: [f64; 2]) -> f64 {
        (2.0 * self.amplitude * self.profile(chart, x)).exp()
    }

    fn support_box(&self) -> [Interval; 2] {
        [
            Interval::new(self.center[0] - self.radius, self.center[0] + self.radius),
            Interval::new(self.center[1] - self.radius, self.center[1] + self.radius),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricFamily {
    FlatTorus,
    SurfaceOfRevolution(RevolutionProfile),
    ConformallyPerturbed {
        base: Box<MetricField>,
        bump: ConformalBump,
        c2_size: f64,
    },
}

/// A metric on a surface given in a single chart.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    chart: SurfaceChart,
    family: MetricFamily,
}

impl MetricField {
    /// Flat torus `[0, L₁) × [0, L₂)` with `A = I`.
    pub fn flat_torus(lengths: [f64; 2]) -> Result<Self> {
        let chart = SurfaceChart::new(
            "flat-torus",
            [Interval::new(0.0, lengths[0]), Interval::new(0.0, lengths[1])],
            [true, true],
        )?;
        Ok(Self {
            chart,
            family: MetricFamily::FlatTorus,
        })
    }

    /// Flat torus with both sides `2π`.
    pub fn standard_flat_torus() -> Self {
        Self::flat_torus([TAU, TAU]).expect("valid lengths")
    }

    pub fn surface_of_revolution(profile: RevolutionProfile) -> Result<Self> {
        if !(profile.minor > 0.0) || !profile.major.is_finite() || !profile.ripple.is_finite() {
            return Err(GeoError::InvalidInput("profile needs minor > 0 and finite parameters".into()));
        }
        if profile.min_radius_bound() <= 0.0 {
            return Err(GeoError::Domain(format!(
                "profile radius can reach zero (major {} <= |minor| + |ripple|)",
                profile.major
            )));
        }
        Ok(Self {
            chart: SurfaceChart::standard_torus("surface-of-revolution"),
            family: MetricFamily::SurfaceOfRevolution(profile),
        })
    }

    /// Torus of revolution `ds² = r² dv² + (R + r cos v)² du²`.
    pub fn torus_of_revolution(major: f64, minor: f64) -> Result<Self> {
        Self::surface_of_revolution(RevolutionProfile::torus(major, minor))
    }

    pub fn chart(&self) -> &SurfaceChart {
        &self.chart
    }

    pub fn family(&self) -> &MetricFamily {
        &self.family
    }

    pub fn family_tag(&self) -> &'static str {
        match self.family {
            MetricFamily::FlatTorus => "FlatTorus",
            MetricFamily::SurfaceOfRevolution(_) => "SurfaceOfRevolution",
            MetricFamily::ConformallyPerturbed { .. } => "ConformallyPerturbed",
        }
    }

    /// The unperturbed metric when this is a conformal perturbation.
    pub fn base(&self) -> Option<&MetricField> {
        match &self.family {
            MetricFamily::ConformallyPerturbed { base, .. } => Some(base),
            _ => None,
        }
    }

    /// C²-size of the perturbation relative to the base (0 for unperturbed families).
    pub fn c2_size(&self) -> f64 {
        match &self.family {
            MetricFamily::ConformallyPerturbed { c2_size, .. } => *c2_size,
            _ => 0.0,
        }
    }

    /// Full jet of the contravariant matrix at `x`. No domain check.
    pub fn jet(&self, x: [f64; 2]) -> MetricJet {
        match &self.family {
            MetricFamily::FlatTorus => MetricJet::constant(Matrix2::identity()),
            MetricFamily::SurfaceOfRevolution(prof) => {
                let (f, f1, f2) = prof.radius_jet(x[1]);
                let inv_f2 = 1.0 / (f * f);
                let c = prof.minor;
                let a = Matrix2::new(inv_f2, 0.0, 0.0, 1.0 / (c * c));
                let d_auu = -2.0 * f1 / (f * f * f);
                let dd_auu = -2.0 * f2 / (f * f * f) + 6.0 * f1 * f1 / (f * f * f * f);
                let mut jet = MetricJet::constant(a);
                jet.da[1] = Matrix2::new(d_auu, 0.0, 0.0, 0.0);
                jet.dda[1][1] = Matrix2::new(dd_auu, 0.0, 0.0, 0.0);
                jet
            }
            MetricFamily::ConformallyPerturbed { base, bump, .. } => {
                let b = base.jet(x);
                if bump.amplitude == 0.0 {
                    return b;
                }
                let Some((phi, g, h)) = bump.profile_jet(&self.chart, x) else {
                    return b;
                };
                let am = bump.amplitude;
                let c = (-2.0 * am * phi).exp();
                let dc = [-2.0 * am * c * g[0], -2.0 * am * c * g[1]];
                let mut ddc = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        ddc[i][j] = c * (4.0 * am * am * g[i] * g[j] - 2.0 * am * h[i][j]);
                    }
                }
                let mut jet = MetricJet::constant(b.a * c);
                for i in 0..2 {
                    jet.da[i] = b.a * dc[i] + b.da[i] * c;
                    for j in 0..2 {
                        jet.dda[i][j] =
                            b.a * ddc[i][j] + b.da[j] * dc[i] + b.da[i] * dc[j] + b.dda[i][j] * c;
                    }
                }
                jet
            }
        }
    }

    fn checked(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        self.chart.wrap(x)
    }

    /// Contravariant matrix `A(x)`.
    pub fn contravariant(&self, x: [f64; 2]) -> Result<Matrix2<f64>> {
        Ok(self.jet(self.checked(x)?).a)
    }

    /// Covariant matrix `A(x)^{-1}`, i.e. the metric `g` itself.
    pub fn covariant(&self, x: [f64; 2]) -> Result<Matrix2<f64>> {
        let a = self.contravariant(x)?;
        a.try_inverse()
            .ok_or_else(|| GeoError::Domain("singular contravariant matrix".into()))
    }

    /// `[∂A/∂u, ∂A/∂v]`.
    pub fn grad_contravariant(&self, x: [f64; 2]) -> Result<[Matrix2<f64>; 2]> {
        Ok(self.jet(self.checked(x)?).da)
    }

    /// `H(x, p) = ½ pᵀ A(x) p`.
    pub fn hamiltonian(&self, state: &CotangentState) -> Result<f64> {
        let a = self.contravariant(state.x_array())?;
        Ok(0.5 * state.p.dot(&(a * state.p)))
    }

    /// Right-hand side of the canonical equations `ẋ = A p`, `ṗ = -½ ∇ₓ(pᵀ A p)`.
    pub fn vector_field(&self, state: &CotangentState) -> Result<(Vector2<f64>, Vector2<f64>)> {
        let x = self.checked(state.x_array())?;
        let jet = self.jet(x);
        let f = field_from_jet(&jet, &state.p);
        Ok((Vector2::new(f[0], f[1]), Vector2::new(f[2], f[3])))
    }

    /// Vector field and its Jacobian at a phase-space point `z = (u, v, p_u, p_v)`.
    /// The point is not wrapped; every family is periodic in its chart.
    pub fn field_and_jacobian(&self, z: &Vector4<f64>) -> (Vector4<f64>, Matrix4<f64>) {
        let jet = self.jet([z[0], z[1]]);
        let p = Vector2::new(z[2], z[3]);
        let f = field_from_jet(&jet, &p);
        let mut jac = Matrix4::zeros();
        let dap = [jet.da[0] * p, jet.da[1] * p];
        for k in 0..2 {
            // ∂ẋ/∂x_k
            jac[(0, k)] = dap[k][0];
            jac[(1, k)] = dap[k][1];
            for l in 0..2 {
                // ∂ṗ_k/∂x_l
                jac[(2 + k, l)] = -0.5 * p.dot(&(jet.dda[k][l] * p));
                // ∂ṗ_k/∂p_l
                jac[(2 + k, 2 + l)] = -dap[k][l];
                // ∂ẋ_k/∂p_l
                jac[(k, 2 + l)] = jet.a[(k, l)];
            }
        }
        (f, jac)
    }

    /// Vector field only, at an unwrapped phase-space point.
    pub fn field(&self, z: &Vector4<f64>) -> Vector4<f64> {
        let jet = self.jet([z[0], z[1]]);
        field_from_jet(&jet, &Vector2::new(z[2], z[3]))
    }

    /// Gradient of `H` at an unwrapped phase-space point.
    pub fn energy_gradient(&self, z: &Vector4<f64>) -> Vector4<f64> {
        let f = self.field(z);
        // ∂H/∂x = -ṗ, ∂H/∂p = ẋ
        Vector4::new(-f[2], -f[3], f[0], f[1])
    }

    pub fn energy_at(&self, z: &Vector4<f64>) -> f64 {
        let a = self.jet([z[0], z[1]]).a;
        let p = Vector2::new(z[2], z[3]);
        0.5 * p.dot(&(a * p))
    }

    /// Legendre transform `(x, v) ↦ (x, A(x)^{-1} v)`.
    pub fn legendre(&self, x: [f64; 2], v: Vector2<f64>) -> Result<CotangentState> {
        let x = self.checked(x)?;
        let g = self.covariant(x)?;
        Ok(CotangentState::new(x, g * v))
    }

    /// Inverse Legendre transform `(x, p) ↦ (x, A(x) p)`.
    pub fn legendre_inverse(&self, state: &CotangentState) -> Result<([f64; 2], Vector2<f64>)> {
        let x = self.checked(state.x_array())?;
        Ok((x, self.contravariant(x)? * state.p))
    }

    /// `g_x(v, v)`.
    pub fn metric_norm_sq(&self, x: [f64; 2], v: Vector2<f64>) -> Result<f64> {
        let g = self.covariant(x)?;
        Ok(v.dot(&(g * v)))
    }

    /// Gaussian curvature. Closed form for the flat and revolution families,
    /// the Brioschi formula on the analytic jet otherwise.
    pub fn gaussian_curvature(&self, x: [f64; 2]) -> Result<f64> {
        let x = self.checked(x)?;
        match &self.family {
            MetricFamily::FlatTorus => Ok(0.0),
            MetricFamily::SurfaceOfRevolution(prof) => {
                let (f, _, f2) = prof.radius_jet(x[1]);
                if f.abs() < 1e-12 {
                    return Err(GeoError::Domain("degenerate profile radius".into()));
                }
                Ok(-f2 / (prof.minor * prof.minor * f))
            }
            MetricFamily::ConformallyPerturbed { .. } => brioschi_curvature(&self.jet(x)),
        }
    }

    /// Applies a conformal bump, returning the perturbed metric.
    pub fn apply_conformal_bump(&self, bump: ConformalBump) -> Result<MetricField> {
        ConformalBump::new(bump.center, bump.radius, bump.amplitude)?;
        for k in 0..2 {
            let r = self.chart.ranges[k];
            if let Some(len) = self.chart.period(k) {
                if 2.0 * bump.radius >= len {
                    return Err(GeoError::Domain(format!(
                        "bump diameter {} wraps onto itself along periodic coordinate {k}",
                        2.0 * bump.radius
                    )));
                }
            } else if bump.center[k] - bump.radius < r.lo || bump.center[k] + bump.radius > r.hi {
                return Err(GeoError::Domain(format!(
                    "bump overlaps the chart seam of non-periodic coordinate {k}"
                )));
            }
        }
        let mut out = MetricField {
            chart: self.chart.clone(),
            family: MetricFamily::ConformallyPerturbed {
                base: Box::new(self.clone()),
                bump,
                c2_size: 0.0,
            },
        };
        let size = if bump.amplitude == 0.0 {
            0.0
        } else {
            c2_deviation(self, &out, bump.support_box(), C2_GRID, C2_FD_STEP_FRACTION * bump.radius)
        };
        if let MetricFamily::ConformallyPerturbed { c2_size, .. } = &mut out.family {
            *c2_size = size;
        }
        Ok(out)
    }
}

/// Sampling grid (points per axis) for the C²-size of a bump.
pub const C2_GRID: usize = 101;
/// Finite-difference step for the C²-size, as a fraction of the bump radius.
pub const C2_FD_STEP_FRACTION: f64 = 1e-3;

fn field_from_jet(jet: &MetricJet, p: &Vector2<f64>) -> Vector4<f64> {
    let xdot = jet.a * p;
    let pu = -0.5 * p.dot(&(jet.da[0] * p));
    let pv = -0.5 * p.dot(&(jet.da[1] * p));
    Vector4::new(xdot[0], xdot[1], pu, pv)
}

/// Sup over a sampling grid of the componentwise deviation between two
/// metrics' contravariant matrices and of its first and second
/// finite-difference derivatives.
pub fn c2_deviation(
    base: &MetricField,
    other: &MetricField,
    region: [Interval; 2],
    n: usize,
    fd_step: f64,
) -> f64 {
    let diff = |x: [f64; 2]| other.jet(x).a - base.jet(x).a;
    let mut sup: f64 = 0.0;
    let n = n.max(2);
    let h = fd_step;
    for i in 0..n {
        let u = region[0].lo + region[0].length() * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let v = region[1].lo + region[1].length() * j as f64 / (n - 1) as f64;
            let c = diff([u, v]);
            let eu = diff([u + h, v]);
            let wu = diff([u - h, v]);
            let nv = diff([u, v + h]);
            let sv = diff([u, v - h]);
            let ne = diff([u + h, v + h]);
            let nw = diff([u - h, v + h]);
            let se = diff([u + h, v - h]);
            let sw = diff([u - h, v - h]);
            let du = (eu - wu) / (2.0 * h);
            let dv = (nv - sv) / (2.0 * h);
            let duu = (eu - c * 2.0 + wu) / (h * h);
            let dvv = (nv - c * 2.0 + sv) / (h * h);
            let duv = (ne - nw - se + sw) / (4.0 * h * h);
            for m in [c, du, dv, duu, dvv, duv] {
                sup = sup.max(m.amax());
            }
        }
    }
    sup
}

/// Gaussian curvature from the jet of `A` via the Brioschi formula applied
/// to the covariant metric `g = A^{-1}`.
pub fn brioschi_curvature(jet: &MetricJet) -> Result<f64> {
    let g = jet
        .a
        .try_inverse()
        .ok_or_else(|| GeoError::Domain("singular contravariant matrix".into()))?;
    let dg = [-(g * jet.da[0] * g), -(g * jet.da[1] * g)];
    let ddg = |i: usize, j: usize| -> Matrix2<f64> {
        g * (jet.da[i] * g * jet.da[j] + jet.da[j] * g * jet.da[i] - jet.dda[i][j]) * g
    };
    let (e, f, gg) = (g[(0, 0)], g[(0, 1)], g[(1, 1)]);
    let (e_u, e_v) = (dg[0][(0, 0)], dg[1][(0, 0)]);
    let (f_u, f_v) = (dg[0][(0, 1)], dg[1][(0, 1)]);
    let (g_u, g_v) = (dg[0][(1, 1)], dg[1][(1, 1)]);
    let e_vv = ddg(1, 1)[(0, 0)];
    let f_uv = ddg(0, 1)[(0, 1)];
    let g_uu = ddg(0, 0)[(1, 1)];
    let m1 = nalgebra::Matrix3::new(
        -0.5 * e_vv + f_uv - 0.5 * g_uu,
        0.5 * e_u,
        f_u - 0.5 * e_v,
        f_v - 0.5 * g_u,
        e,
        f,
        0.5 * g_v,
        f,
        gg,
    );
    let m2 = nalgebra::Matrix3::new(0.0, 0.5 * e_v, 0.5 * g_u, 0.5 * e_v, e, f, 0.5 * g_u, f, gg);
    let w = e * gg - f * f;
    Ok((m1.determinant() - m2.determinant()) / (w * w))
}

/// Configuration form of a metric family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    FlatTorus {
        #[serde(default = "default_lengths")]
        lengths: [f64; 2],
    },
    TorusOfRevolution {
        major: f64,
        minor: f64,
        #[serde(default)]
        ripple: f64,
    },
    ConformallyPerturbed {
        base: Box<MetricSpec>,
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
}

fn default_lengths() -> [f64; 2] {
    [TAU, TAU]
}

impl MetricSpec {
    pub fn build(&self) -> Result<MetricField> {
        match self {
            MetricSpec::FlatTorus { lengths } => MetricField::flat_torus(*lengths),
            MetricSpec::TorusOfRevolution {
                major,
                minor,
                ripple,
            } => MetricField::surface_of_revolution(RevolutionProfile {
                major: *major,
                minor: *minor,
                ripple: *ripple,
            }),
            MetricSpec::ConformallyPerturbed {
                base,
                center,
                radius,
                amplitude,
            } => base
                .build()?
                .apply_conformal_bump(ConformalBump::new(*center, *radius, *amplitude)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bumped() -> MetricField {
        MetricField::torus_of_revolution(2.0, 1.0)
            .unwrap()
            .apply_conformal_bump(ConformalBump::new([1.0, 0.4], 0.6, 0.2).unwrap())
            .unwrap()
    }

    #[test]
    fn flat_hamiltonian() {
        let m = MetricField::standard_flat_torus();
        let h = m.hamiltonian(&CotangentState::new([1.0, 2.0], Vector2::new(0.6, 0.8))).unwrap();
        assert!((h - 0.5).abs() < 1e-15);
    }

    #[test]
    fn torus_hamiltonian_outer_equator() {
        let m = MetricField::torus_of_revolution(2.0, 1.0).unwrap();
        let h = m.hamiltonian(&CotangentState::new([0.3, 0.0], Vector2::new(3.0, 0.0))).unwrap();
        assert!((h - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_amplitude_bump_is_bit_identical() {
        let base = MetricField::torus_of_revolution(2.0, 1.0).unwrap();
        let m = base
            .apply_conformal_bump(ConformalBump::new([1.0, 0.4], 0.6, 0.0).unwrap())
            .unwrap();
        assert_eq!(m.c2_size(), 0.0);
        for &x in &[[1.0, 0.4], [1.2, 0.5], [4.0, 3.0]] {
            let s = CotangentState::new(x, Vector2::new(0.7, -0.2));
            assert_eq!(m.hamiltonian(&s).unwrap(), base.hamiltonian(&s).unwrap());
            assert_eq!(m.jet(x), base.jet(x));
        }
    }

    #[test]
    fn reciprocal_amplitudes_give_reciprocal_factors() {
        let chart = SurfaceChart::standard_torus("t");
        let b = ConformalBump::new([1.0, 1.0], 0.5, 0.3).unwrap();
        let f1 = b.conformal_factor(&chart, [1.0, 1.0]);
        let f2 = b.with_amplitude(-0.3).conformal_factor(&chart, [1.0, 1.0]);
        assert!((f1 * f2 - 1.0).abs() < 1e-15);
        assert!((f1 - (0.6f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let chart = SurfaceChart::standard_torus("t");
        let b = ConformalBump::new([0.1, 0.1], 0.5, 1.0).unwrap();
        assert_eq!(b.profile(&chart, [0.7, 0.1]), 0.0);
        // support wraps across the seam of the periodic chart
        assert!(b.profile(&chart, [TAU - 0.1, 0.1]) > 0.0);
    }

    #[test]
    fn oversized_bump_is_rejected() {
        let base = MetricField::standard_flat_torus();
        let r = base.apply_conformal_bump(ConformalBump::new([1.0, 1.0], 3.5, 0.1).unwrap());
        assert!(matches!(r, Err(GeoError::Domain(_))));
    }

    #[test]
    fn degenerate_profile_rejected() {
        assert!(matches!(
            MetricField::torus_of_revolution(1.0, 1.0),
            Err(GeoError::Domain(_))
        ));
    }

    #[test]
    fn curvature_values() {
        let flat = MetricField::standard_flat_torus();
        assert_eq!(flat.gaussian_curvature([1.0, 2.0]).unwrap(), 0.0);
        let t = MetricField::torus_of_revolution(2.0, 1.0).unwrap();
        assert!((t.gaussian_curvature([0.0, 0.0]).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert!((t.gaussian_curvature([0.0, PI]).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn brioschi_matches_revolution_formula() {
        let prof = RevolutionProfile {
            major: 2.5,
            minor: 0.8,
            ripple: 0.3,
        };
        let m = MetricField::surface_of_revolution(prof).unwrap();
        for k in 0..40 {
            let x = [0.3 * k as f64, 0.17 * k as f64];
            let a = m.gaussian_curvature(x).unwrap();
            let b = brioschi_curvature(&m.jet(x)).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn legendre_on_torus_outer_equator() {
        let m = MetricField::torus_of_revolution(2.0, 1.0).unwrap();
        let s = m.legendre([0.0, 0.0], Vector2::new(1.0, 0.0)).unwrap();
        assert!((s.p[0] - 9.0).abs() < 1e-14);
        assert_eq!(s.p[1], 0.0);
        let s = m.legendre([0.0, 0.0], Vector2::new(0.0, 1.0)).unwrap();
        assert!((s.p[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_flat_is_identity() {
        let m = MetricField::standard_flat_torus();
        let v = Vector2::new(0.3, -1.2);
        assert_eq!(m.legendre([0.5, 0.5], v).unwrap().p, v);
    }

    #[test]
    fn revolution_field_has_no_u_force() {
        let m = MetricField::torus_of_revolution(2.0, 1.0).unwrap();
        for k in 0..20 {
            let s = CotangentState::new([0.4 * k as f64, 0.31 * k as f64], Vector2::new(1.3, -0.4));
            let (_, dp) = m.vector_field(&s).unwrap();
            assert_eq!(dp[0], 0.0);
        }
    }

    #[test]
    fn flat_field_is_free_motion() {
        let m = MetricField::standard_flat_torus();
        let p = Vector2::new(0.3, 0.9);
        let (dx, dp) = m.vector_field(&CotangentState::new([1.0, 1.0], p)).unwrap();
        assert_eq!(dx, p);
        assert_eq!(dp, Vector2::zeros());
    }

    #[test]
    fn jacobian_matches_finite_differences_of_field() {
        let m = bumped();
        let z = Vector4::new(1.1, 0.5, 1.7, -0.6);
        let (_, jac) = m.field_and_jacobian(&z);
        let h = 1e-6;
        for c in 0..4 {
            let mut zp = z;
            let mut zm = z;
            zp[c] += h;
            zm[c] -= h;
            let col = (m.field(&zp) - m.field(&zm)) / (2.0 * h);
            for r in 0..4 {
                assert!((col[r] - jac[(r, c)]).abs() < 1e-6, "({r},{c}) {} vs {}", col[r], jac[(r, c)]);
            }
        }
    }

    #[test]
    fn spec_parses_from_json_and_rejects_unknown_keys() {
        let s: MetricSpec =
            serde_json::from_str(r#"{"family":"torus_of_revolution","major":2.0,"minor":1.0}"#).unwrap();
        assert!(s.build().is_ok());
        let bad: std::result::Result<MetricSpec, _> =
            serde_json::from_str(r#"{"family":"torus_of_revolution","major":2.0,"minor":1.0,"bogus":1}"#);
        assert!(bad.is_err());
        let nested: MetricSpec = serde_json::from_str(
            r#"{"family":"conformally_perturbed","base":{"family":"flat_torus"},"center":[1,1],"radius":0.5,"amplitude":0.1}"#,
        )
        .unwrap();
        let m = nested.build().unwrap();
        assert_eq!(m.family_tag(), "ConformallyPerturbed");
        assert!(m.c2_size() > 0.0);
    }
}
