//! Coordinate sections `{x_k = level}` of the unit shell.

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::chart::wrap_signed;
use crate::error::{GeoError, Result};
use crate::metric::MetricField;
use crate::state::{CotangentState, UnitCotangentState};

/// Below this normal flux a crossing is treated as tangential.
pub const GRAZING_FLUX: f64 = 1e-8;

/// Serializable description of a coordinate section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    /// 0 for `u`, 1 for `v`.
    pub coordinate: usize,
    pub level: f64,
    /// Sign of `ẋ_k` on accepted crossings.
    pub orientation: i8,
}

impl SectionSpec {
    pub fn coordinate_name(&self) -> &'static str {
        if self.coordinate == 0 {
            "u"
        } else {
            "v"
        }
    }

    /// Index of the in-section position coordinate.
    pub fn free(&self) -> usize {
        1 - self.coordinate
    }
}

/// `Σ = {x_k = level} ∩ {H = 1/2}` near a base point, with a frame of `TΣ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransversalSection {
    pub spec: SectionSpec,
    pub base: UnitCotangentState,
    /// `∂/∂x_j` and `∂/∂p_j` lifted to the shell (`j` the free coordinate).
    pub frame: [Vector4<f64>; 2],
}

impl TransversalSection {
    /// Section `{x_k = x_k(base)}` oriented along the flow at `base`.
    pub fn through(metric: &MetricField, base: &UnitCotangentState, coordinate: usize) -> Result<Self> {
        if coordinate > 1 {
            return Err(GeoError::InvalidInput(format!("section coordinate {coordinate} is not 0 or 1")));
        }
        let z = base.to_vec4();
        let flux = metric.field(&z)[coordinate];
        if flux.abs() < GRAZING_FLUX {
            return Err(GeoError::Transversality { flux });
        }
        let spec = SectionSpec {
            coordinate,
            level: base.x()[coordinate],
            orientation: if flux > 0.0 { 1 } else { -1 },
        };
        let frame = frame_at(metric, &spec, &z)?;
        Ok(Self {
            spec,
            base: *base,
            frame,
        })
    }

    /// Section through `base` using the coordinate the flow crosses fastest.
    pub fn best_through(metric: &MetricField, base: &UnitCotangentState) -> Result<Self> {
        let f = metric.field(&base.to_vec4());
        let k = if f[0].abs() >= f[1].abs() { 0 } else { 1 };
        Self::through(metric, base, k)
    }

    /// Signed value of the normal functional, wrapped for periodic coordinates.
    pub fn functional(&self, metric: &MetricField, z: &Vector4<f64>) -> f64 {
        functional(metric, &self.spec, z)
    }

    /// In-section coordinates `(x_j, p_j)`.
    pub fn coords(&self, z: &Vector4<f64>) -> Vector2<f64> {
        let j = self.spec.free();
        Vector2::new(z[j], z[2 + j])
    }

    /// Displacement between in-section coordinates, wrapping `x_j`.
    pub fn coord_delta(&self, metric: &MetricField, from: &Vector2<f64>, to: &Vector2<f64>) -> Vector2<f64> {
        let j = self.spec.free();
        let mut dx = to[0] - from[0];
        if let Some(len) = metric.chart().period(j) {
            dx = wrap_signed(dx, len);
        }
        Vector2::new(dx, to[1] - from[1])
    }

    /// Point of the section with in-section coordinates `y`, solving the
    /// shell condition for `p_k` on the oriented branch.
    pub fn point(&self, metric: &MetricField, y: &Vector2<f64>) -> Result<UnitCotangentState> {
        let k = self.spec.coordinate;
        let j = self.spec.free();
        let mut x = [0.0; 2];
        x[k] = self.spec.level;
        x[j] = y[0];
        let x = metric.chart().wrap(x)?;
        let a = metric.contravariant(x)?;
        let (akk, akj, ajj) = (a[(k, k)], a[(k, j)], a[(j, j)]);
        let pj = y[1];
        let disc = akj * akj * pj * pj - akk * (ajj * pj * pj - 1.0);
        if !(disc > 0.0) {
            return Err(GeoError::Domain(format!(
                "no oriented momentum on the section for p_j = {pj} (discriminant {disc:.3e})"
            )));
        }
        let pk = (-akj * pj + f64::from(self.spec.orientation) * disc.sqrt()) / akk;
        let mut p = Vector2::zeros();
        p[k] = pk;
        p[j] = pj;
        Ok(UnitCotangentState::unchecked(CotangentState::new(x, p)))
    }
}

pub(crate) fn functional(metric: &MetricField, spec: &SectionSpec, z: &Vector4<f64>) -> f64 {
    let k = spec.coordinate;
    let d = z[k] - spec.level;
    match metric.chart().period(k) {
        Some(len) => wrap_signed(d, len),
        None => d,
    }
}

/// Frame of `TΣ` at a point of the section.
pub fn frame_at(metric: &MetricField, spec: &SectionSpec, z: &Vector4<f64>) -> Result<[Vector4<f64>; 2]> {
    let k = spec.coordinate;
    let j = spec.free();
    let f = metric.field(z);
    let speed = f[0].hypot(f[1]);
    if f[k].abs() < 1e-6 * speed.max(1e-300) || f[k].abs() < GRAZING_FLUX {
        return Err(GeoError::Frame(format!(
            "flow nearly tangent to section {{x_{k} = {}}}: flux {:.3e}",
            spec.level, f[k]
        )));
    }
    // dH = 0 with dx_k = 0: H_{x_j} dx_j + ẋ_j dp_j + ẋ_k dp_k = 0, and H_x = -ṗ
    let hxj = -f[2 + j];
    let mut e1 = Vector4::zeros();
    e1[j] = 1.0;
    e1[2 + k] = -hxj / f[k];
    let mut e2 = Vector4::zeros();
    e2[2 + j] = 1.0;
    e2[2 + k] = -f[j] / f[k];
    Ok([e1, e2])
}
