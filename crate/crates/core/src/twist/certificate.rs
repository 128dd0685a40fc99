//! Brute-force non-shadowability certificates over a grid of initial conditions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::circle::InvariantCircleEstimate;
use super::map::{annulus_distance, TwistMapParams, TwistPoint};
use super::pseudo::TwistPseudoOrbit;
use crate::error::{GeoError, Result};

pub const DEFAULT_SLACK: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateGrid {
    pub n_theta: usize,
    pub n_r: usize,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl CertificateGrid {
    pub fn over(params: &TwistMapParams, n: usize) -> Self {
        Self {
            n_theta: n,
            n_r: n,
            r_lo: params.r_lo,
            r_hi: params.r_hi,
        }
    }

    /// Largest cell side in the `max(|Δθ|, |Δr|)` metric.
    pub fn spacing(&self) -> f64 {
        (1.0 / self.n_theta as f64).max((self.r_hi - self.r_lo) / self.n_r as f64)
    }

    pub fn cells(&self) -> usize {
        self.n_theta * self.n_r
    }

    fn center(&self, idx: usize) -> TwistPoint {
        let (i, j) = (idx / self.n_r, idx % self.n_r);
        TwistPoint::new(
            (i as f64 + 0.5) / self.n_theta as f64,
            self.r_lo + (self.r_hi - self.r_lo) * (j as f64 + 0.5) / self.n_r as f64,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conclusion {
    Shadowed,
    NotShadowedAtResolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonShadowCertificate {
    pub epsilon_prime: f64,
    pub grid: CertificateGrid,
    pub slack: usize,
    /// Smallest best-matching distance over grid cells and vertex seeds.
    pub min_distance: f64,
    pub min_grid_distance: f64,
    /// Cell (or `None` for a vertex seed) attaining the minimum.
    pub best_cell: Option<usize>,
    pub cells_below: usize,
    pub vertex_seeds: usize,
    pub conclusion: Conclusion,
    pub map_evaluations: u64,
    pub pseudo_orbit_len: usize,
    #[serde(skip)]
    pub wall_time: f64,
    /// Per-cell best matching distance (lower bounds once above `ε'`), `θ`-major.
    #[serde(skip)]
    pub cell_distances: Vec<f32>,
}

/// `ε' = ½ min_{i≠j} d(Γ_i, Γ_j)`.
pub fn circle_separation(circles: &[InvariantCircleEstimate]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..circles.len() {
        for j in i + 1..circles.len() {
            best = best.min(circles[i].distance(&circles[j]));
        }
    }
    0.5 * best
}

/// Sup over `n` of `min_{|j| ≤ S} d(Q^n(y), P_{n+j})`, stopping once it reaches `stop`.
fn matching_distance(
    params: &TwistMapParams,
    po: &[TwistPoint],
    y0: TwistPoint,
    slack: usize,
    stop: f64,
) -> (f64, u64) {
    let mut y = y0;
    let mut sup: f64 = 0.0;
    let mut evals = 0u64;
    for n in 0..po.len() {
        if n > 0 {
            y = params.apply(&y);
            evals += 1;
            if !y.r.is_finite() {
                return (f64::INFINITY, evals);
            }
        }
        let lo = n.saturating_sub(slack);
        let hi = (n + slack).min(po.len() - 1);
        let d = po[lo..=hi]
            .iter()
            .map(|p| annulus_distance(&y, p))
            .fold(f64::INFINITY, f64::min);
        sup = sup.max(d);
        if sup >= stop {
            break;
        }
    }
    (sup, evals)
}

/// Sweeps every grid cell center (plus the first `S + 1` pseudo-orbit
/// vertices) and concludes not-shadowed iff every best matching distance
/// is at least `ε'`.
pub fn certify_non_shadowable(
    params: &TwistMapParams,
    po: &TwistPseudoOrbit,
    circles: &[InvariantCircleEstimate],
    grid: &CertificateGrid,
    slack: usize,
) -> Result<NonShadowCertificate> {
    let clock = std::time::Instant::now();
    if po.is_empty() {
        return Err(GeoError::InvalidInput("empty pseudo-orbit".into()));
    }
    if circles.len() < 2 {
        return Err(GeoError::InvalidInput("need at least two circles for ε'".into()));
    }
    if grid.n_theta == 0 || grid.n_r == 0 || !(grid.r_lo < grid.r_hi) {
        return Err(GeoError::InvalidInput("empty certificate grid".into()));
    }
    let eps = circle_separation(circles);
    if !(eps > 0.0) {
        return Err(GeoError::InvalidInput("circles are not pairwise disjoint".into()));
    }
    if grid.spacing() > eps / 4.0 {
        return Err(GeoError::Refused(format!(
            "grid spacing {:.3e} exceeds ε'/4 = {:.3e}",
            grid.spacing(),
            eps / 4.0
        )));
    }
    let pts = &po.points;
    let results: Vec<(f32, u64)> = (0..grid.cells())
        .into_par_iter()
        .map(|idx| {
            let (d, e) = matching_distance(params, pts, grid.center(idx), slack, eps);
            (d as f32, e)
        })
        .collect();
    let mut evals: u64 = results.iter().map(|r| r.1).sum();
    let cell_distances: Vec<f32> = results.iter().map(|r| r.0).collect();
    let (best_cell, min_grid) = cell_distances
        .iter()
        .enumerate()
        .map(|(i, &d)| (i, f64::from(d)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid");
    let seeds = (slack + 1).min(pts.len());
    let mut min_seed = f64::INFINITY;
    for p in &pts[..seeds] {
        let (d, e) = matching_distance(params, pts, *p, slack, eps);
        evals += e;
        min_seed = min_seed.min(d);
    }
    let min_distance = min_grid.min(min_seed);
    let cells_below = cell_distances.iter().filter(|&&d| f64::from(d) < eps).count();
    Ok(NonShadowCertificate {
        epsilon_prime: eps,
        grid: *grid,
        slack,
        min_distance,
        min_grid_distance: min_grid,
        best_cell: (min_grid <= min_seed).then_some(best_cell),
        cells_below,
        vertex_seeds: seeds,
        conclusion: if min_distance >= eps {
            Conclusion::NotShadowedAtResolution
        } else {
            Conclusion::Shadowed
        },
        map_evaluations: evals,
        pseudo_orbit_len: pts.len(),
        wall_time: clock.elapsed().as_secs_f64(),
        cell_distances,
    })
}
