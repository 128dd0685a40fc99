//! Pseudo-orbits climbing from `Γ₀` through `Γ₁` to `Γ₂` with radial jumps
//! `0 < r_{n+1} - π Q(θ_n, r_n) < δ'`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::circle::InvariantCircleEstimate;
use super::map::{TwistMapParams, TwistPoint};
use crate::error::{GeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpKind {
    /// Leaving a circle (or a ladder rung) upwards.
    Climb,
    /// Landing on the upper boundary after the true orbit crossed the zone.
    ZoneTransit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistJump {
    /// Index of the point reached by the jump.
    pub index: usize,
    pub size: f64,
    pub kind: JumpKind,
}

/// Steps spent strictly between two consecutive declared circles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneCrossing {
    pub lower: usize,
    pub entered: usize,
    pub left: usize,
    pub jumps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClimbOptions {
    pub min_spacing: usize,
    /// Steps to wait in a zone for a natural transit before climbing.
    pub patience: usize,
    pub max_steps: usize,
    /// Iterates kept on the true orbit of `Γ₂` after arrival.
    pub tail: usize,
}

impl Default for ClimbOptions {
    fn default() -> Self {
        Self {
            min_spacing: 50,
            patience: 1000,
            max_steps: 2_000_000,
            tail: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistPseudoOrbit {
    pub points: Vec<TwistPoint>,
    pub jump_log: Vec<TwistJump>,
    pub delta_prime: f64,
    /// Smallest gap between consecutive jump indices.
    pub spacing: usize,
    pub zones: Vec<ZoneCrossing>,
}

impl TwistPseudoOrbit {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// A true orbit segment of `len` points.
    pub fn true_orbit(params: &TwistMapParams, start: TwistPoint, len: usize) -> Self {
        let mut points = Vec::with_capacity(len);
        let mut x = start;
        for _ in 0..len {
            points.push(x);
            x = params.apply(&x);
        }
        Self {
            points,
            jump_log: Vec::new(),
            delta_prime: 0.0,
            spacing: len,
            zones: Vec::new(),
        }
    }

    /// Checks that every non-jump step is an exact iterate and every jump
    /// is radial with `0 < Δr < δ'`.
    pub fn verify(&self, params: &TwistMapParams) -> Result<()> {
        let mut jumps = self.jump_log.iter().peekable();
        for n in 1..self.points.len() {
            let img = params.apply(&self.points[n - 1]);
            let p = self.points[n];
            if jumps.peek().is_some_and(|j| j.index == n) {
                let j = jumps.next().expect("peeked");
                let dr = p.r - img.r;
                if p.theta != img.theta || !(dr > 0.0 && dr < self.delta_prime) {
                    return Err(GeoError::Construction(format!("illegal jump at {n}: Δr = {dr:e}")));
                }
                let _ = j;
            } else if p != img {
                return Err(GeoError::Construction(format!("step {n} is not a map iterate")));
            }
        }
        if jumps.next().is_some() {
            return Err(GeoError::Construction("jump log beyond the orbit".into()));
        }
        Ok(())
    }

    /// `n,theta,r,jump` rows; `jump` is the radial jump size or empty.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| GeoError::InvalidInput(format!("dump write failed: {e}"));
        writeln!(out, "n,theta,r,jump").map_err(io)?;
        let mut jumps = self.jump_log.iter().peekable();
        for (n, p) in self.points.iter().enumerate() {
            let j = match jumps.peek() {
                Some(j) if j.index == n => format!("{:e}", jumps.next().expect("peeked").size),
                _ => String::new(),
            };
            writeln!(out, "{n},{:e},{:e},{j}", p.theta, p.r).map_err(io)?;
        }
        Ok(())
    }
}

/// Number of circles at or below `p`, with slack `eta`.
fn level(circles: &[InvariantCircleEstimate], p: &TwistPoint, eta: f64) -> usize {
    circles.iter().take_while(|c| c.psi(p.theta) <= p.r + eta).count()
}

/// Climbs from `Γ₀` at `θ = 0` to (or above) `Γ₂`.
///
/// Integrable maps get the deterministic ladder of `⌊Δ/δ'⌋ + 1` equal
/// jumps. Otherwise the orbit climbs off circles by `0.9δ'`, waits in a
/// zone up to `patience` steps for a point within `δ'` below the upper
/// boundary (then jumps onto it), and climbs again if none shows up.
pub fn build_climbing_pseudo_orbit(
    params: &TwistMapParams,
    circles: &[InvariantCircleEstimate],
    delta_prime: f64,
    opts: &ClimbOptions,
) -> Result<TwistPseudoOrbit> {
    if circles.len() != 3 {
        return Err(GeoError::InvalidInput(format!("need three circles, got {}", circles.len())));
    }
    if !(delta_prime > 0.0) || opts.min_spacing == 0 {
        return Err(GeoError::InvalidInput("δ' and the jump spacing must be positive".into()));
    }
    for w in circles.windows(2) {
        if !w[0].graph_samples.iter().zip(&w[1].graph_samples).all(|(a, b)| a < b) {
            return Err(GeoError::InvalidInput("circles must be ordered Γ₀ < Γ₁ < Γ₂".into()));
        }
    }
    let eta = (delta_prime * 1e-2).min(1e-6);
    let start = TwistPoint::new(0.0, circles[0].psi(0.0));
    let ladder = params.is_integrable();
    let ladder_jump = {
        let span = circles[2].psi(0.0) - start.r;
        let mut n = (span / delta_prime).floor() + 1.0;
        while span / n >= delta_prime * (1.0 - 1e-9) {
            n += 1.0;
        }
        span / n
    };
    let climb = if ladder { ladder_jump } else { 0.9 * delta_prime };
    let mut points = vec![start];
    let mut jump_log = Vec::new();
    let mut zones: Vec<ZoneCrossing> = Vec::new();
    let mut last_jump = 0usize;
    let mut current: Option<usize> = None;
    let mut arrived: Option<usize> = None;
    let mut x = start;
    loop {
        let n = points.len();
        if let Some(a) = arrived {
            if n > a + opts.tail {
                break;
            }
        }
        if n > opts.max_steps {
            return Err(GeoError::Construction(format!(
                "no transit within {} steps; stuck in zone {:?}",
                opts.max_steps, current
            )));
        }
        let mut y = params.apply(&x);
        if !y.r.is_finite() {
            return Err(GeoError::Construction(format!("map undefined at step {n}")));
        }
        if arrived.is_none() && n - last_jump >= opts.min_spacing {
            let g = level(circles, &y, eta);
            let on_circle = g > 0 && (y.r - circles[g - 1].psi(y.theta)).abs() <= eta;
            let gap = if g < 3 { circles[g].psi(y.theta) - y.r } else { 0.0 };
            let jump = if ladder {
                Some((climb, JumpKind::Climb))
            } else if !on_circle && gap > 0.0 && gap < delta_prime && g > 0 {
                Some((gap, JumpKind::ZoneTransit))
            } else if on_circle || n - last_jump >= opts.patience {
                Some((climb, JumpKind::Climb))
            } else {
                None
            };
            if let Some((size, kind)) = jump {
                let r1 = y.r + size;
                let realized = r1 - y.r;
                if realized > 0.0 && realized < delta_prime {
                    y = TwistPoint::new(y.theta, r1);
                    jump_log.push(TwistJump {
                        index: n,
                        size: realized,
                        kind,
                    });
                    last_jump = n;
                }
            }
        }
        let g = level(circles, &y, eta);
        let on = g > 0 && (y.r - circles[g - 1].psi(y.theta)).abs() <= eta;
        let zone = ((1..3).contains(&g) && !on).then(|| g - 1);
        if zone != current {
            if let Some(z) = zones.last_mut().filter(|z| z.left == 0) {
                z.left = n;
            }
            if let Some(lower) = zone {
                zones.push(ZoneCrossing {
                    lower,
                    entered: n,
                    left: 0,
                    jumps: 0,
                });
            }
            current = zone;
        }
        if arrived.is_none() && (g >= 3 || y.r >= circles[2].psi(y.theta) - 1e-12) {
            arrived = Some(n);
        }
        points.push(y);
        x = y;
    }
    for z in zones.iter_mut() {
        if z.left == 0 {
            z.left = points.len();
        }
        z.jumps = jump_log.iter().filter(|j| j.index > z.entered && j.index < z.left).count();
    }
    let spacing = jump_log
        .windows(2)
        .map(|w| w[1].index - w[0].index)
        .min()
        .unwrap_or(points.len());
    let po = TwistPseudoOrbit {
        points,
        jump_log,
        delta_prime,
        spacing,
        zones,
    };
    po.verify(params)?;
    Ok(po)
}
