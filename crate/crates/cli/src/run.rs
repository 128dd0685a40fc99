use std::time::Instant;

use geoflow_core::flow::{flow_with_monodromy, sample_trajectory, write_trajectory_csv};
use geoflow_core::poincare::returns::{refine_crossing, scan_crossings};
use geoflow_core::poincare::{
    analyze_orbit, certify_hyperbolic_set, find_periodic_orbit, trace_perturbation_sweep, ClosedOrbit, OrbitReport,
    SectionSpec, TransversalSection,
};
use geoflow_core::shadowing::{
    shadow_search, validate_chain, weak_shadow_search, PseudoGeodesic, Verdict,
};
use geoflow_core::twist::{
    build_climbing_pseudo_orbit, certify_non_shadowable, circle_separation, detect_invariant_circle,
    embed_as_pseudo_geodesic, CertificateGrid, CircleDetection, CoordinateMap, FlatShearMap, InvariantCircleEstimate,
    JumpKind, SymplecticPolarMap, TwistMapParams,
};
use geoflow_core::{
    renormalize_energy, ConformalBump, CotangentState, FlowSettings, MetricField, UnitCotangentState,
};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::*;
use crate::plot::{Series, Style};
use crate::{CliError, Output};

pub(crate) fn dispatch(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
    metric: Option<&MetricField>,
) -> Result<Output, CliError> {
    // validate() guarantees the metric and the kind's table are present
    let need = || metric.expect("validated metric");
    match kind {
        ExperimentKind::Integrate => integrate(cfg, need(), cfg.integrate.as_ref().expect("validated")),
        ExperimentKind::FindPeriodic => find_periodic(cfg, need(), cfg.find_periodic.as_ref().expect("validated")),
        ExperimentKind::Classify => classify(cfg, need(), cfg.classify.as_ref().expect("validated")),
        ExperimentKind::PerturbTrace => perturb(cfg, need(), cfg.perturb_trace.as_ref().expect("validated")),
        ExperimentKind::ChainTest => chain_test(cfg, need(), cfg.chain_test.as_ref().expect("validated")),
        ExperimentKind::TwistDemo => twist_demo(cfg, metric, cfg.twist_demo.as_ref().expect("validated")),
    }
}

/// Initial states are user input, so failing to pin one is a config error.
fn unit(metric: &MetricField, x: [f64; 2], p: [f64; 2], what: &str) -> Result<UnitCotangentState, CliError> {
    renormalize_energy(metric, &CotangentState::new(x, Vector2::new(p[0], p[1])))
        .map_err(|e| CliError::Config(format!("{what}: {e}")))
}

fn orbit(metric: &MetricField, seed: &OrbitSeed, flow: &FlowSettings, what: &str) -> Result<ClosedOrbit, CliError> {
    let s = unit(metric, seed.x, seed.p, what)?;
    Ok(find_periodic_orbit(metric, &s, seed.period, flow)?)
}

fn xy_series(name: &str, orbit: &ClosedOrbit) -> Series {
    let mut pts: Vec<(f64, f64)> = orbit.samples.iter().map(|s| (s.x()[0], s.x()[1])).collect();
    pts.push((orbit.start.x()[0], orbit.start.x()[1]));
    Series::new(name, Style::Scatter, "u", "v", pts)
}

fn integrate(cfg: &ExperimentConfig, m: &MetricField, c: &IntegrateConfig) -> Result<Output, CliError> {
    let mut out = Output::default();
    let mut states = Vec::new();
    for (i, s) in c.states.iter().enumerate() {
        states.push(unit(m, s.x, s.p, &format!("integrate.states[{i}]"))?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ranges = m.chart().ranges;
    for _ in 0..c.random_states {
        let x = [
            rng.random_range(ranges[0].lo..ranges[0].hi),
            rng.random_range(ranges[1].lo..ranges[1].hi),
        ];
        let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        states.push(unit(m, x, [a.cos(), a.sin()], "random state")?);
    }
    let revolution = m.family_tag() == "SurfaceOfRevolution";
    let mut runs = Vec::new();
    for (i, s) in states.iter().enumerate() {
        let clock = Instant::now();
        let samples = sample_trajectory(m, s, c.t_end, c.every, &cfg.flow)?;
        let drift = samples.iter().map(|r| (r.h - 0.5).abs()).fold(0.0, f64::max);
        let pu = samples.iter().map(|r| (r.p_u - samples[0].p_u).abs()).fold(0.0, f64::max);
        let rec = flow_with_monodromy(m, s, c.t_end, &cfg.flow)?;
        let end = rec.end_state.to_vec4();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &samples)?;
        out.files.push((format!("trajectory_{i}.csv"), buf));
        if i == 0 {
            out.series.push(Series::new(
                "energy-drift",
                Style::Line,
                "t",
                "H - 1/2",
                samples.iter().map(|r| (r.t, r.h - 0.5)).collect(),
            ));
            out.series.push(Series::new(
                "trajectory",
                Style::Scatter,
                "u",
                "v",
                samples.iter().map(|r| (r.u, r.v)).collect(),
            ));
        }
        let mut run = json!({
            "start": s.to_vec4().as_slice(),
            "end": end.as_slice(),
            "max_energy_drift": drift,
            "monodromy_det_minus_one": rec.matrix.determinant() - 1.0,
            "samples": samples.len(),
        });
        if revolution {
            run["max_clairaut_drift"] = json!(pu);
        }
        if let Some(sec) = c.section {
            let spec = SectionSpec {
                coordinate: sec.coordinate,
                level: sec.level,
                orientation: 1,
            };
            let z0 = s.to_vec4();
            let times = scan_crossings(m, &spec, &z0, &cfg.flow, 0.0, c.t_end, c.max_crossings)?;
            let free = spec.free();
            let mut pts = Vec::with_capacity(times.len());
            for t in times {
                let x = refine_crossing(m, &spec, &z0, &cfg.flow, t)?;
                let w = m.chart().wrap([x.z[0], x.z[1]])?;
                pts.push((w[free], x.z[2 + free]));
            }
            run["section_crossings"] = json!(pts.len());
            if i == 0 {
                let name = if free == 0 { ["u", "p_u"] } else { ["v", "p_v"] };
                out.series.push(Series::new("poincare-section", Style::Scatter, name[0], name[1], pts));
            }
        }
        out.timings.push((format!("trajectory_{i}"), clock.elapsed().as_secs_f64()));
        runs.push(run);
    }
    out.result = json!({ "metric": m.family_tag(), "trajectories": runs });
    Ok(out)
}

fn find_periodic(cfg: &ExperimentConfig, m: &MetricField, c: &OrbitsConfig) -> Result<Output, CliError> {
    let mut out = Output::default();
    let mut found = Vec::new();
    for (i, s) in c.orbits.iter().enumerate() {
        let o = orbit(m, s, &cfg.flow, &format!("find_periodic.orbits[{i}]"))?;
        let z = o.start.to_vec4();
        found.push(json!({
            "period": o.period,
            "residual": o.residual,
            "section": o.section,
            "crossings": o.crossings,
            "start": z.as_slice(),
            "period_flagged": o.period_flagged,
            "newton_residuals": o.newton_residuals,
        }));
        out.series.push(xy_series(&format!("orbit-{i}"), &o));
    }
    out.result = json!({ "metric": m.family_tag(), "orbits": found });
    Ok(out)
}

fn classify(cfg: &ExperimentConfig, m: &MetricField, c: &ClassifyConfig) -> Result<Output, CliError> {
    let mut out = Output::default();
    let mut reports: Vec<OrbitReport> = Vec::new();
    let mut pairs = Vec::new();
    let mut matrices = Vec::new();
    for (i, s) in c.orbits.iter().enumerate() {
        let o = orbit(m, s, &cfg.flow, &format!("classify.orbits[{i}]"))?;
        let (dp, _, report) = analyze_orbit(m, &o, &c.options)?;
        matrices.push([[dp[(0, 0)], dp[(0, 1)]], [dp[(1, 0)], dp[(1, 1)]]]);
        reports.push(report);
        out.series.push(xy_series(&format!("orbit-{i}"), &o));
        pairs.push((o, dp));
    }
    let mut result = json!({ "metric": m.family_tag(), "orbits": reports, "matrices": matrices });
    if let Some(cert) = c.certify {
        result["hyperbolicity"] = match certify_hyperbolic_set(&pairs, cert.theta, cert.m) {
            Ok(h) => serde_json::to_value(h).expect("certificate serializes"),
            Err(e @ geoflow_core::GeoError::Refused(_)) => json!({ "refused": e.to_string() }),
            Err(e) => return Err(e.into()),
        };
    }
    out.result = result;
    Ok(out)
}

fn amplitudes(c: &PerturbConfig) -> Vec<f64> {
    if let Some(a) = &c.amplitudes {
        return a.clone();
    }
    let r = c.range.expect("validated");
    let n = ((r.to - r.from) / r.step + 1e-9).floor() as i64;
    (0..=n).map(|k| r.from + k as f64 * r.step).collect()
}

fn perturb(cfg: &ExperimentConfig, m: &MetricField, c: &PerturbConfig) -> Result<Output, CliError> {
    let mut out = Output::default();
    let o = orbit(m, &c.orbit, &cfg.flow, "perturb_trace.orbit")?;
    let bump = ConformalBump::new(c.bump.center, c.bump.radius, 0.0).map_err(|e| CliError::Config(e.to_string()))?;
    let sweep = trace_perturbation_sweep(m, &o, &bump, &amplitudes(c))?;
    let (lo, hi) = sweep.trace_range();
    let mut buf = Vec::new();
    sweep.write_csv(&mut buf)?;
    out.files.push(("sweep.csv".into(), buf));
    out.series.push(Series::new(
        "trace-sweep",
        Style::Line,
        "amplitude",
        "trace",
        sweep.entries.iter().map(|e| (e.amplitude, e.trace)).collect(),
    ));
    if let Some(f) = &sweep.failure {
        out.warnings.push(format!("sweep truncated: {f}"));
    }
    out.result = json!({
        "metric": m.family_tag(),
        "period": o.period,
        "trace_range": [lo, hi],
        "width": sweep.width(),
        "covers_base": sweep.covers_base(),
        "max_slope": sweep.max_slope(),
        "sweep": sweep,
    });
    Ok(out)
}

fn chain_test(cfg: &ExperimentConfig, m: &MetricField, c: &ChainConfig) -> Result<Output, CliError> {
    let mut out = Output::default();
    let start = unit(m, c.start.x, c.start.p, "chain_test.start")?;
    let mut chain = PseudoGeodesic::from_orbit(m, &start, c.first_index, c.len, c.segment_time, &cfg.flow)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if c.kick > 0.0 {
        for k in 1..chain.len() - 1 {
            let z = *chain.states[k].state();
            let dx = [rng.random_range(-c.kick..=c.kick), rng.random_range(-c.kick..=c.kick)];
            chain.states[k] = renormalize_energy(
                m,
                &CotangentState::new([z.x[0] + dx[0], z.x[1] + dx[1]], z.p),
            )?;
        }
    }
    chain.delta = c.delta;
    let validation = validate_chain(m, &chain, c.delta, c.segment_time, &cfg.flow)?;
    out.series.push(Series::new(
        "chain-vertices",
        Style::Scatter,
        "u",
        "v",
        chain.states.iter().map(|s| (s.x()[0], s.x()[1])).collect(),
    ));
    if !validation.valid {
        return Err(CliError::Numerical(geoflow_core::GeoError::Construction(format!(
            "kicked chain is not a ({}, {}) chain: bad jumps at {:?} (max jump {:.3e})",
            c.delta, c.segment_time, validation.bad_jumps, validation.max_jump
        ))));
    }
    let clock = Instant::now();
    let (verdict, report) = match c.mode {
        ShadowMode::Strong => {
            let r = shadow_search(m, &chain, c.epsilon, c.horizon, &c.budget, &cfg.flow)?;
            (r.verdict, serde_json::to_value(&r).expect("report serializes"))
        }
        ShadowMode::Weak => {
            let r = weak_shadow_search(m, &chain, c.epsilon, &c.budget, &cfg.flow)?;
            (r.verdict, serde_json::to_value(&r).expect("report serializes"))
        }
    };
    out.timings.push(("search".into(), clock.elapsed().as_secs_f64()));
    out.inconclusive_only = verdict == Verdict::Inconclusive;
    out.result = json!({
        "metric": m.family_tag(),
        "mode": c.mode,
        "validation": {
            "valid": validation.valid,
            "max_jump": validation.max_jump,
            "min_time": validation.min_time,
        },
        "verdict": verdict,
        "search": report,
    });
    Ok(out)
}

fn circles(p: &TwistMapParams, c: &CirclesConfig) -> Result<Vec<InvariantCircleEstimate>, CliError> {
    if let Some(radii) = &c.radii {
        if !p.is_integrable() {
            return Err(CliError::Config("flat circles by radius need an integrable map".into()));
        }
        return Ok(radii.iter().map(|&r| InvariantCircleEstimate::flat(p, r, c.options.grid)).collect());
    }
    let mut found = Vec::new();
    for &rho in c.rotation_numbers.as_ref().expect("validated") {
        match detect_invariant_circle(p, rho, c.tolerance, &c.options)? {
            CircleDetection::Found(circ) => found.push(circ),
            CircleDetection::AbsentAtResolution(w) => {
                return Err(CliError::Numerical(geoflow_core::GeoError::Construction(format!(
                    "no invariant circle with rotation number {rho}: orbit from ({:.6}, {:.6}) spans r ∈ [{:.6}, {:.6}]",
                    w.start.theta, w.start.r, w.r_min, w.r_max
                ))))
            }
        }
    }
    Ok(found)
}

fn twist_demo(cfg: &ExperimentConfig, metric: Option<&MetricField>, c: &TwistDemoConfig) -> Result<Output, CliError> {
    let mut out = Output::default();
    let p = TwistMapParams::new(c.map.family, c.map.r_lo, c.map.r_hi).map_err(|e| CliError::Config(e.to_string()))?;
    let circles = circles(&p, &c.circles)?;
    let eps = circle_separation(&circles);
    let delta_prime = c.delta_prime_fraction * eps;
    let po = build_climbing_pseudo_orbit(&p, &circles, delta_prime, &c.climb)?;
    let grid = CertificateGrid::over(&p, c.grid);
    let cert = certify_non_shadowable(&p, &po, &circles, &grid, c.slack)?;
    out.timings.push(("certificate".into(), cert.wall_time));
    let mut dump = Vec::new();
    po.write_dump(&mut dump)?;
    out.files.push(("pseudo_orbit.csv".into(), dump));
    let mut cert_json = serde_json::to_string_pretty(&cert).expect("certificate serializes");
    cert_json.push('\n');
    out.files.push(("certificate.json".into(), cert_json.into_bytes()));
    let mut profile = Series::new(
        "r-profile",
        Style::Line,
        "n",
        "r",
        po.points.iter().enumerate().map(|(n, q)| (n as f64, q.r)).collect(),
    );
    profile.markers = po.jump_log.iter().map(|j| (j.index as f64, po.points[j.index].r)).collect();
    out.series.push(profile);
    let mut result = json!({
        "map": p,
        "circles": circles.iter().map(|g| json!({
            "rotation_number": g.rotation_number,
            "mean_radius": g.mean_radius(),
            "invariance_residual": g.invariance_residual,
            "lipschitz_bound": g.lipschitz_bound,
        })).collect::<Vec<_>>(),
        "epsilon_prime": eps,
        "delta_prime": delta_prime,
        "pseudo_orbit": {
            "len": po.len(),
            "jumps": po.jump_log.len(),
            "zone_transits": po.jump_log.iter().filter(|j| j.kind == JumpKind::ZoneTransit).count(),
            "spacing": po.spacing,
            "zones": po.zones,
        },
        "certificate": cert,
    });
    if let Some(e) = c.embed {
        let m = metric.expect("validated metric");
        let clock = Instant::now();
        let o = orbit(m, &e.orbit, &cfg.flow, "twist_demo.embed.orbit")?;
        let section = TransversalSection::through(m, &o.start, o.section.coordinate)?;
        let map: Box<dyn CoordinateMap> = match e.coordinate_map {
            CoordinateMapKind::SymplecticPolar => Box::new(SymplecticPolarMap::new(&section, e.scale)?),
            CoordinateMapKind::FlatShear => {
                Box::new(FlatShearMap::new(m, &section).map_err(|err| CliError::Config(err.to_string()))?)
            }
        };
        let settings = e.step.map_or(cfg.flow, FlowSettings::with_step);
        let emb = embed_as_pseudo_geodesic(m, &o, &section, &po, map.as_ref(), &settings)?;
        out.timings.push(("embedding".into(), clock.elapsed().as_secs_f64()));
        let (tmin, tmax) = emb
            .return_times
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
        out.series.push(Series::new(
            "return-times",
            Style::Line,
            "n",
            "t_n",
            emb.return_times.iter().enumerate().map(|(n, &t)| (n as f64, t)).collect(),
        ));
        result["embedding"] = json!({
            "coordinate_map": emb.coordinate_map,
            "period": emb.period,
            "valid": emb.validation.valid,
            "delta": emb.delta,
            "t_min": emb.t_min,
            "eta": emb.eta,
            "return_time_range": [tmin, tmax],
            "lipschitz": emb.lipschitz,
            "max_twist_jump": emb.max_twist_jump,
        });
    }
    out.result = result;
    Ok(out)
}
