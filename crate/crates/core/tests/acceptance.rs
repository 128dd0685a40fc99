//! Acceptance criteria with analytic or self-consistent oracles. Each test
//! prints one `[criterion N] ... PASS|FAIL` line before asserting.

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use geoflow_core::flow::MidpointStepper;
use geoflow_core::poincare::*;
use geoflow_core::shadowing::*;
use geoflow_core::twist::*;
use geoflow_core::*;
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(m: &MetricField, x: [f64; 2], p: [f64; 2]) -> UnitCotangentState {
    renormalize_energy(m, &CotangentState::new(x, Vector2::new(p[0], p[1]))).unwrap()
}

fn verdict(n: u32, title: &str, pass: bool, detail: String, started: Instant, limit: Duration) {
    let elapsed = started.elapsed();
    let in_time = elapsed <= limit;
    let ok = pass && in_time;
    println!(
        "[criterion {n}] {title}: {} ({detail}; {:.1}s of {}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(in_time, "criterion {n} exceeded its runtime limit");
}

fn torus() -> MetricField {
    MetricField::torus_of_revolution(2.0, 1.0).unwrap()
}

fn corpus_bump() -> ConformalBump {
    ConformalBump::new([1.0, 0.15], 0.5, 0.05).unwrap()
}

fn corpus() -> Vec<(&'static str, MetricField)> {
    let t = torus();
    let b = t.apply_conformal_bump(corpus_bump()).unwrap();
    vec![("flat torus", MetricField::standard_flat_torus()), ("torus R=2 r=1", t), ("bumped torus", b)]
}

fn inner_equator(m: &MetricField) -> ClosedOrbit {
    find_periodic_orbit(m, &unit(m, [0.3, PI], [1.0, 0.0]), TAU, &FlowSettings::default()).unwrap()
}

fn outer_equator(m: &MetricField) -> ClosedOrbit {
    find_periodic_orbit(m, &unit(m, [0.3, 0.0], [1.0, 0.0]), 6.0 * PI, &FlowSettings::default()).unwrap()
}

#[test]
fn criterion_01_energy_and_symplectic_structure() {
    let t0 = Instant::now();
    let st = FlowSettings::default();
    let mut worst_h: f64 = 0.0;
    let mut worst_det: f64 = 0.0;
    for (_, m) in corpus() {
        let stepper = MidpointStepper::new(&m, st);
        for (x, p) in [([0.3, 1.1], [0.8, 0.45]), ([2.0, 5.5], [-0.2, 1.0]), ([4.0, 0.2], [1.0, 0.05])] {
            let s = unit(&m, x, p);
            let mut z = s.to_vec4();
            for _ in 0..1000 {
                z = stepper.flow_raw(&z, 1.0).unwrap();
                let h = m.energy_at(&z);
                worst_h = worst_h.max((h - 0.5).abs());
            }
            for t in [10.0, 50.0, 100.0] {
                let rec = flow_with_monodromy(&m, &s, t, &st).unwrap();
                worst_det = worst_det.max((rec.matrix.determinant() - 1.0).abs());
            }
        }
    }
    verdict(
        1,
        "energy drift and monodromy determinant over the metric corpus",
        worst_h <= 1e-6 && worst_det <= 1e-6,
        format!("max |H-1/2| = {worst_h:.2e}, max |det-1| = {worst_det:.2e}"),
        t0,
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_02_clairaut_conservation() {
    let t0 = Instant::now();
    let m = torus();
    let stepper = MidpointStepper::new(&m, FlowSettings::default());
    let s = unit(&m, [0.3, 1.1], [0.8, 0.45]);
    let pu0 = s.p()[0];
    let mut z = s.to_vec4();
    let mut drift: f64 = 0.0;
    for _ in 0..1000 {
        z = stepper.flow_raw(&z, 1.0).unwrap();
        drift = drift.max((z[2] - pu0).abs());
    }
    verdict(
        2,
        "Clairaut integral p_u over t = 1000",
        drift <= 1e-8,
        format!("max |Δp_u| = {drift:.2e}"),
        t0,
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_03_jacobi_classification_oracle() {
    let t0 = Instant::now();
    let m = torus();
    let opts = ClassifyOptions::default();
    let (_, inner, _) = analyze_orbit(&m, &inner_equator(&m), &opts).unwrap();
    let (_, outer, _) = analyze_orbit(&m, &outer_equator(&m), &opts).unwrap();
    let want_in = 2.0 * TAU.cosh();
    let want_out = 2.0 * (TAU * 3f64.sqrt()).cos();
    let rel_in = ((inner.trace - want_in) / want_in).abs();
    let rel_out = ((outer.trace - want_out) / want_out).abs();
    // surface of revolution with K = 1 along a closed equator of length 2π
    let k1 = MetricField::surface_of_revolution(RevolutionProfile {
        major: 0.7525,
        minor: 0.3,
        ripple: -0.0525,
    })
    .unwrap();
    assert!((k1.gaussian_curvature([0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
    let eq = find_periodic_orbit(&k1, &unit(&k1, [0.3, 0.0], [1.0, 0.0]), TAU, &FlowSettings::default()).unwrap();
    let dp = transversal_linear_poincare(&k1, &eq).unwrap();
    let k1_class = classify_orbit(&dp, &ClassifyOptions { band: 1e-4, ..opts }).unwrap();
    let pass = rel_in <= 1e-3
        && rel_out <= 1e-3
        && inner.kind.is_hyperbolic()
        && matches!(outer.kind, OrbitKind::EllipticIrrational { .. })
        && (dp.trace() - 2.0).abs() <= 1e-4
        && matches!(k1_class.kind, OrbitKind::Parabolic { .. });
    verdict(
        3,
        "Jacobi traces and Floquet types of the equators",
        pass,
        format!(
            "inner {:.4} ({}, rel {rel_in:.1e}), outer {:.6} ({}, rel {rel_out:.1e}), K=1 trace {:.8} ({})",
            inner.trace,
            inner.kind.name(),
            outer.trace,
            outer.kind.name(),
            dp.trace(),
            k1_class.kind.name()
        ),
        t0,
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_04_section_independence() {
    let t0 = Instant::now();
    let t = torus();
    let b = t.apply_conformal_bump(corpus_bump()).unwrap();
    let flat = MetricField::standard_flat_torus();
    let flat_orbit =
        find_periodic_orbit(&flat, &unit(&flat, [0.5, 1.0], [1.0, 0.0]), TAU, &FlowSettings::default()).unwrap();
    let orbits = vec![
        ("flat", flat.clone(), flat_orbit),
        ("inner", t.clone(), inner_equator(&t)),
        ("outer", t.clone(), outer_equator(&t)),
        ("bumped", b.clone(), outer_equator(&b)),
    ];
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (name, m, o) in &orbits {
        let tr = transversal_linear_poincare(m, o).unwrap().trace();
        let (_, dp2) = transversal_linear_poincare_at(m, o, 0.37, Some(o.section.coordinate)).unwrap();
        // relative to max(1, |tr|) so the hyperbolic trace ≈ 535 is judged on its digits
        let d = (dp2.trace() - tr).abs() / tr.abs().max(1.0);
        worst = worst.max(d);
        detail.push(format!("{name} {d:.1e}"));
    }
    verdict(
        4,
        "trace agreement across two sections",
        worst <= 1e-6,
        detail.join(", "),
        t0,
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_05_trace_perturbation_sweep() {
    let t0 = Instant::now();
    let m = torus();
    let o = outer_equator(&m);
    let bump = corpus_bump();
    let da = 0.002;
    let grid: Vec<f64> = (-10..=10).map(|i| i as f64 * da).collect();
    let sweep = trace_perturbation_sweep(&m, &o, &bump, &grid).unwrap();
    // local response from probes at ±Δa/10 around each amplitude
    let probe_amps: Vec<f64> = grid.iter().flat_map(|a| [a - da / 10.0, a + da / 10.0]).collect();
    let probes = trace_perturbation_sweep(&m, &o, &bump, &probe_amps).unwrap();
    let trace_at = |s: &TraceSweep, a: f64| {
        s.entries
            .iter()
            .find(|e| (e.amplitude - a).abs() < 1e-12)
            .map(|e| e.trace)
    };
    let local = |a: f64| -> Option<f64> {
        let lo = trace_at(&probes, a - da / 10.0)?;
        let hi = trace_at(&probes, a + da / 10.0)?;
        Some(((hi - lo) / (da / 5.0)).abs())
    };
    let mut continuous = sweep.truncated.is_empty() && probes.truncated.is_empty();
    let mut worst_ratio: f64 = 0.0;
    for w in sweep.entries.windows(2) {
        let gap = (w[1].trace - w[0].trace).abs();
        match (local(w[0].amplitude), local(w[1].amplitude)) {
            (Some(s0), Some(s1)) => {
                let bound = 5.0 * s0.max(s1) * (w[1].amplitude - w[0].amplitude);
                worst_ratio = worst_ratio.max(gap / bound * 5.0);
                continuous &= gap <= bound;
            }
            _ => continuous = false,
        }
    }
    let (lo, hi) = sweep.trace_range();
    let covers = sweep.covers_base() && sweep.entries.len() == grid.len();
    verdict(
        5,
        "trace sweep over conformal bump amplitudes",
        continuous && covers,
        format!(
            "{} amplitudes, range [{lo:.6}, {hi:.6}] around {:.6}, width {:.3e}, worst gap/response {worst_ratio:.2}",
            sweep.entries.len(),
            sweep.base_trace,
            sweep.width()
        ),
        t0,
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_06_shadowing_positive_control() {
    let t0 = Instant::now();
    let st = FlowSettings::default();
    let m = torus();
    let s = unit(&m, [0.3, PI], [1.0, 0.0]);
    let mut chain = PseudoGeodesic::from_orbit(&m, &s, -5, 11, 1.0, &st).unwrap();
    let z = *chain.states[5].state();
    chain.states[5] = unit(&m, [z.x[0], z.x[1] + 5e-5], [z.p[0], z.p[1]]);
    chain.delta = 1e-4;
    let v = validate_chain(&m, &chain, 1e-4, 1.0, &st).unwrap();
    let r = shadow_search(&m, &chain, 1e-2, 8.0, &SearchBudget::default(), &st).unwrap();
    let rep_ok = r.reparam.as_ref().is_some_and(|t| t.max_deviation() < 0.05);
    verdict(
        6,
        "δ-chain along the hyperbolic inner equator is shadowed",
        v.valid && r.verdict == Verdict::Found && rep_ok && r.refined_sup.is_some_and(|x| x < 1e-2),
        format!(
            "max jump {:.1e}, verdict {:?}, sup {:.2e}, refined {:.2e}, |τ'-1| ≤ {:.1e}",
            v.max_jump,
            r.verdict,
            r.achieved_sup,
            r.refined_sup.unwrap_or(f64::NAN),
            r.reparam.as_ref().map_or(f64::NAN, |t| t.max_deviation())
        ),
        t0,
        Duration::from_secs(120),
    );
}

/// Flat-torus chain whose momentum turns by `0.01` at every vertex.
fn drift_chain(m: &MetricField) -> PseudoGeodesic {
    let n = 11;
    let mut states = Vec::new();
    let mut x = [1.0, 2.0];
    for k in 0..n {
        let a = 0.3 + 0.01 * k as f64;
        let p = [a.cos(), a.sin()];
        states.push(unit(m, x, p));
        x = [x[0] + p[0], x[1] + p[1]];
    }
    PseudoGeodesic::from_parts(-5, states, vec![1.0; n], 0.0101, 1.0).unwrap()
}

/// Every true flat-torus orbit has constant momentum and `τ` does not touch
/// momentum, so the sup-distance is at least half the chain's momentum spread.
fn constant_momentum_bound(chain: &PseudoGeodesic) -> f64 {
    let mut spread: f64 = 0.0;
    for a in &chain.states {
        for b in &chain.states {
            spread = spread.max((a.p() - b.p()).norm());
        }
    }
    0.5 * spread
}

#[test]
fn criterion_07_analytic_constant_momentum_oracle() {
    let m = MetricField::standard_flat_torus();
    let chain = drift_chain(&m);
    let bound = constant_momentum_bound(&chain);
    // total turn 0.1 rad: chord 2 sin(0.05)
    assert!((bound - (0.05f64).sin()).abs() < 1e-12);
    assert!(bound > 1e-2);
}

#[test]
fn criterion_07_shadowing_negative_control() {
    let t0 = Instant::now();
    let st = FlowSettings::default();
    let m = MetricField::standard_flat_torus();
    let eps = 1e-2;
    let chain = drift_chain(&m);
    let v = validate_chain(&m, &chain, chain.delta, 1.0, &st).unwrap();
    let drift = (chain.states[0].p() - chain.states[chain.len() - 1].p()).norm();
    let bound = constant_momentum_bound(&chain);
    let grid = SeedGrid {
        positions: [16, 16],
        angles: 32,
    };
    let budget = SearchBudget {
        grid: Some(grid),
        ..SearchBudget::default()
    };
    let r = shadow_search(&m, &chain, eps, 6.0, &budget, &st).unwrap();
    let pass = v.valid
        && (drift / eps - 10.0).abs() < 0.01
        && r.verdict == Verdict::NotFound
        && bound >= eps
        && r.achieved_sup >= bound;
    verdict(
        7,
        "flat-torus momentum-drift chain is not shadowed at the declared grid",
        pass,
        format!(
            "drift {:.2}ε, verdict {:?} over {} seeds, best sup {:.3e} ≥ analytic bound {bound:.3e}",
            drift / eps,
            r.verdict,
            r.effort.seeds_screened,
            r.achieved_sup
        ),
        t0,
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_08_integrable_ladder() {
    let t0 = Instant::now();
    let p = TwistMapParams::integrable(1.0, 0.2, 0.6).unwrap();
    let eps = 0.05;
    let circles: Vec<_> = [0.3, 0.3 + 2.0 * eps, 0.3 + 4.0 * eps]
        .iter()
        .map(|&r| InvariantCircleEstimate::flat(&p, r, 256))
        .collect();
    let eps_prime = circle_separation(&circles);
    let po = build_climbing_pseudo_orbit(&p, &circles, eps_prime / 10.0, &ClimbOptions::default()).unwrap();
    let climb = po.points.last().unwrap().r - po.points[0].r;
    let grid = CertificateGrid::over(&p, 256);
    let cert = certify_non_shadowable(&p, &po, &circles, &grid, DEFAULT_SLACK).unwrap();
    let control = TwistPseudoOrbit::true_orbit(&p, TwistPoint::new(0.2, 0.41), po.len());
    let control_cert = certify_non_shadowable(&p, &control, &circles, &grid, DEFAULT_SLACK).unwrap();
    // r is conserved: an orbit at radius r misses one end of the climb by max(|r - r₀|, |r - r_end|) ≥ Δr/2
    let analytic_not = climb / 2.0 >= eps_prime;
    let pass = (climb - 4.0 * eps_prime).abs() < 1e-12
        && cert.conclusion == Conclusion::NotShadowedAtResolution
        && analytic_not
        && control_cert.conclusion == Conclusion::Shadowed;
    verdict(
        8,
        "integrable ladder not shadowed, zero-jump control shadowed",
        pass,
        format!(
            "Δr = {:.3}ε', {} jumps, min distance {:.3e} vs ε' {eps_prime:.3e}, control {:.2e}",
            climb / eps_prime,
            po.jump_log.len(),
            cert.min_distance,
            control_cert.min_distance
        ),
        t0,
        Duration::from_secs(60),
    );
}

const GOLDEN_LOW: f64 = 0.381_966_011_250_105_1;

struct StandardDemo {
    params: TwistMapParams,
    circles: Vec<InvariantCircleEstimate>,
    po: TwistPseudoOrbit,
    eps_prime: f64,
}

fn standard_demo() -> StandardDemo {
    let params = TwistMapParams::standard_map(0.9, 0.0, 2.0).unwrap();
    let circles: Vec<_> = [GOLDEN_LOW, 1.0 - GOLDEN_LOW, 1.0 + GOLDEN_LOW]
        .iter()
        .map(|&rho| {
            detect_invariant_circle(&params, rho, 1e-8, &CircleOptions::default())
                .unwrap()
                .circle()
                .cloned()
                .expect("circle at k = 0.9")
        })
        .collect();
    let eps_prime = circle_separation(&circles);
    let opts = ClimbOptions {
        min_spacing: 50,
        patience: 100,
        ..ClimbOptions::default()
    };
    let po = build_climbing_pseudo_orbit(&params, &circles, eps_prime / 10.0, &opts).unwrap();
    StandardDemo {
        params,
        circles,
        po,
        eps_prime,
    }
}

#[test]
fn criterion_09_standard_map_demonstration() {
    let t0 = Instant::now();
    let d = standard_demo();
    let ordered = d.circles.windows(2).all(|w| w[0].rotation_number < w[1].rotation_number);
    let grid = CertificateGrid::over(&d.params, 1024);
    let cert = certify_non_shadowable(&d.params, &d.po, &d.circles, &grid, DEFAULT_SLACK).unwrap();
    let pass = d.circles.len() == 3
        && ordered
        && d.po.spacing >= 50
        && d.po.verify(&d.params).is_ok()
        && grid.cells() >= 1_000_000
        && cert.conclusion == Conclusion::NotShadowedAtResolution;
    verdict(
        9,
        "standard map k = 0.9 climbing pseudo-orbit not shadowed on a 1024² grid",
        pass,
        format!(
            "ε' = {:.4}, {} points, {} jumps ({} transits), min distance {:.4}",
            d.eps_prime,
            d.po.len(),
            d.po.jump_log.len(),
            d.po.jump_log.iter().filter(|j| j.kind == JumpKind::ZoneTransit).count(),
            cert.min_distance
        ),
        t0,
        Duration::from_secs(600),
    );
}

#[test]
fn criterion_10_embedding_fidelity() {
    let t0 = Instant::now();
    let d = standard_demo();
    let m = torus();
    let o = outer_equator(&m);
    let section = TransversalSection::through(&m, &o.start, o.section.coordinate).unwrap();
    let h = SymplecticPolarMap::new(&section, 1e-4).unwrap();
    let e = embed_as_pseudo_geodesic(&m, &o, &section, &d.po, &h, &FlowSettings::with_step(0.01)).unwrap();
    let ell = e.period;
    let in_band = e.return_times.iter().all(|&t| t >= 0.5 * ell && t <= 1.5 * ell);
    let v = validate_chain(&m, &e.chain, e.chain.delta, 0.5 * ell, &FlowSettings::with_step(0.01)).ok();
    let pass = e.validation.valid && in_band && (e.t_min - 0.5 * ell).abs() < 1e-12 && v.is_none_or(|v| v.valid);
    verdict(
        10,
        "embedded pseudo-geodesic validates with return times near ℓ",
        pass,
        format!(
            "{} vertices, δ = {:.3e}, η = {:.2e}, ℓ = {ell:.4}",
            e.chain.len(),
            e.delta,
            e.eta
        ),
        t0,
        Duration::from_secs(180),
    );
}

#[test]
fn criterion_11_classification_honesty() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = ClassifyOptions::default();
    let mut violations = 0;
    let mut worst_rho: f64 = 0.0;
    for i in 0..10_000 {
        let (m, tr) = if i % 10 == 0 {
            // exact parabolic shears
            let s: f64 = rng.random_range(-3.0..3.0);
            let sign = if i % 20 == 0 { 1.0 } else { -1.0 };
            (nalgebra::Matrix2::new(sign, s, 0.0, sign), 2.0 * sign)
        } else {
            let mut tr: f64 = rng.random_range(-4.0..4.0);
            while (tr.abs() - 2.0).abs() < 1e-6 {
                tr = rng.random_range(-4.0..4.0);
            }
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let c = (tr * tr / 4.0 - a * a - 1.0) / b;
            (nalgebra::Matrix2::new(tr / 2.0 + a, b, c, tr / 2.0 - a), tr)
        };
        let k = classify_orbit(&m, &opts).unwrap().kind;
        let ok = if tr.abs() > 2.0 {
            k.is_hyperbolic()
        } else if tr.abs() < 2.0 {
            k.is_elliptic()
        } else {
            matches!(k, OrbitKind::Parabolic { .. })
        };
        if !ok {
            violations += 1;
        }
        if tr.abs() < 2.0 {
            let want = (tr / 2.0).acos() / TAU;
            worst_rho = worst_rho.max((k.rotation_number().unwrap_or(f64::NAN) - want).abs());
        }
    }
    verdict(
        11,
        "trichotomy and rotation numbers on 10⁴ synthetic symplectic matrices",
        violations == 0 && worst_rho <= 1e-10,
        format!("{violations} violations, worst rotation error {worst_rho:.1e}"),
        t0,
        Duration::from_secs(60),
    );
}
