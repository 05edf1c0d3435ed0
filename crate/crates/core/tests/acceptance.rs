//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cpulse::echo::{efficiency_fraction, efficiency_map_with, rephasing_efficiency, EchoProtocol, Ensemble, ANALOG_PI_DURATION};
use cpulse::maps::{level_region_fraction, scan_with, Grid, RobustnessMap, ScanOptions};
use cpulse::pulses::{analytic_rabi, base_propagator, integrate, ErrorModel, IntegratorConfig, PulseShape, PulseSpec};
use cpulse::sequences::{catalog, execute, full_catalog, CompositeSequence};
use cpulse::solver::{equivalent_phases, extract_coefficients, fit_error_exponent, order_of_error, resolve, solve_phases, FitConfig};
use cpulse::su2::make_propagator;

type Outcome = (bool, String);

fn report(id: usize, name: &str, run: impl FnOnce() -> Result<Outcome, cpulse::Error>) -> bool {
    let start = Instant::now();
    let (ok, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
    println!(
        "criterion {id} [{}] {name}: {detail} ({:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    ok
}

fn rect() -> PulseSpec {
    PulseSpec::with_area(PulseShape::Rectangular, 1.0, PI).unwrap()
}

fn table_recovery() -> Result<Outcome, cpulse::Error> {
    let budget = 120.0;
    let mut ok = true;
    let mut notes = Vec::new();

    let t = Instant::now();
    let r3 = solve_phases(3, 512)?;
    let hit3 = r3.len() == 1 && equivalent_phases(&r3[0].phases, &[0.0, PI / 2.0, 0.0], 1e-6);
    let dt3 = t.elapsed().as_secs_f64();
    ok &= hit3 && dt3 <= budget;
    notes.push(format!("n=3 {} families, phi2/pi={:.9} [{dt3:.1}s]", r3.len(), r3.first().map_or(f64::NAN, |r| r.phases[1] / PI)));

    let t = Instant::now();
    let r5 = solve_phases(5, 512)?;
    let want5 = [[0.0, 5.0, 2.0, 5.0, 0.0], [0.0, 11.0, 2.0, 11.0, 0.0]];
    let hit5 = r5.len() == 2
        && want5.iter().all(|w| {
            let target: Vec<f64> = w.iter().map(|v| v * PI / 6.0).collect();
            r5.iter().any(|r| equivalent_phases(&r.phases, &target, 1e-6))
        });
    let dt5 = t.elapsed().as_secs_f64();
    ok &= hit5 && dt5 <= budget;
    notes.push(format!("n=5 {} families match={hit5} [{dt5:.1}s]", r5.len()));

    let t = Instant::now();
    let r7 = solve_phases(7, 512)?;
    let hit7 = ["U7a", "U7b"].iter().all(|l| {
        let target = catalog(l).unwrap().phases;
        r7.iter().any(|r| equivalent_phases(&r.phases, &target, 1e-6))
    });
    let dt7 = t.elapsed().as_secs_f64();
    ok &= hit7 && dt7 <= budget;
    notes.push(format!("n=7 {} families U7a/U7b match={hit7} [{dt7:.1}s]", r7.len()));
    Ok((ok, notes.join("; ")))
}

fn five_pulse_closed_form() -> Result<Outcome, cpulse::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p2 = rng.gen_range(0.0..2.0 * PI);
        let p3 = rng.gen_range(0.0..2.0 * PI);
        let t = extract_coefficients(5, &[0.0, p2, p3, p2, 0.0])?;
        let plus = 1.0 + 2.0 * (2.0 * p2 - p3).cos();
        let minus = 2.0 * (p2 - p3).cos();
        worst = worst
            .max((t.get(1, 1) - plus).norm())
            .max((t.get(1, -1) - minus).norm());
    }
    Ok((worst < 1e-10, format!("max deviation {worst:.2e} over 100 cases (tol 1e-10)")))
}

fn scaling_law() -> Result<Outcome, cpulse::Error> {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut entries = vec![CompositeSequence::single()];
    entries.extend(full_catalog());
    for seq in entries {
        let want = (2 * seq.jmax + 2) as f64;
        let fit = fit_error_exponent(&resolve(&seq)?, &FitConfig::default())?;
        let pass = (fit.exponent - want).abs() <= 0.05 * want;
        ok &= pass;
        let printed = order_of_error(&seq)?;
        parts.push(format!("{} {:.2}/{want} (printed phases {:.2})", seq.label, fit.exponent, printed));
    }
    Ok((ok, parts.join(", ")))
}

fn rabi_oracle() -> Result<Outcome, cpulse::Error> {
    let n = 20;
    let cfg = IntegratorConfig::default();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            let t = 2.0 * (j + 1) as f64 / n as f64;
            let spec = rect().with_duration(t * PI);
            let err = ErrorModel::default().with_detuning(d);
            let num = integrate(&spec, &err, &cfg)?.matrix;
            let exact = analytic_rabi(1.0, d, t * PI, 0.0).matrix();
            worst = worst.max(num.max_abs_diff(&exact));
        }
    }
    // 0.5·sin²(π/√2), evaluated separately
    let oracle = 0.316_563_835_510_353_9;
    let spec = rect();
    let err = ErrorModel::default().with_detuning(1.0);
    let u = integrate(&spec, &err, &cfg)?.matrix;
    let p = u.get(0, 1).norm_sqr();
    let ok = worst < 1e-8 && (p - oracle).abs() < 1e-8;
    Ok((ok, format!("max entry deviation {worst:.2e} on 20x20 (tol 1e-8); P(Δ=Ω,T=τ)={p:.12} vs {oracle:.12}")))
}

fn rect_maps() -> Result<(Vec<(String, RobustnessMap)>, f64), cpulse::Error> {
    let t = Instant::now();
    let mut out = Vec::new();
    let mut seqs = vec![CompositeSequence::single()];
    seqs.extend(full_catalog());
    for seq in seqs {
        let map = scan_with(&seq, &rect(), &ErrorModel::default(), &Grid::default(), &ScanOptions::default())?;
        out.push((seq.label.clone(), map));
    }
    Ok((out, t.elapsed().as_secs_f64()))
}

fn fraction(maps: &[(String, RobustnessMap)], label: &str, thr: f64) -> f64 {
    let (_, m) = maps.iter().find(|(l, _)| l == label).unwrap();
    level_region_fraction(m, thr)
}

fn map_reproduction(maps: &[(String, RobustnessMap)], secs: f64) -> Result<Outcome, cpulse::Error> {
    let order = ["single", "U3", "U5b", "U7b", "U9b"];
    let f: Vec<f64> = order.iter().map(|l| fraction(maps, l, 1e-2)).collect();
    let ordered = f[0] < f[1] && f[1] < f[2] && f[2] <= f[3] && f[3] <= f[4];
    let spot = fraction(maps, "single", 1e-4);

    let mut centre_worst: f64 = 0.0;
    for seq in full_catalog() {
        let spec = rect();
        let u = execute(&seq, &base_propagator(&spec, &ErrorModel::default(), &IntegratorConfig::default())?)?;
        centre_worst = centre_worst.max(u.infidelity());
    }
    let ok = ordered && spot < 0.005 && centre_worst < 1e-10 && secs <= 300.0;
    let listing: Vec<String> = order.iter().zip(&f).map(|(l, v)| format!("{l} {v:.4}")).collect();
    Ok((
        ok,
        format!(
            "Q<1e-2 fractions {}; single Q<1e-4 {spot:.5}; max centre Q {centre_worst:.1e}; full scan {secs:.1}s",
            listing.join(" < ")
        ),
    ))
}

fn symmetry_suite() -> Result<Outcome, cpulse::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n: usize = rng.gen_range(1..=13);
        let half: Vec<f64> = (0..n.div_ceil(2)).map(|_| rng.gen_range(-PI..PI)).collect();
        let phases: Vec<f64> = (0..n).map(|k| half[k.min(n - 1 - k)]).collect();
        let generic: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
        let base = make_propagator(rng.gen_range(0.0..1.0), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI))?;
        let shift = rng.gen_range(-10.0..10.0);
        let q = |ph: Vec<f64>| -> Result<f64, cpulse::Error> { Ok(execute(&CompositeSequence::new("r", ph, 0)?, &base)?.infidelity()) };
        let q0 = q(phases.clone())?;
        let qs = q(phases.iter().map(|p| p + shift).collect())?;
        let qf = q(phases.iter().map(|p| -p).collect())?;
        worst = worst.max((q0 - qs).abs()).max((q0 - qf).abs());
        // without the anagram symmetry the flip must be paired with a reversal
        let g0 = q(generic.clone())?;
        let gr = q(generic.iter().rev().map(|p| -p).collect())?;
        worst = worst.max((g0 - gr).abs());
    }

    let grid = Grid { resolution: (81, 41), ..Grid::default() };
    let mut mirror: f64 = 0.0;
    for label in ["U3", "U5a", "U7b", "U13a"] {
        let m = scan_with(&catalog(label)?, &rect(), &ErrorModel::default(), &grid, &ScanOptions::default())?;
        for row in &m.values {
            for (a, b) in row.iter().zip(row.iter().rev()) {
                mirror = mirror.max((a - b).abs());
            }
        }
    }
    let ok = worst < 1e-12 && mirror < 1e-9;
    Ok((ok, format!("anagram shift/sign-flip max |ΔQ| {worst:.1e} over 1000 cases (tol 1e-12); Δ→-Δ max {mirror:.1e} (tol 1e-9)")))
}

fn shape_universality(maps: &[(String, RobustnessMap)]) -> Result<Outcome, cpulse::Error> {
    let gauss = PulseSpec::with_area(PulseShape::Gaussian, 1.0, PI)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for label in ["U5b", "U7b"] {
        let m = scan_with(&catalog(label)?, &gauss, &ErrorModel::default(), &Grid::default(), &ScanOptions::default())?;
        let g = level_region_fraction(&m, 1e-2);
        let r = fraction(maps, label, 1e-2);
        let pass = g > 0.0 && (g / r - 1.0).abs() <= 0.5;
        ok &= pass;
        parts.push(format!("{label} gauss {g:.4} vs rect {r:.4} (ratio {:.2})", g / r));
    }
    Ok((ok, parts.join(", ")))
}

fn echo_properties() -> Result<Outcome, cpulse::Error> {
    let err = ErrorModel::default();
    let mut ok = true;
    let mut parts = Vec::new();

    let mut ideal_worst: f64 = 0.0;
    for count in [1, 2] {
        let eta = rephasing_efficiency(&Ensemble::gaussian(0.3, 500, 1), &EchoProtocol::ideal(600.0, count), &err)?;
        ideal_worst = ideal_worst.max((eta - 1.0).abs());
    }
    ok &= ideal_worst <= 1e-10;
    parts.push(format!("ideal flips |η-1| {ideal_worst:.1e}"));

    let sigma = 0.05;
    let ens = Ensemble::gaussian(sigma, 1000, 3);
    let mut decay_worst: f64 = 0.0;
    for t in [5.0, 10.0, 20.0, 30.0] {
        let eta = rephasing_efficiency(&ens, &EchoProtocol::ideal(t, 0), &err)?;
        decay_worst = decay_worst.max((eta / (-(sigma * t).powi(2)).exp() - 1.0).abs());
    }
    ok &= decay_worst < 0.01;
    parts.push(format!("free decay rel dev {decay_worst:.1e} (1000 stratified)"));

    let omega = PI / ANALOG_PI_DURATION;
    let wide = Ensemble::gaussian(0.3 * omega, 2000, 11);
    let single = rephasing_efficiency(&wide, &EchoProtocol::analog(CompositeSequence::single()), &err)?;
    let u5b = rephasing_efficiency(&wide, &EchoProtocol::analog(catalog("U5b")?), &err)?;
    ok &= u5b > single;
    parts.push(format!("σ=0.3Ω U5b {u5b:.4} vs single {single:.4}"));

    let level = (1.0f64 - 1e-2).powi(2);
    let order = ["single", "U3", "U5b", "U7b", "U9b"];
    let grid = Grid { resolution: (101, 101), ..Grid::default() };
    let ens = Ensemble::gaussian(0.05, 200, 0);
    let mut hahn = Vec::new();
    let mut cpmg = Vec::new();
    for label in order {
        let seq = if label == "single" { CompositeSequence::single() } else { catalog(label)? };
        for (count, sink) in [(1, &mut hahn), (2, &mut cpmg)] {
            let proto = EchoProtocol { inversion_count: count, ..EchoProtocol::analog(seq.clone()) };
            let m = efficiency_map_with(&ens, &proto, &err, &grid, &IntegratorConfig::default())?;
            sink.push(efficiency_fraction(&m, level));
        }
    }
    let f = &hahn;
    let ordered = f[0] < f[1] && f[1] < f[2] && f[2] <= f[3] && f[3] <= f[4];
    ok &= ordered;
    let show = |v: &[f64]| v.iter().zip(order).map(|(x, l)| format!("{l} {x:.4}")).collect::<Vec<_>>().join(" ");
    parts.push(format!("η>{level:.4} fractions, one inversion: {}; two inversions (diagnostic): {}", show(&hahn), show(&cpmg)));
    Ok((ok, parts.join("; ")))
}

fn main() {
    let mut all = true;
    all &= report(1, "phase table recovery", table_recovery);
    all &= report(2, "five-pulse closed form", five_pulse_closed_form);
    all &= report(3, "infidelity scaling law", scaling_law);
    all &= report(4, "Rabi oracle", rabi_oracle);
    let maps = rect_maps();
    match maps {
        Ok((maps, secs)) => {
            all &= report(5, "map reproduction", || map_reproduction(&maps, secs));
            all &= report(6, "symmetry suite", symmetry_suite);
            all &= report(7, "shape universality", || shape_universality(&maps));
        }
        Err(e) => {
            for (id, name) in [(5, "map reproduction"), (7, "shape universality")] {
                all &= report(id, name, || Err(e.clone()));
            }
            all &= report(6, "symmetry suite", symmetry_suite);
        }
    }
    all &= report(8, "echo properties", echo_properties);
    if !all {
        std::process::exit(1);
    }
}
