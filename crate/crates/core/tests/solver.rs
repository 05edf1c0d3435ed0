use cpulse::sequences::{catalog, full_catalog};
use cpulse::solver::{equivalent_phases, fit_error_exponent, order_of_error, resolve, solve_phases, FitConfig};

#[test]
fn seven_pulse_families() {
    let res = solve_phases(7, 512).unwrap();
    for r in &res {
        eprintln!("{:?} cost {} worst {}", r.phases.iter().map(|p| p * 12.0 / std::f64::consts::PI).collect::<Vec<_>>(), r.leading_cost, r.worst_case_leading);
    }
    for label in ["U7a", "U7b"] {
        let target = catalog(label).unwrap().phases;
        assert!(res.iter().any(|r| equivalent_phases(&r.phases, &target, 1e-6)), "{label}");
    }
}

#[test]
fn exponent_law_over_catalog() {
    for seq in full_catalog() {
        let fit = fit_error_exponent(&resolve(&seq).unwrap(), &FitConfig::default()).unwrap();
        let printed = order_of_error(&seq).unwrap();
        eprintln!("{} {} used {} printed {}", seq.label, fit.exponent, fit.points.len(), printed);
        let want = (2 * seq.jmax + 2) as f64;
        assert!((fit.exponent - want).abs() <= 0.05 * want, "{}: {}", seq.label, fit.exponent);
    }
}
