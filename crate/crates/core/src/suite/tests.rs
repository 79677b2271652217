use super::*;
use crate::target::TargetSpec;
use crate::worldsheet::LambdaSpec;

fn config(n: usize, target: TargetSpec) -> RunConfig {
    let mut c = RunConfig::default();
    c.grid.n_s = n;
    c.grid.n_t = n;
    c.target = target;
    c.sampling.count = 2;
    c.sampling.variations = 3;
    c
}

fn failures(r: &SuiteReport) -> Vec<String> {
    r.failures()
        .map(|c| format!("{} {} {:e} > {:e} {:?}", c.check, c.case, c.defect, c.tolerance, c.note))
        .collect()
}

#[test]
fn flat_suite_passes() {
    let c = config(64, TargetSpec::flat(2));
    let r = Suite::new(&c).unwrap().run(&Check::ALL);
    assert!(r.pass, "{:#?}", failures(&r));
    assert_eq!(r.summary.skipped, 0);
    assert_eq!(r.summary.failed, 0);
    for check in Check::ALL {
        assert!(r.checks.iter().any(|x| x.check == check.name()), "{check}");
    }
}

#[test]
fn curved_suites_pass_at_default_resolution() {
    for t in [TargetSpec::sphere(), TargetSpec::perturbed(0.1)] {
        let mut c = config(64, t);
        c.sampling.count = 1;
        let r = Suite::new(&c).unwrap().run(&Check::ALL);
        assert!(r.pass, "{:?}: {:#?}", t.kind, failures(&r));
        // construction and its extremality have no curved example
        assert_eq!(r.summary.skipped, 2);
    }
}

#[test]
fn under_resolved_curved_grid_is_reported_not_hidden() {
    let c = config(16, TargetSpec::perturbed(0.1));
    let r = Suite::new(&c).unwrap().run(&[Check::LagrangianA1]);
    assert!(!r.pass);
    assert!(r.checks.iter().all(|x| x.defect > 1e-6));
}

#[test]
fn reports_are_deterministic() {
    let c = config(16, TargetSpec::flat(4));
    let checks = [Check::SuperIdentity, Check::Equivalence, Check::ElExtremality];
    let a = serde_json::to_string(&Suite::new(&c).unwrap().run(&checks)).unwrap();
    let b = serde_json::to_string(&Suite::new(&c).unwrap().run(&checks)).unwrap();
    assert_eq!(a, b);
    let mut c2 = c.clone();
    c2.seed += 1;
    let d = serde_json::to_string(&Suite::new(&c2).unwrap().run(&checks)).unwrap();
    assert_ne!(a, d);
}

#[test]
fn report_order_follows_request() {
    let c = config(16, TargetSpec::flat(2));
    let r = Suite::new(&c).unwrap().run(&[Check::OperatorEquivalence, Check::ClassicalIdentity]);
    assert_eq!(r.checks.first().unwrap().check, "operator_equivalence");
    assert_eq!(r.checks.last().unwrap().check, "classical_identity");
}

#[test]
fn equivalence_zero_sets() {
    let c = config(16, TargetSpec::flat(2));
    let r = Suite::new(&c).unwrap().run_check(Check::Equivalence).unwrap();
    assert_eq!(r[0].case, "constructed");
    assert_eq!(r[0].note.as_deref(), Some("supercurve: zero, local: zero"));
    for x in &r[1..] {
        assert_eq!(x.note.as_deref(), Some("supercurve: nonzero, local: nonzero"));
        assert!(x.pass);
    }
}

#[test]
fn construction_skipped_on_curved_target() {
    let c = config(16, TargetSpec::sphere());
    let r = Suite::new(&c).unwrap().run_check(Check::Construction).unwrap();
    assert_eq!(r.len(), 1);
    assert!(r[0].skipped.is_some() && r[0].pass);
}

#[test]
fn constructed_example_is_critical() {
    let mut c = config(16, TargetSpec::flat(2));
    c.lambda = LambdaSpec::Sinusoidal { amplitude: 0.4, frequency: 1 };
    let r = Suite::new(&c).unwrap().run_check(Check::ElExtremality).unwrap();
    assert_eq!(r[0].case, "constructed");
    assert_eq!(r[0].rhs_terms.len(), 3);
    assert!(r[0].defect <= 1e-6, "{}", r[0].defect);
}

#[test]
fn tiny_fd_step_warns() {
    let mut c = config(16, TargetSpec::flat(2));
    c.sampling.fd_step = 1e-8;
    c.sampling.variations = 1;
    let r = Suite::new(&c).unwrap().run_check(Check::ElExtremality).unwrap();
    assert!(r[0].note.as_deref().unwrap().contains("below"));
}

#[test]
fn fit_recovers_power_law() {
    let rows: Vec<ConvergenceRow> = [16usize, 32, 64]
        .iter()
        .map(|&n| {
            let h = 1.0 / n as f64;
            ConvergenceRow { n, h, defect: 3.0 * h.powi(3), observed_order: None }
        })
        .collect();
    assert!((fit_order(&rows) - 3.0).abs() < 1e-12);
}

fn sphere_study(scheme: Scheme) -> ConvergenceTable {
    let mut c = RunConfig {
        target: TargetSpec::sphere(),
        ..RunConfig::default()
    };
    c.grid.scheme = scheme;
    convergence(&c, Check::ClassicalIdentity, &[16, 32, 64]).unwrap()
}

#[test]
fn central_schemes_converge_at_their_order() {
    let t = sphere_study(Scheme::Central2);
    let Order::Fitted { order } = t.order else { panic!("{t:?}") };
    assert!((order - 2.0).abs() <= 0.2, "{order}");
    assert!(t.pass && t.monotone);
    let t = sphere_study(Scheme::Central4);
    let Order::Fitted { order } = t.order else { panic!("{t:?}") };
    assert!((order - 4.0).abs() <= 0.3, "{order}");
    assert!(t.pass);
}

#[test]
fn spectral_reaches_floor() {
    let t = sphere_study(Scheme::Spectral);
    assert_eq!(t.order, Order::Floor);
    assert!(t.rows.last().unwrap().defect < SPECTRAL_FLOOR);
    assert!(t.pass);
}

#[test]
fn flat_identity_is_exact_at_every_size() {
    let c = RunConfig {
        grid: GridSpec { scheme: Scheme::Central2, ..GridSpec::default() },
        ..RunConfig::default()
    };
    let t = convergence(&c, Check::ClassicalIdentity, &[16, 32, 64]).unwrap();
    assert_eq!(t.order, Order::Exact);
    assert!(t.pass);
}

#[test]
fn study_arguments_validated() {
    let c = RunConfig::default();
    assert!(matches!(convergence(&c, Check::ClassicalIdentity, &[16, 32]), Err(Error::Config(_))));
    assert!(matches!(convergence(&c, Check::ClassicalIdentity, &[32, 16, 64]), Err(Error::Config(_))));
    assert!(matches!(convergence(&c, Check::Construction, &[16, 32, 64]), Err(Error::Unsupported(_))));
}

#[test]
fn other_identities_have_studies() {
    let mut c = RunConfig {
        target: TargetSpec::perturbed(0.1),
        ..RunConfig::default()
    };
    c.grid.scheme = Scheme::Central2;
    c.sampling.amplitude = 0.2;
    for check in [Check::LagrangianA1, Check::SuperIdentity, Check::OperatorEquivalence] {
        let t = convergence(&c, check, &[16, 32, 64]).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows.iter().all(|r| r.defect.is_finite()));
    }
}
