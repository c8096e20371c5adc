use solenoid::decompose::{decompose_div_free, decompose_with_report, far_sample_fraction, mollification_gaps};
use solenoid::flow::liouville_discrepancy;
use solenoid::lift::{classify_clip_project, decompose_with_divergence, slab_restricted_action};
use solenoid::{
    make_panel, AtomicCharge, BoundingBox, Curve, DecomposeParams, DivergencePair, FlowConfig, LiftParams,
    MollifiedCharge, Scenario, ScenarioKind, ScalarAtomicMeasure, TestField, TestFunction,
};

fn arc(m: usize, turns: f64) -> Curve {
    let ell = 2.0 * std::f64::consts::PI * turns;
    let pts: Vec<Vec<f64>> = (0..=m)
        .map(|k| {
            let t = ell * k as f64 / m as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    Curve::from_points(ell, &pts).unwrap()
}

#[test]
fn curve_charge_divergence() {
    let panel = make_panel(21, 0, 10, &BoundingBox::cube(2, 1.5).unwrap()).unwrap();
    let circle = AtomicCharge::from_curve(&arc(256, 1.0)).unwrap();
    for psi in &panel.functions {
        assert!(circle.divergence_action(psi).unwrap().abs() <= 1e-3);
    }
    // open arc: converges to psi(start) - psi(end) under halving
    for psi in &panel.functions {
        let errors: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&m| {
                let gamma = arc(m, 0.4);
                let target = gamma.curve_divergence_action(psi).unwrap();
                (AtomicCharge::from_curve(&gamma).unwrap().divergence_action(psi).unwrap() - target).abs()
            })
            .collect();
        if errors[0] > 1e-12 {
            assert!(errors[0] / errors[1] >= 1.8 && errors[1] / errors[2] >= 1.8, "{errors:?}");
        }
    }
}

#[test]
fn monte_carlo_error_halves_with_four_times_the_curves() {
    let (mu, _) = Scenario::loop_charge(512, 1.0).generate().unwrap();
    let panel = make_panel(2, 8, 0, &BoundingBox::cube(2, 1.5).unwrap()).unwrap();
    let flow = FlowConfig::new(1.0, 0.01, 11).unwrap();
    let run = |n| decompose_div_free(&mu, &DecomposeParams::new(0.05, n, flow, 3).unwrap()).unwrap();
    let (small, large) = (run(500), run(2000));
    assert!((small.ensemble_mass() - mu.total_variation()).abs() <= 1e-12 * mu.total_variation());
    let mut ratios: Vec<f64> = panel
        .fields
        .iter()
        .map(|phi| {
            small.ensemble_action_estimate(phi).unwrap().std_error / large.ensemble_action_estimate(phi).unwrap().std_error
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = 0.5 * (ratios[3] + ratios[4]);
    assert!((1.6..=2.5).contains(&median), "{ratios:?}");
}

#[test]
fn mollification_gap_shrinks_on_loop() {
    let (mu, _) = Scenario::loop_charge(512, 1.0).generate().unwrap();
    let panel = make_panel(1, 10, 0, &BoundingBox::cube(2, 1.5).unwrap()).unwrap();
    let gaps = mollification_gaps(&mu, &[0.2, 0.1, 0.05], &panel).unwrap();
    for f in 0..10 {
        assert!(gaps[0][f] > gaps[1][f] && gaps[1][f] > gaps[2][f], "field {f}");
    }
}

#[test]
fn loop_report_statistics() {
    let (mu, _) = Scenario::loop_charge(512, 1.0).generate().unwrap();
    let panel = make_panel(4, 3, 3, &BoundingBox::cube(2, 1.5).unwrap()).unwrap();
    let p = DecomposeParams::new(0.05, 1000, FlowConfig::new(1.0, 0.01, 101).unwrap(), 8).unwrap();
    let (nu, report) = decompose_with_report(&mu, &p, &panel).unwrap();
    assert!(report.mass.relative_error <= 1e-12);
    assert!(report.lengths.mean_over_ell >= 0.95);
    assert!(report.lengths.max <= 1.0 + 1e-9);
    assert!(report.far_sample_fraction <= 0.01);
    assert_eq!(far_sample_fraction(&nu, &mu, 5.0 * p.epsilon, 10_000), far_sample_fraction(&nu, &mu, 0.25, 10_000));
    assert!(report.divergence_check <= 2e-2);
}

#[test]
fn liouville_fails_without_divergence_freeness() {
    let (mu, _) = Scenario::new(ScenarioKind::Segment).generate().unwrap();
    let mc = MollifiedCharge::new(mu, 0.05).unwrap();
    let sink = TestFunction::bump(vec![1.0, 0.0], 0.3).unwrap();
    let s = liouville_discrepancy(&mc, 2, 20_000, &sink, 0.5, &FlowConfig::new(1.0, 0.01, 2).unwrap()).unwrap();
    assert!(s.discrepancy > 10.0 * s.std_error, "{s:?}");
}

fn segment_setup(n: usize) -> (DivergencePair, LiftParams, solenoid::FieldPanel) {
    let (mu, sigma) = Scenario::new(ScenarioKind::Segment).generate().unwrap();
    let mut panel = make_panel(6, 3, 6, &BoundingBox::new(vec![-0.5, -0.75], vec![1.5, 0.75]).unwrap()).unwrap();
    panel.fields.insert(0, TestField::directional(&[1.0, 0.0], vec![0.5, 0.0], 0.5).unwrap());
    let pair = DivergencePair::certify(mu, sigma.unwrap(), &panel).unwrap();
    let inner = DecomposeParams::new(0.05, n, FlowConfig::new(1.0, 0.01, 101).unwrap(), 12).unwrap();
    (pair, LiftParams::new(1.0, 64, 0.1, inner).unwrap(), panel)
}

#[test]
fn lift_projection_and_restriction() {
    let (pair, p, panel) = segment_setup(1500);
    let out = decompose_with_divergence(&pair, &p, &panel).unwrap();
    assert!(out.ensemble.curves().all(|c| c.length() <= 1.0 + 1e-9));

    let aligned = &out.report.reconstruction[0];
    assert!(aligned.rel_error <= 0.1, "{aligned:?}");
    for (rec, res) in out.report.reconstruction.iter().zip(&out.report.restriction) {
        let tol = 3.0 * rec.estimate.std_error.max(res.estimate.std_error) + 0.1 * rec.exact.abs();
        assert!(res.abs_error <= tol, "{res:?}");
    }
    let direct = slab_restricted_action(&out.inner, &panel.fields[0], p.slab_width).unwrap();
    assert_eq!(direct, out.report.restriction[0].estimate);

    // clipping a projected curve, lifted back into the plane, is a no-op
    for c in out.ensemble.curves().take(50) {
        let flat: Vec<Vec<f64>> = c.iter_points().map(|q| vec![q[0], q[1], 0.0]).collect();
        let again = classify_clip_project(&Curve::from_points(1.0, &flat).unwrap(), &p).unwrap().unwrap();
        assert_eq!(&again, c);
    }
}

#[test]
fn null_charge_reconstructs_zero() {
    let (_, p, panel) = segment_setup(2000);
    let sigma = ScalarAtomicMeasure::dipole(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
    let pair = DivergencePair::certify(AtomicCharge::empty(2), sigma, &panel).unwrap();
    assert!(pair.certification > p.certification_threshold);
    let p = LiftParams {
        certification_threshold: f64::INFINITY,
        ..p
    };
    let out = decompose_with_divergence(&pair, &p, &panel).unwrap();
    for r in &out.report.reconstruction {
        assert!(r.estimate.value.abs() <= 3.0 * r.estimate.std_error + 1e-15, "{r:?}");
    }
    let mean_len = out.ensemble.mean_length();
    assert!(mean_len < 0.2, "projected curves should be nearly constant, mean length {mean_len}");
    assert!(out.report.mass.relative_error <= 1e-12);
}
