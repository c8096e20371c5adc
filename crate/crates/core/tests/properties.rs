use proptest::prelude::*;

use solenoid::fields::GradientField;
use solenoid::{
    integrate, make_panel, Atom, AtomicCharge, BoundingBox, Curve, CurveEnsemble, FlowConfig, MollifiedCharge,
    ScalarAtom, ScalarAtomicMeasure,
};

fn atoms(dim: usize, max: usize) -> impl Strategy<Value = Vec<Atom>> {
    prop::collection::vec(
        (prop::collection::vec(-3.0..3.0f64, dim), prop::collection::vec(-5.0..5.0f64, dim)),
        1..max,
    )
    .prop_map(|v| v.into_iter().map(|(x, w)| Atom::new(x, w)).collect())
}

fn charge(dim: usize) -> impl Strategy<Value = AtomicCharge> {
    atoms(dim, 24).prop_filter_map("all weights zero", move |a| {
        let c = AtomicCharge::new(dim, a).ok()?;
        (!c.is_empty()).then_some(c)
    })
}

fn walk(dim: usize) -> impl Strategy<Value = Curve> {
    walk_with(dim, 2..40)
}

fn walk_with(dim: usize, steps: impl Into<prop::collection::SizeRange>) -> impl Strategy<Value = Curve> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, dim), steps).prop_map(move |steps| {
        // increments of norm <= 1 on a unit grid
        let mut x = vec![0.0; dim];
        let mut pts = vec![x.clone()];
        for s in steps {
            let n = s.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            for k in 0..dim {
                x[k] += s[k] / n;
            }
            pts.push(x.clone());
        }
        let m = pts.len() - 1;
        Curve::from_points(m as f64, &pts).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairing_is_linear_in_the_charge(a in charge(2), b in charge(2), c in -4.0..4.0f64) {
        let panel = make_panel(3, 3, 0, &BoundingBox::cube(2, 3.0).unwrap()).unwrap();
        let mut joined = a.atoms().to_vec();
        joined.extend_from_slice(b.atoms());
        let sum = AtomicCharge::new(2, joined).unwrap();
        for phi in &panel.fields {
            let (pa, pb) = (a.pair_with_field(phi).unwrap(), b.pair_with_field(phi).unwrap());
            let scale = 1.0 + pa.abs() + pb.abs();
            prop_assert!((sum.pair_with_field(phi).unwrap() - pa - pb).abs() <= 1e-12 * scale);
            if c != 0.0 {
                let scaled = a.scaled(c).unwrap();
                prop_assert!((scaled.pair_with_field(phi).unwrap() - c * pa).abs() <= 1e-12 * scale * c.abs());
            }
        }
    }

    #[test]
    fn polar_form_reassembles(mu in charge(3)) {
        let polar = mu.polar_decompose();
        let total: f64 = polar.iter().map(|p| p.mass).sum();
        prop_assert!((total - mu.total_variation()).abs() <= 1e-12 * total);
        for (p, a) in polar.iter().zip(mu.atoms()) {
            prop_assert_eq!(&p.position, &a.position);
            let unit: f64 = p.direction.iter().map(|d| d * d).sum::<f64>().sqrt();
            prop_assert!((unit - 1.0).abs() <= 1e-14);
            for k in 0..3 {
                prop_assert!((p.direction[k] * p.mass - a.weight[k]).abs() <= 1e-14 * p.mass.max(1.0));
            }
        }
    }

    #[test]
    fn charge_json_round_trip_is_exact(mu in charge(2), scale in prop::num::f64::NORMAL) {
        let mu = mu.scaled(scale.clamp(-1e300, 1e300)).unwrap_or(mu);
        let back = AtomicCharge::from_json(&mu.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, mu);
    }

    #[test]
    fn measure_json_round_trip_is_exact(m in prop::collection::vec((prop::num::f64::NORMAL, -1e3..1e3f64), 1..10)) {
        let atoms = m.into_iter().map(|(mass, x)| ScalarAtom { position: vec![x], mass }).collect();
        let sigma = ScalarAtomicMeasure::new(1, atoms).unwrap();
        prop_assert_eq!(ScalarAtomicMeasure::from_json(&sigma.to_json().unwrap()).unwrap(), sigma);
    }

    #[test]
    fn drift_never_exceeds_one(mu in charge(2), eps in 0.01..1.0f64, x in prop::collection::vec(-20.0..20.0f64, 2)) {
        let mc = MollifiedCharge::new(mu, eps).unwrap();
        let v = mc.drift_eval(&x).unwrap();
        prop_assert!((v[0] * v[0] + v[1] * v[1]).sqrt() <= 1.0 + 1e-12);
    }

    #[test]
    fn reversal_negates_and_charge_keeps_length(gamma in walk(2)) {
        let panel = make_panel(8, 2, 2, &BoundingBox::cube(2, 10.0).unwrap()).unwrap();
        for phi in &panel.fields {
            let a = gamma.curve_action(phi).unwrap();
            prop_assert!((gamma.reversed().curve_action(phi).unwrap() + a).abs() <= 1e-15 * (1.0 + a.abs()));
        }
        for psi in &panel.functions {
            let rs = gamma.curve_action(&GradientField(psi)).unwrap();
            let c = AtomicCharge::from_curve(&gamma).unwrap();
            prop_assert!((c.divergence_action(psi).unwrap() + rs).abs() <= 1e-12);
        }
        let c = AtomicCharge::from_curve(&gamma).unwrap();
        prop_assert!((c.total_variation() - gamma.length()).abs() <= 1e-12 * gamma.length().max(1.0));
    }

    #[test]
    fn flow_curves_are_one_lipschitz(mu in charge(2), x in prop::collection::vec(-3.0..3.0f64, 2)) {
        let mc = MollifiedCharge::new(mu, 0.2).unwrap();
        let cfg = FlowConfig::new(1.0, 0.05, 21).unwrap();
        let c = integrate(&mc, &x, &cfg).unwrap();
        prop_assert!(c.length() <= 1.0 + 1e-9);
        prop_assert_eq!(c.start(), x.as_slice());
    }

    #[test]
    fn ensemble_json_round_trip_is_exact(curves in prop::collection::vec((walk_with(3, 12), 1e-6..10.0f64), 1..5)) {
        let nu = CurveEnsemble::from_entries(12.0, 3, curves).unwrap();
        prop_assert_eq!(CurveEnsemble::from_json(&nu.to_json().unwrap()).unwrap(), nu);
    }
}
