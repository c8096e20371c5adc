//! A segment is not divergence free: its divergence is a dipole. The lift
//! to three dimensions is, and its curves project back onto the segment.

use solenoid::lift::decompose_with_divergence;
use solenoid::{
    make_panel, BoundingBox, DecomposeParams, DivergencePair, FlowConfig, LiftParams, Result, Scenario, ScenarioKind,
    TestField,
};

pub fn main() -> Result<()> {
    let (mu, sigma) = Scenario::new(ScenarioKind::Segment).generate()?;
    let sigma = sigma.expect("segments know their divergence");

    let mut panel = make_panel(4, 2, 6, &BoundingBox::new(vec![-0.5, -0.75], vec![1.5, 0.75])?)?;
    panel.fields.insert(0, TestField::directional(&[1.0, 0.0], vec![0.5, 0.0], 0.5)?);

    let pair = DivergencePair::certify(mu, sigma, &panel)?;
    println!("certification error {:.2e}", pair.certification);

    let inner = DecomposeParams::new(0.05, 1000, FlowConfig::with_default_record(1.0, 0.01)?, 4)?;
    let params = LiftParams::new(1.0, 64, 0.1, inner)?;
    let out = decompose_with_divergence(&pair, &params, &panel)?;
    let r = &out.report;

    println!("lifted charge: {} atoms, divergence {:.2e}", r.lifted_atoms, r.lift_divergence);
    println!(
        "kept {} curves (weight {:.4}), discarded {} (weight {:.4})",
        r.mass.kept_curves, r.mass.kept_weight, r.mass.discarded_curves, r.mass.discarded_weight
    );
    let aligned = &r.reconstruction[0];
    println!(
        "aligned field: {:.4} +- {:.4} against {:.4}",
        aligned.estimate.value, aligned.estimate.std_error, aligned.exact
    );
    println!(
        "height velocity near the sink {:+.3}, near the source {:+.3}",
        r.vertical.mean_velocity_e_plus, r.vertical.mean_velocity_e_minus
    );
    Ok(())
}
