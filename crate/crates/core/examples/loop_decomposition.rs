//! Decomposing a closed loop into unit-length flow curves.

use solenoid::decompose::decompose_with_report;
use solenoid::{make_panel, BoundingBox, DecomposeParams, FlowConfig, Result, Scenario};

pub fn main() -> Result<()> {
    let (mu, _) = Scenario::loop_charge(512, 1.0).generate()?;
    let params = DecomposeParams::new(0.05, 500, FlowConfig::with_default_record(1.0, 0.005)?, 11)?;
    let panel = make_panel(11, 4, 4, &BoundingBox::cube(2, 1.5)?)?;

    let (nu, report) = decompose_with_report(&mu, &params, &panel)?;
    println!(
        "{} curves of weight {:.3e}; mass {:.6} = Var / ell = {:.6}",
        nu.len(),
        nu.entries()[0].1,
        report.mass.ensemble_mass,
        report.mass.expected
    );
    println!("mean length / ell = {:.4}", report.lengths.mean_over_ell);
    for (i, r) in report.reconstruction.iter().enumerate() {
        println!(
            "field {i}: ensemble {:+.4} +- {:.4}, smoothed {:+.4}, exact {:+.4}",
            r.ensemble.value, r.ensemble.std_error, r.smoothed, r.exact
        );
    }
    Ok(())
}
