//! Gaussian mollification: drift, density, exact sampling, smoothed pairings.

use solenoid::{MollifiedCharge, Result, Scenario, TestField};

pub fn main() -> Result<()> {
    let (mu, _) = Scenario::loop_charge(256, 1.0).generate()?;
    let mc = MollifiedCharge::new(mu.clone(), 0.1)?;

    for x in [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [3.0, 0.0]] {
        let v = mc.drift_eval(&x)?;
        println!("drift at {x:?} = [{:+.4}, {:+.4}], log density {:.3}", v[0], v[1], mc.log_density_eval(&x)?);
    }

    let samples = mc.sample_rho(7, 5)?;
    for s in &samples {
        println!("sample at radius {:.4}", (s[0] * s[0] + s[1] * s[1]).sqrt());
    }

    let phi = TestField::directional(&[0.0, 1.0], vec![1.0, 0.0], 0.5)?;
    println!(
        "<mu, phi> = {:.6}, <mu * k, phi> = {:.6}",
        mu.pair_with_field(&phi)?,
        mc.smoothed_action(&phi)?
    );
    Ok(())
}
