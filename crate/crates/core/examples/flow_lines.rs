//! Flow lines of the mollified drift and the Liouville check.

use solenoid::flow::liouville_discrepancy;
use solenoid::{integrate, FlowConfig, MollifiedCharge, Result, Scenario, TestFunction};

pub fn main() -> Result<()> {
    let (mu, _) = Scenario::loop_charge(256, 1.0).generate()?;
    let mc = MollifiedCharge::new(mu, 0.05)?;
    let cfg = FlowConfig::new(1.0, 0.01, 11)?;

    let curve = integrate(&mc, &[1.0, 0.0], &cfg)?;
    for (k, p) in curve.iter_points().enumerate() {
        println!("t = {:.1}: ({:+.4}, {:+.4})", curve.time(k), p[0], p[1]);
    }
    println!("length {:.4} of at most {}", curve.length(), cfg.ell);

    let psi = TestFunction::bump(vec![0.0, 1.0], 0.6)?;
    let stat = liouville_discrepancy(&mc, 3, 4000, &psi, 1.0, &cfg)?;
    println!("|E psi(u(1, X)) - E psi(X)| = {:.2e} (std error {:.2e})", stat.discrepancy, stat.std_error);
    Ok(())
}
