//! Running part of the acceptance suite programmatically.

use solenoid::verify::{run_verify, VerifyConfig};

pub fn main() -> solenoid::Result<()> {
    let cfg = VerifyConfig {
        only: vec![1, 2, 9],
        polylines: 10,
        ..Default::default()
    };
    let report = run_verify(&cfg)?;
    print!("{}", report.summary());
    println!("exit code {}", report.exit_code());
    Ok(())
}
