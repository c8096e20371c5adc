//! A polyline curve as a charge: work integrals, divergence, occupation time.

use solenoid::fields::GradientField;
use solenoid::{AtomicCharge, BoundingBox, Curve, Region, Result, TestFunction};

pub fn main() -> Result<()> {
    // quarter circle at unit speed on [0, pi/2]
    let m = 1024;
    let pts: Vec<Vec<f64>> = (0..=m)
        .map(|k| {
            let t = std::f64::consts::FRAC_PI_2 * k as f64 / m as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let gamma = Curve::from_points(std::f64::consts::FRAC_PI_2, &pts)?;
    println!("length {:.6}", gamma.length());

    let psi = TestFunction::bump(vec![0.9, 0.3], 0.6)?;
    let work = gamma.curve_action(&GradientField(&psi))?;
    let telescoped = psi.eval_function(gamma.end())? - psi.eval_function(gamma.start())?;
    println!("int <grad psi, dgamma> = {work:.9}, psi(end) - psi(start) = {telescoped:.9}");

    let as_charge = AtomicCharge::from_curve(&gamma)?;
    println!(
        "as a charge: {} atoms, Var = {:.6}, <Div, psi> = {:.9}",
        as_charge.len(),
        as_charge.total_variation(),
        as_charge.divergence_action(&psi)?
    );

    let upper = Region::HalfSpace {
        normal: vec![0.0, 1.0],
        offset: 0.5,
    };
    println!("time spent above y = 0.5: {:.6}", gamma.occupation_time(&upper)?);

    let panel = solenoid::make_panel(2, 6, 0, &BoundingBox::cube(2, 1.5)?)?;
    let (lower, length) = gamma.reversed().variation_bracket(&panel)?;
    println!("variation of the reversed curve lies in [{lower:.4}, {length:.4}]");
    Ok(())
}
