//! Building atomic charges, reading off their polar form, and saving them.

use solenoid::{Atom, AtomicCharge, Result, ScalarAtomicMeasure, TestField};

pub fn main() -> Result<()> {
    let mu = AtomicCharge::new(
        2,
        vec![
            Atom::new(vec![0.0, 0.0], vec![3.0, 4.0]),
            Atom::new(vec![1.0, 0.0], vec![0.0, -1.0]),
            Atom::new(vec![2.0, 2.0], vec![0.0, 0.0]), // dropped: zero weight
        ],
    )?;
    println!("{} atoms, Var = {}", mu.len(), mu.total_variation());

    for p in mu.polar_decompose() {
        println!("  at {:?}: mass {} direction {:?}", p.position, p.mass, p.direction);
    }

    let phi = TestField::directional(&[1.0, 0.0], vec![0.0, 0.0], 1.0)?;
    println!("<mu, phi> = {}", mu.pair_with_field(&phi)?);

    // the divergence of a unit segment from a to b, as a measure
    let sigma = ScalarAtomicMeasure::dipole(vec![0.0, 0.0], vec![1.0, 0.0])?;
    println!("dipole Var = {}", sigma.total_variation());

    let text = mu.to_json()?;
    assert_eq!(AtomicCharge::from_json(&text)?, mu);
    println!("{text}");
    Ok(())
}
