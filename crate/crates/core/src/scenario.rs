//! Built-in test charges.
//!
//! | scenario      | charge                                    | `Var`                  | divergence       |
//! |---------------|-------------------------------------------|------------------------|------------------|
//! | `loop`        | inscribed `M`-gon of radius `r`           | `2 M r sin(pi/M)`      | none (closed)    |
//! | `two_loops`   | two such loops, opposite orientation      | twice the above        | none (closed)    |
//! | `segment`     | `M` equal pieces of `a -> b`              | `|b - a|`              | `delta_a - delta_b` |
//! | `null_charge` | empty                                     | 0                      | 0                |
//! | `single_atom` | one atom of unit mass                     | 1                      | not a measure    |
//!
//! Generation is deterministic; the seed only rotates the loops' starting
//! vertex and the single atom's direction.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::charge::{Atom, AtomicCharge, ScalarAtomicMeasure};
use crate::curves::Curve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Loop,
    TwoLoops,
    Segment,
    NullCharge,
    SingleAtom,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Loop,
        ScenarioKind::TwoLoops,
        ScenarioKind::Segment,
        ScenarioKind::NullCharge,
        ScenarioKind::SingleAtom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Loop => "loop",
            ScenarioKind::TwoLoops => "two_loops",
            ScenarioKind::Segment => "segment",
            ScenarioKind::NullCharge => "null_charge",
            ScenarioKind::SingleAtom => "single_atom",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario '{s}'")))
    }
}

/// A scenario plus its resolution parameters. All scenarios live in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Atom count per loop or per segment.
    pub atoms: usize,
    /// Loop radius.
    pub radius: f64,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        let atoms = match kind {
            ScenarioKind::Segment => 64,
            _ => 512,
        };
        Self {
            kind,
            atoms,
            radius: 1.0,
            start: vec![0.0, 0.0],
            end: vec![1.0, 0.0],
            seed: 0,
        }
    }

    pub fn loop_charge(atoms: usize, radius: f64) -> Self {
        Self {
            atoms,
            radius,
            ..Self::new(ScenarioKind::Loop)
        }
    }

    pub fn segment(atoms: usize, start: Vec<f64>, end: Vec<f64>) -> Self {
        Self {
            atoms,
            start,
            end,
            ..Self::new(ScenarioKind::Segment)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            ScenarioKind::Loop | ScenarioKind::TwoLoops => {
                if self.atoms < 3 {
                    return Err(Error::invalid("a loop needs at least 3 atoms"));
                }
                if !(self.radius > 0.0 && self.radius.is_finite()) {
                    return Err(Error::invalid("loop radius must be positive"));
                }
            }
            ScenarioKind::Segment => {
                if self.atoms == 0 {
                    return Err(Error::invalid("a segment needs at least one atom"));
                }
                if self.start.len() != self.end.len() || self.start.is_empty() {
                    return Err(Error::invalid("segment endpoints must share a positive dimension"));
                }
                if self.start == self.end {
                    return Err(Error::invalid("segment endpoints coincide"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Exact total variation of the generated charge.
    pub fn exact_variation(&self) -> f64 {
        let polygon = 2.0 * self.atoms as f64 * self.radius * (PI / self.atoms as f64).sin();
        match self.kind {
            ScenarioKind::Loop => polygon,
            ScenarioKind::TwoLoops => 2.0 * polygon,
            ScenarioKind::Segment => crate::numeric::dist2(&self.start, &self.end).sqrt(),
            ScenarioKind::NullCharge => 0.0,
            ScenarioKind::SingleAtom => 1.0,
        }
    }

    pub fn generate(&self) -> Result<(AtomicCharge, Option<ScalarAtomicMeasure>)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        match self.kind {
            ScenarioKind::Loop => {
                let phase = rng.random::<f64>() * 2.0 * PI / self.atoms as f64;
                Ok((polygon(self.atoms, self.radius, [0.0, 0.0], phase, true)?, None))
            }
            ScenarioKind::TwoLoops => {
                let phase = rng.random::<f64>() * 2.0 * PI / self.atoms as f64;
                let shift = 1.5 * self.radius;
                let a = polygon(self.atoms, self.radius, [-shift, 0.0], phase, true)?;
                let b = polygon(self.atoms, self.radius, [shift, 0.0], phase, false)?;
                let mut atoms = a.atoms().to_vec();
                atoms.extend_from_slice(b.atoms());
                Ok((AtomicCharge::new(2, atoms)?, None))
            }
            ScenarioKind::Segment => {
                let dim = self.start.len();
                let m = self.atoms;
                let atoms = (0..m)
                    .map(|k| {
                        let (s, t) = ((k as f64 + 0.5) / m as f64, 1.0 / m as f64);
                        let pos = (0..dim).map(|j| self.start[j] + s * (self.end[j] - self.start[j])).collect();
                        let w = (0..dim).map(|j| t * (self.end[j] - self.start[j])).collect();
                        Atom::new(pos, w)
                    })
                    .collect();
                let sigma = ScalarAtomicMeasure::dipole(self.start.clone(), self.end.clone())?;
                Ok((AtomicCharge::new(dim, atoms)?, Some(sigma)))
            }
            ScenarioKind::NullCharge => Ok((AtomicCharge::empty(2), Some(ScalarAtomicMeasure::new(2, vec![])?))),
            ScenarioKind::SingleAtom => {
                let theta = rng.random::<f64>() * 2.0 * PI;
                let atom = Atom::new(vec![0.0, 0.0], vec![theta.cos(), theta.sin()]);
                Ok((AtomicCharge::new(2, vec![atom])?, None))
            }
        }
    }
}

/// Charge of the closed regular polygon with `m` vertices, one atom per edge.
fn polygon(m: usize, r: f64, center: [f64; 2], phase: f64, ccw: bool) -> Result<AtomicCharge> {
    let sign = if ccw { 1.0 } else { -1.0 };
    let pts: Vec<Vec<f64>> = (0..=m)
        .map(|k| {
            let th = phase + sign * 2.0 * PI * (k % m) as f64 / m as f64;
            vec![center[0] + r * th.cos(), center[1] + r * th.sin()]
        })
        .collect();
    // parametrize on [0, perimeter] so the polyline is 1-Lipschitz
    let side = 2.0 * r * (PI / m as f64).sin();
    let curve = Curve::from_points(m as f64 * side * (1.0 + 1e-12), &pts)?;
    AtomicCharge::from_curve(&curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loop_variation() {
        let s = Scenario::new(ScenarioKind::Loop);
        let (mu, sigma) = s.generate().unwrap();
        assert!(sigma.is_none());
        assert_eq!(mu.len(), 512);
        assert!((mu.total_variation() - s.exact_variation()).abs() < 1e-12);
        assert!((mu.total_variation() - 2.0 * PI).abs() < 1e-4);
        let net: f64 = mu.atoms().iter().map(|a| a.weight[0]).sum();
        assert!(net.abs() < 1e-12);
    }

    #[test]
    fn segment_and_divergence() {
        let (mu, sigma) = Scenario::new(ScenarioKind::Segment).generate().unwrap();
        assert_eq!(mu.len(), 64);
        assert!((mu.total_variation() - 1.0).abs() < 1e-14);
        let sigma = sigma.unwrap();
        let masses: Vec<(Vec<f64>, f64)> = sigma.atoms().iter().map(|a| (a.position.clone(), a.mass)).collect();
        assert!(masses.contains(&(vec![0.0, 0.0], 1.0)));
        assert!(masses.contains(&(vec![1.0, 0.0], -1.0)));
    }

    #[test]
    fn null_two_loops_single() {
        assert!(Scenario::new(ScenarioKind::NullCharge).generate().unwrap().0.is_empty());
        let s = Scenario::new(ScenarioKind::TwoLoops);
        assert!((s.generate().unwrap().0.total_variation() - s.exact_variation()).abs() < 1e-11);
        let (one, _) = Scenario::new(ScenarioKind::SingleAtom).with_seed(4).generate().unwrap();
        assert!((one.total_variation() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_parsing() {
        for k in ScenarioKind::ALL {
            let s = Scenario::new(k).with_seed(9);
            assert_eq!(s.generate().unwrap(), s.generate().unwrap());
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
        assert!("spiral".parse::<ScenarioKind>().is_err());
        assert!(Scenario::loop_charge(2, 1.0).generate().is_err());
    }
}
