//! Atomic charges: finitely many atoms `(position, vector weight)`.
//!
//! Everything downstream (mollification, variation, sampling) works on this
//! representation. Atoms are kept in a canonical order (position, then
//! weight, lexicographically) so that every reduction is reproducible.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curves::Curve;
use crate::error::{check_dim, Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::numeric::{all_finite, dot, norm, pairwise_sum};

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub position: Vec<f64>,
    pub weight: Vec<f64>,
}

impl Atom {
    pub fn new(position: Vec<f64>, weight: Vec<f64>) -> Self {
        Self { position, weight }
    }

    pub fn mass(&self) -> f64 {
        norm(&self.weight)
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// `R^n`-valued measure made of finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicCharge {
    dim: usize,
    atoms: Vec<Atom>,
}

/// One atom in polar form: `weight = direction * mass`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarAtom {
    pub position: Vec<f64>,
    pub direction: Vec<f64>,
    pub mass: f64,
}

impl AtomicCharge {
    /// Validates dimensions and finiteness, drops zero-weight atoms and
    /// sorts into canonical order.
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("charge dimension must be positive"));
        }
        let mut kept = Vec::with_capacity(atoms.len());
        for a in atoms {
            check_dim(dim, a.position.len())?;
            check_dim(dim, a.weight.len())?;
            if !all_finite(&a.position) || !all_finite(&a.weight) {
                return Err(Error::NonFinite("atom"));
            }
            if a.weight.iter().any(|w| *w != 0.0) {
                kept.push(a);
            }
        }
        kept.sort_by(|a, b| lex_cmp(&a.position, &b.position).then_with(|| lex_cmp(&a.weight, &b.weight)));
        Ok(Self { dim, atoms: kept })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, atoms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `Var(mu) = sum_i |w_i|`.
    pub fn total_variation(&self) -> f64 {
        let masses: Vec<f64> = self.atoms.iter().map(Atom::mass).collect();
        pairwise_sum(&masses)
    }

    /// `<mu, phi> = sum_i <w_i, phi(x_i)>`.
    pub fn pair_with_field<F: VectorField + ?Sized>(&self, phi: &F) -> Result<f64> {
        check_dim(self.dim, phi.dim())?;
        let mut buf = vec![0.0; self.dim];
        let terms: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| {
                phi.eval_into(&a.position, &mut buf);
                dot(&a.weight, &buf)
            })
            .collect();
        Ok(pairwise_sum(&terms))
    }

    /// `<Div mu, psi> = -<mu, grad psi>`.
    pub fn divergence_action<S: ScalarField + ?Sized>(&self, psi: &S) -> Result<f64> {
        check_dim(self.dim, psi.dim())?;
        let mut g = vec![0.0; self.dim];
        let terms: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| {
                psi.gradient_into(&a.position, &mut g);
                dot(&a.weight, &g)
            })
            .collect();
        Ok(-pairwise_sum(&terms))
    }

    pub fn polar_decompose(&self) -> Vec<PolarAtom> {
        self.atoms
            .iter()
            .map(|a| {
                let mass = a.mass();
                PolarAtom {
                    position: a.position.clone(),
                    direction: a.weight.iter().map(|w| w / mass).collect(),
                    mass,
                }
            })
            .collect()
    }

    /// Midpoint discretization of a curve charge: one atom per polyline
    /// segment, at the segment midpoint with weight equal to the displacement.
    pub fn from_curve(gamma: &Curve) -> Result<Self> {
        let dim = gamma.dim();
        let atoms = (1..=gamma.segments())
            .map(|k| {
                let (p, q) = (gamma.point(k - 1), gamma.point(k));
                Atom::new(
                    p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect(),
                    p.iter().zip(q).map(|(a, b)| b - a).collect(),
                )
            })
            .collect();
        Self::new(dim, atoms)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.dim,
            self.atoms
                .iter()
                .map(|a| Atom::new(a.position.clone(), a.weight.iter().map(|w| c * w).collect()))
                .collect(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ChargeFile {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|a| ChargeAtomRecord {
                    x: a.position.clone(),
                    w: a.weight.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ChargeFile = serde_json::from_str(s)?;
        Self::new(file.dim, file.atoms.into_iter().map(|r| Atom::new(r.x, r.w)).collect())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ChargeFile {
    dim: usize,
    atoms: Vec<ChargeAtomRecord>,
}

#[derive(Serialize, Deserialize)]
struct ChargeAtomRecord {
    x: Vec<f64>,
    w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarAtom {
    pub position: Vec<f64>,
    pub mass: f64,
}

/// Finite signed measure `sum_j m_j delta_{y_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarAtomicMeasure {
    dim: usize,
    atoms: Vec<ScalarAtom>,
}

impl ScalarAtomicMeasure {
    pub fn new(dim: usize, atoms: Vec<ScalarAtom>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("measure dimension must be positive"));
        }
        let mut kept = Vec::with_capacity(atoms.len());
        for a in atoms {
            check_dim(dim, a.position.len())?;
            if !all_finite(&a.position) || !a.mass.is_finite() {
                return Err(Error::NonFinite("scalar atom"));
            }
            if a.mass != 0.0 {
                kept.push(a);
            }
        }
        kept.sort_by(|a, b| lex_cmp(&a.position, &b.position).then_with(|| a.mass.total_cmp(&b.mass)));
        Ok(Self { dim, atoms: kept })
    }

    /// `delta_a - delta_b`.
    pub fn dipole(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let dim = a.len();
        Self::new(
            dim,
            vec![
                ScalarAtom { position: a, mass: 1.0 },
                ScalarAtom { position: b, mass: -1.0 },
            ],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[ScalarAtom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_variation(&self) -> f64 {
        let m: Vec<f64> = self.atoms.iter().map(|a| a.mass.abs()).collect();
        pairwise_sum(&m)
    }

    /// `<sigma, psi> = sum_j m_j psi(y_j)`.
    pub fn action<S: ScalarField + ?Sized>(&self, psi: &S) -> Result<f64> {
        check_dim(self.dim, psi.dim())?;
        let terms: Vec<f64> = self.atoms.iter().map(|a| a.mass * psi.value(&a.position)).collect();
        Ok(pairwise_sum(&terms))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ScalarFile {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|a| ScalarAtomRecord {
                    x: a.position.clone(),
                    m: a.mass,
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ScalarFile = serde_json::from_str(s)?;
        Self::new(
            file.dim,
            file.atoms
                .into_iter()
                .map(|r| ScalarAtom {
                    position: r.x,
                    mass: r.m,
                })
                .collect(),
        )
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ScalarFile {
    dim: usize,
    atoms: Vec<ScalarAtomRecord>,
}

#[derive(Serialize, Deserialize)]
struct ScalarAtomRecord {
    x: Vec<f64>,
    m: f64,
}
