//! Decomposition of vector-valued measures ("charges") into weighted
//! ensembles of 1-Lipschitz curves.
//!
//! The divergence-free pipeline mollifies an atomic charge with a Gaussian,
//! follows the flow of the bounded drift `mu * k / (|mu| * k)` from starting
//! points drawn from the mollified mass, and weights every flow curve by
//! `Var(mu) / (ell N)`. Charges whose divergence is a signed measure are
//! handled by lifting to one dimension higher, where the lifted charge is
//! divergence free, decomposing there, and clipping/projecting the curves
//! back.

pub mod charge;
pub mod curves;
pub mod decompose;
pub mod error;
pub mod fields;
pub mod flow;
pub mod lift;
pub mod mollifier;
pub mod numeric;
pub mod quadrature;
pub mod scenario;
pub mod threads;
pub mod verify;

pub use charge::{Atom, AtomicCharge, PolarAtom, ScalarAtom, ScalarAtomicMeasure};
pub use curves::{Curve, CurveEnsemble, Estimate, Region};
pub use error::{Error, Result};
pub use fields::{make_panel, BoundingBox, FieldPanel, PanelSpec, ScalarField, TestField, TestFunction, VectorField};
pub use flow::{integrate, FlowConfig};
pub use mollifier::MollifiedCharge;
pub use decompose::DecomposeParams;
pub use lift::{DivergencePair, LiftParams};
pub use scenario::{Scenario, ScenarioKind};
