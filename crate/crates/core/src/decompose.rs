//! Decomposition of (approximately) divergence-free charges into flow curves.
//!
//! Start points are i.i.d. samples of the mollified mass `rho_eps`; each is
//! flowed along the mollified drift for time `ell`, and every curve carries
//! weight `Var(mu) / (ell N)`. The ensemble then represents `mu * k_eps` up to
//! Monte Carlo and RK4 error, and `mu` itself up to the `O(eps^2)`
//! mollification gap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charge::AtomicCharge;
use crate::curves::{weighted_estimate, CurveEnsemble, Estimate};
use crate::error::{check_dim, Error, Result};
use crate::fields::{FieldPanel, ScalarField};
use crate::flow::{integrate, FlowConfig};
use crate::mollifier::MollifiedCharge;
use crate::numeric::{dist2, pairwise_sum};

/// Default normalized divergence threshold for "divergence free".
pub const DEFAULT_DIV_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeParams {
    pub epsilon: f64,
    pub n_curves: usize,
    pub flow: FlowConfig,
    pub seed: u64,
}

impl DecomposeParams {
    pub fn new(epsilon: f64, n_curves: usize, flow: FlowConfig, seed: u64) -> Result<Self> {
        let p = Self {
            epsilon,
            n_curves,
            flow,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_curves == 0 {
            return Err(Error::invalid("n_curves must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive and finite"));
        }
        self.flow.validate()
    }
}

/// Flow-curve ensemble for `mu` at mollification width `p.epsilon`.
pub fn decompose_div_free(mu: &AtomicCharge, p: &DecomposeParams) -> Result<CurveEnsemble> {
    p.validate()?;
    let mc = MollifiedCharge::new(mu.clone(), p.epsilon)?;
    decompose_mollified(&mc, p)
}

/// Same as [`decompose_div_free`] for an already mollified charge.
pub fn decompose_mollified(mc: &MollifiedCharge, p: &DecomposeParams) -> Result<CurveEnsemble> {
    p.validate()?;
    if mc.epsilon() != p.epsilon {
        return Err(Error::invalid("mollified charge width differs from params.epsilon"));
    }
    let dim = mc.source().dim();
    let weight = mc.total_variation() / (p.flow.ell * p.n_curves as f64);
    let curves = (0..p.n_curves)
        .into_par_iter()
        .map(|j| {
            let (_, x0) = mc.sample_with_atom(p.seed, j as u64);
            integrate(mc, &x0, &p.flow)
        })
        .collect::<Result<Vec<_>>>()?;
    CurveEnsemble::from_entries(p.flow.ell, dim, curves.into_iter().map(|c| (c, weight)).collect())
}

/// Errors for one panel field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldReconstruction {
    pub ensemble: Estimate,
    pub smoothed: f64,
    pub exact: f64,
    /// `|ensemble - <mu * k_eps, phi>|`: Monte Carlo plus RK4 error.
    pub error_vs_smoothed: f64,
    /// `|ensemble - <mu, phi>|`: additionally contains the mollification gap.
    pub error_vs_exact: f64,
    pub field_sup: f64,
}

pub fn reconstruction_error(
    mu: &AtomicCharge,
    nu: &CurveEnsemble,
    eps: f64,
    panel: &FieldPanel,
) -> Result<Vec<FieldReconstruction>> {
    check_dim(mu.dim(), nu.dim())?;
    check_dim(mu.dim(), panel.dim())?;
    let mc = if mu.is_empty() {
        None
    } else {
        Some(MollifiedCharge::new(mu.clone(), eps)?)
    };
    panel
        .fields
        .iter()
        .map(|phi| {
            let ensemble = nu.ensemble_action_estimate(phi)?;
            let exact = mu.pair_with_field(phi)?;
            let smoothed = match &mc {
                Some(mc) => mc.smoothed_action(phi)?,
                None => 0.0,
            };
            Ok(FieldReconstruction {
                ensemble,
                smoothed,
                exact,
                error_vs_smoothed: (ensemble.value - smoothed).abs(),
                error_vs_exact: (ensemble.value - exact).abs(),
                field_sup: phi.sup_norm(),
            })
        })
        .collect()
}

/// Largest normalized `|<Div mu, psi>| / (Var(mu) sup|grad psi|)` over the
/// panel functions.
pub fn check_div_free(mu: &AtomicCharge, panel: &FieldPanel) -> Result<f64> {
    if panel.functions.is_empty() {
        return Err(Error::EmptyPanel("functions"));
    }
    check_dim(mu.dim(), panel.dim())?;
    let var = mu.total_variation();
    if var == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for psi in &panel.functions {
        let g = psi.gradient_sup();
        if g == 0.0 {
            continue;
        }
        worst = worst.max(mu.divergence_action(psi)?.abs() / (var * g));
    }
    Ok(worst)
}

/// Endpoint checks for one panel function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointCheck {
    /// `ell sum_j w_j psi(gamma_j(0))`.
    pub start_estimate: Estimate,
    /// `int psi d rho_eps` by quadrature.
    pub start_target: f64,
    pub start_error: f64,
    /// `sum_j w_j (psi(gamma_j(0)) - psi(gamma_j(ell)))`.
    pub cancellation: Estimate,
}

pub fn endpoint_identity_error(
    nu: &CurveEnsemble,
    mu: &AtomicCharge,
    eps: f64,
    panel: &FieldPanel,
) -> Result<Vec<EndpointCheck>> {
    check_dim(mu.dim(), nu.dim())?;
    check_dim(mu.dim(), panel.dim())?;
    let mc = MollifiedCharge::new(mu.clone(), eps)?;
    let ell = nu.ell();
    let weights = nu.weights();
    let scaled: Vec<f64> = weights.iter().map(|w| ell * w).collect();
    panel
        .functions
        .iter()
        .map(|psi| {
            let (starts, diffs): (Vec<f64>, Vec<f64>) = nu
                .entries()
                .par_iter()
                .map(|(c, _)| {
                    let s = psi.value(c.start());
                    (s, s - psi.value(c.end()))
                })
                .unzip();
            let start_estimate = weighted_estimate(&scaled, &starts);
            let start_target = mc.smoothed_integral(psi)?;
            Ok(EndpointCheck {
                start_estimate,
                start_target,
                start_error: (start_estimate.value - start_target).abs(),
                cancellation: weighted_estimate(&weights, &diffs),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub mean_over_ell: f64,
}

pub fn length_stats(nu: &CurveEnsemble) -> LengthStats {
    let lengths: Vec<f64> = nu.entries().par_iter().map(|(c, _)| c.length()).collect();
    if lengths.is_empty() {
        return LengthStats {
            mean: 0.0,
            min: 0.0,
            max: 0.0,
            mean_over_ell: 0.0,
        };
    }
    let mean = pairwise_sum(&lengths) / lengths.len() as f64;
    LengthStats {
        mean,
        min: lengths.iter().cloned().fold(f64::INFINITY, f64::min),
        max: lengths.iter().cloned().fold(0.0, f64::max),
        mean_over_ell: mean / nu.ell(),
    }
}

/// Fraction of curve samples farther than `radius` from every atom of `mu`.
///
/// At most about `max_samples` samples are inspected, with a fixed stride.
pub fn far_sample_fraction(nu: &CurveEnsemble, mu: &AtomicCharge, radius: f64, max_samples: usize) -> f64 {
    let per_curve = nu.entries().first().map(|(c, _)| c.samples()).unwrap_or(0);
    let total = per_curve * nu.len();
    if total == 0 || mu.is_empty() {
        return 0.0;
    }
    let stride = total.div_ceil(max_samples.max(1)).max(1);
    let r2 = radius * radius;
    let flags: Vec<(usize, usize)> = nu
        .entries()
        .par_iter()
        .enumerate()
        .map(|(j, (c, _))| {
            let mut seen = 0;
            let mut far = 0;
            for k in 0..c.samples() {
                if (j * per_curve + k) % stride != 0 {
                    continue;
                }
                seen += 1;
                let p = c.point(k);
                if mu.atoms().iter().all(|a| dist2(&a.position, p) > r2) {
                    far += 1;
                }
            }
            (seen, far)
        })
        .collect();
    let seen: usize = flags.iter().map(|f| f.0).sum();
    let far: usize = flags.iter().map(|f| f.1).sum();
    far as f64 / seen.max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassCheck {
    pub ensemble_mass: f64,
    pub expected: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub params: DecomposeParams,
    pub total_variation: f64,
    pub n_atoms: usize,
    pub mass: MassCheck,
    pub lengths: LengthStats,
    pub divergence_check: f64,
    pub far_sample_fraction: f64,
    pub reconstruction: Vec<FieldReconstruction>,
    pub endpoints: Vec<EndpointCheck>,
}

/// Runs the decomposition and every check against `panel`.
pub fn decompose_with_report(
    mu: &AtomicCharge,
    p: &DecomposeParams,
    panel: &FieldPanel,
) -> Result<(CurveEnsemble, DecompositionReport)> {
    let nu = decompose_div_free(mu, p)?;
    let report = report_for(mu, p, &nu, panel)?;
    Ok((nu, report))
}

pub fn report_for(mu: &AtomicCharge, p: &DecomposeParams, nu: &CurveEnsemble, panel: &FieldPanel) -> Result<DecompositionReport> {
    let var = mu.total_variation();
    let mass = nu.ensemble_mass();
    let expected = var / p.flow.ell;
    Ok(DecompositionReport {
        params: *p,
        total_variation: var,
        n_atoms: mu.len(),
        mass: MassCheck {
            ensemble_mass: mass,
            expected,
            relative_error: if expected == 0.0 { mass } else { (mass - expected).abs() / expected },
        },
        lengths: length_stats(nu),
        divergence_check: if panel.functions.is_empty() { 0.0 } else { check_div_free(mu, panel)? },
        far_sample_fraction: far_sample_fraction(nu, mu, 5.0 * p.epsilon, 1_000_000),
        reconstruction: reconstruction_error(mu, nu, p.epsilon, panel)?,
        endpoints: endpoint_identity_error(nu, mu, p.epsilon, panel)?,
    })
}

/// Mollification gap `|<mu * k_eps, phi> - <mu, phi>|` per panel field, for
/// each width in `schedule`. Indexed `[eps][field]`.
pub fn mollification_gaps(mu: &AtomicCharge, schedule: &[f64], panel: &FieldPanel) -> Result<Vec<Vec<f64>>> {
    let exact: Vec<f64> = panel
        .fields
        .iter()
        .map(|phi| mu.pair_with_field(phi))
        .collect::<Result<_>>()?;
    schedule
        .iter()
        .map(|&eps| {
            let mc = MollifiedCharge::new(mu.clone(), eps)?;
            panel
                .fields
                .iter()
                .zip(&exact)
                .map(|(phi, e)| Ok((mc.smoothed_action(phi)? - e).abs()))
                .collect()
        })
        .collect()
}

/// One level of an epsilon-refinement run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub epsilon: f64,
    pub mean_length_over_ell: f64,
    pub max_error_vs_exact: f64,
    pub max_error_vs_smoothed: f64,
    pub max_mollification_gap: f64,
}

/// Decomposes at every width of `schedule` (other parameters fixed) and
/// records how the errors evolve. No extrapolation is attempted.
pub fn refinement_report(
    mu: &AtomicCharge,
    base: &DecomposeParams,
    schedule: &[f64],
    panel: &FieldPanel,
) -> Result<Vec<RefinementLevel>> {
    schedule
        .iter()
        .map(|&eps| {
            let p = DecomposeParams { epsilon: eps, ..*base };
            let nu = decompose_div_free(mu, &p)?;
            let rec = reconstruction_error(mu, &nu, eps, panel)?;
            let max_of = |f: &dyn Fn(&FieldReconstruction) -> f64| rec.iter().map(f).fold(0.0, f64::max);
            Ok(RefinementLevel {
                epsilon: eps,
                mean_length_over_ell: length_stats(&nu).mean_over_ell,
                max_error_vs_exact: max_of(&|r| r.error_vs_exact),
                max_error_vs_smoothed: max_of(&|r| r.error_vs_smoothed),
                max_mollification_gap: max_of(&|r| (r.smoothed - r.exact).abs()),
            })
        })
        .collect()
}
