//! Charges whose divergence is a signed measure, via a lift to `R^{n+1}`.
//!
//! Given `mu` with `Div(mu) = sigma`, the lifted charge
//!
//! ```text
//! mu+ = ( mu (x) (delta_0 - delta_ell),  -sigma (x) lambda|[0, ell] )
//! ```
//!
//! is divergence free: `mu` sits on the plane `t = 0`, a reversed copy on
//! `t = ell`, and each atom of `sigma` becomes a vertical column. The lift is
//! decomposed by the divergence-free pipeline; every lifted curve is clipped
//! to the parameter window in which it visits the plane (a slab `t <= delta`
//! at finite `eps`), held constant outside it, and projected back to `R^n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charge::{Atom, AtomicCharge, ScalarAtomicMeasure};
use crate::curves::{weighted_estimate, Curve, CurveEnsemble, Estimate};
use crate::decompose::{check_div_free, decompose_div_free, length_stats, DecomposeParams, LengthStats};
use crate::error::{check_dim, Error, Result};
use crate::fields::{make_panel, BoundingBox, FieldPanel, VectorField};
use crate::numeric::{dist2, dot, pairwise_sum};

/// Default bound on the pair's normalized certification error.
pub const DEFAULT_CERTIFICATION_THRESHOLD: f64 = 0.05;

/// A charge together with an atomic measure certified to be its divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergencePair {
    pub mu: AtomicCharge,
    pub sigma: ScalarAtomicMeasure,
    /// `max_psi |<sigma, psi> + <mu, grad psi>| / (Var(mu) sup|grad psi| + Var(sigma))`
    /// over the certification panel.
    pub certification: f64,
}

impl DivergencePair {
    pub fn certify(mu: AtomicCharge, sigma: ScalarAtomicMeasure, panel: &FieldPanel) -> Result<Self> {
        check_dim(mu.dim(), sigma.dim())?;
        check_dim(mu.dim(), panel.dim())?;
        if panel.functions.is_empty() {
            return Err(Error::EmptyPanel("functions"));
        }
        let (vm, vs) = (mu.total_variation(), sigma.total_variation());
        let mut worst: f64 = 0.0;
        for psi in &panel.functions {
            let denom = vm * psi.gradient_sup() + vs;
            if denom == 0.0 {
                continue;
            }
            let mismatch = sigma.action(psi)? - mu.divergence_action(psi)?;
            worst = worst.max(mismatch.abs() / denom);
        }
        Ok(Self {
            mu,
            sigma,
            certification: worst,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftParams {
    pub ell: f64,
    /// Midpoint atoms per vertical column.
    pub column_atoms: usize,
    /// Plane-detection tolerance `delta`.
    pub slab_width: f64,
    pub certification_threshold: f64,
    /// Parameters of the `(n+1)`-dimensional run; `inner.flow.ell` must equal `ell`.
    pub inner: DecomposeParams,
}

impl LiftParams {
    pub fn new(ell: f64, column_atoms: usize, slab_width: f64, inner: DecomposeParams) -> Result<Self> {
        let p = Self {
            ell,
            column_atoms,
            slab_width,
            certification_threshold: DEFAULT_CERTIFICATION_THRESHOLD,
            inner,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0 && self.ell.is_finite()) {
            return Err(Error::invalid("ell must be positive"));
        }
        if self.column_atoms < 4 {
            return Err(Error::invalid("column_atoms must be at least 4"));
        }
        if !(self.slab_width > 0.0 && self.slab_width < self.ell / 4.0) {
            return Err(Error::invalid("slab width must lie in (0, ell/4)"));
        }
        if self.inner.flow.ell != self.ell {
            return Err(Error::invalid("inner flow ell differs from lift ell"));
        }
        self.inner.validate()
    }
}

/// The divergence-free `(n+1)`-dimensional charge built from `pair`.
pub fn build_lift(pair: &DivergencePair, p: &LiftParams) -> Result<AtomicCharge> {
    p.validate()?;
    if !(pair.certification <= p.certification_threshold) {
        return Err(Error::Uncertified {
            error: pair.certification,
            threshold: p.certification_threshold,
        });
    }
    let n = pair.dim();
    let ell = p.ell;
    let m = p.column_atoms;
    let lifted_point = |x: &[f64], t: f64| {
        let mut v = Vec::with_capacity(n + 1);
        v.extend_from_slice(x);
        v.push(t);
        v
    };
    let mut atoms = Vec::with_capacity(2 * pair.mu.len() + m * pair.sigma.atoms().len());
    for a in pair.mu.atoms() {
        atoms.push(Atom::new(lifted_point(&a.position, 0.0), lifted_point(&a.weight, 0.0)));
        let neg: Vec<f64> = a.weight.iter().map(|w| -w).collect();
        atoms.push(Atom::new(lifted_point(&a.position, ell), lifted_point(&neg, 0.0)));
    }
    let dt = ell / m as f64;
    for s in pair.sigma.atoms() {
        let mut w = vec![0.0; n + 1];
        w[n] = -s.mass * dt;
        for q in 0..m {
            atoms.push(Atom::new(lifted_point(&s.position, (q as f64 + 0.5) * dt), w.clone()));
        }
    }
    AtomicCharge::new(n + 1, atoms)
}

/// Normalized panel divergence of a lifted charge (0 for the empty lift).
pub fn verify_lift_divergence(lifted: &AtomicCharge, panel: &FieldPanel) -> Result<f64> {
    check_div_free(lifted, panel)
}

/// `(n+1)`-dimensional panel of functions over the box of `base` times the
/// height window `[-ell/4, 5 ell/4]`.
pub fn lifted_panel(base: &FieldPanel, ell: f64, n_functions: usize) -> Result<FieldPanel> {
    let mut lo = base.domain_box.lo.clone();
    let mut hi = base.domain_box.hi.clone();
    lo.push(-0.25 * ell);
    hi.push(1.25 * ell);
    make_panel(base.seed, 0, n_functions, &BoundingBox::new(lo, hi)?)
}

/// First and last sample index at which the height coordinate is `<= delta`.
fn slab_window(gamma_plus: &Curve, delta: f64) -> Option<(usize, usize)> {
    let n = gamma_plus.dim() - 1;
    let inside = |k: usize| gamma_plus.point(k)[n] <= delta;
    let first = (0..gamma_plus.samples()).find(|&k| inside(k))?;
    let last = (0..gamma_plus.samples()).rev().find(|&k| inside(k))?;
    Some((first, last))
}

/// Clips a lifted curve to its slab window, holds it constant outside, and
/// projects to the first `n` coordinates. `None` if it never enters the slab.
pub fn classify_clip_project(gamma_plus: &Curve, p: &LiftParams) -> Result<Option<Curve>> {
    if gamma_plus.dim() < 2 {
        return Err(Error::invalid("lifted curve needs dimension >= 2"));
    }
    let n = gamma_plus.dim() - 1;
    let Some((alpha, beta)) = slab_window(gamma_plus, p.slab_width) else {
        return Ok(None);
    };
    let mut pts = Vec::with_capacity(gamma_plus.samples() * n);
    for k in 0..gamma_plus.samples() {
        pts.extend_from_slice(&gamma_plus.point(k.clamp(alpha, beta))[..n]);
    }
    Ok(Some(Curve::new(gamma_plus.ell(), n, pts)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldCheck {
    pub estimate: Estimate,
    pub exact: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

impl FieldCheck {
    fn new(estimate: Estimate, exact: f64) -> Self {
        let abs_error = (estimate.value - exact).abs();
        Self {
            estimate,
            exact,
            abs_error,
            rel_error: if exact != 0.0 { abs_error / exact.abs() } else { abs_error },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassAccounting {
    pub kept_weight: f64,
    pub discarded_weight: f64,
    pub kept_curves: usize,
    pub discarded_curves: usize,
    /// `Var(mu+) / ell`.
    pub expected_total: f64,
    pub relative_error: f64,
}

/// Mean height velocity of lifted curve segments near each part of
/// `supp(sigma)` inside the strip.
///
/// `E+` holds the atoms where `-sigma > 0` (sinks of `mu`, columns the lift
/// climbs) and `E-` those where `-sigma < 0` (sources, columns it descends).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalDiagnostic {
    pub mean_velocity_e_plus: f64,
    pub segments_e_plus: usize,
    pub mean_velocity_e_minus: f64,
    pub segments_e_minus: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub params: LiftParams,
    pub certification: f64,
    pub lifted_atoms: usize,
    pub lifted_variation: f64,
    pub lift_divergence: f64,
    pub mass: MassAccounting,
    pub inner_lengths: LengthStats,
    pub reconstruction: Vec<FieldCheck>,
    pub restriction: Vec<FieldCheck>,
    pub vertical: VerticalDiagnostic,
}

pub struct LiftDecomposition {
    pub ensemble: CurveEnsemble,
    pub lifted: AtomicCharge,
    pub inner: CurveEnsemble,
    pub report: LiftReport,
}

/// Full lift pipeline; `panel` supplies the `n`-dimensional fields for the
/// reconstruction report and the seed/box for the lifted divergence check.
pub fn decompose_with_divergence(pair: &DivergencePair, p: &LiftParams, panel: &FieldPanel) -> Result<LiftDecomposition> {
    check_dim(pair.dim(), panel.dim())?;
    let n = pair.dim();
    let lifted = build_lift(pair, p)?;
    let inner = decompose_div_free(&lifted, &p.inner)?;

    let projected: Vec<Option<Curve>> = inner
        .entries()
        .par_iter()
        .map(|(c, _)| classify_clip_project(c, p))
        .collect::<Result<_>>()?;
    let mut ensemble = CurveEnsemble::new(p.ell, n);
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (proj, (_, w)) in projected.into_iter().zip(inner.entries()) {
        match proj {
            Some(c) => {
                kept.push(*w);
                ensemble.push(c, *w)?;
            }
            None => dropped.push(*w),
        }
    }
    let kept_weight = pairwise_sum(&kept);
    let discarded_weight = pairwise_sum(&dropped);
    let lifted_variation = lifted.total_variation();
    let expected_total = lifted_variation / p.ell;

    let fn_count = panel.functions.len().max(1);
    let lift_divergence = verify_lift_divergence(&lifted, &lifted_panel(panel, p.ell, fn_count)?)?;

    let mut reconstruction = Vec::with_capacity(panel.fields.len());
    let mut restriction = Vec::with_capacity(panel.fields.len());
    for phi in &panel.fields {
        let exact = pair.mu.pair_with_field(phi)?;
        reconstruction.push(FieldCheck::new(full_weight_estimate(&ensemble, &inner, phi)?, exact));
        restriction.push(FieldCheck::new(slab_restricted_action(&inner, phi, p.slab_width)?, exact));
    }

    let report = LiftReport {
        params: *p,
        certification: pair.certification,
        lifted_atoms: lifted.len(),
        lifted_variation,
        lift_divergence,
        mass: MassAccounting {
            kept_weight,
            discarded_weight,
            kept_curves: kept.len(),
            discarded_curves: dropped.len(),
            expected_total,
            relative_error: ((kept_weight + discarded_weight) - expected_total).abs() / expected_total,
        },
        inner_lengths: length_stats(&inner),
        reconstruction,
        restriction,
        vertical: vertical_speed(&inner, &pair.sigma, p.slab_width, 3.0 * p.inner.epsilon),
    };
    Ok(LiftDecomposition {
        ensemble,
        lifted,
        inner,
        report,
    })
}

/// Ensemble action of the projected curves with the standard error computed
/// over all lifted curves (discarded ones contribute zero), which is the
/// correct i.i.d. population.
fn full_weight_estimate<F: VectorField + ?Sized>(ensemble: &CurveEnsemble, inner: &CurveEnsemble, phi: &F) -> Result<Estimate> {
    let mut values = ensemble.curve_actions(phi)?;
    let mut weights = ensemble.weights();
    let missing = inner.len() - ensemble.len();
    if missing > 0 {
        // inner weights are all equal; discarded curves are zero-valued draws
        let w = inner.entries()[0].1;
        values.extend(std::iter::repeat_n(0.0, missing));
        weights.extend(std::iter::repeat_n(w, missing));
    }
    Ok(weighted_estimate(&weights, &values))
}

/// `sum_j w_j sum_k [midpoint height <= delta] <phi(pi mid_k), pi dgamma_k>`:
/// the lifted decomposition restricted to the plane, paired with `(phi, 0)`.
pub fn slab_restricted_action<F: VectorField + ?Sized>(inner: &CurveEnsemble, phi: &F, delta: f64) -> Result<Estimate> {
    let n = inner.dim() - 1;
    check_dim(n, phi.dim())?;
    let values: Vec<f64> = inner
        .entries()
        .par_iter()
        .map(|(c, _)| {
            let mut mid = vec![0.0; n + 1];
            let mut inc = vec![0.0; n];
            let mut val = vec![0.0; n];
            let terms: Vec<f64> = (1..=c.segments())
                .filter_map(|k| {
                    let (a, b) = (c.point(k - 1), c.point(k));
                    for j in 0..=n {
                        mid[j] = 0.5 * (a[j] + b[j]);
                    }
                    if mid[n] > delta {
                        return None;
                    }
                    for j in 0..n {
                        inc[j] = b[j] - a[j];
                    }
                    phi.eval_into(&mid[..n], &mut val);
                    Some(dot(&val, &inc))
                })
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    Ok(weighted_estimate(&inner.weights(), &values))
}

/// Mean height velocity of segments whose midpoint lies strictly inside the
/// strip (`delta < t < ell - delta`) and within `radius` of a `sigma` atom.
pub fn vertical_speed(inner: &CurveEnsemble, sigma: &ScalarAtomicMeasure, delta: f64, radius: f64) -> VerticalDiagnostic {
    let n = inner.dim() - 1;
    let ell = inner.ell();
    let r2 = radius * radius;
    let per_curve: Vec<[f64; 4]> = inner
        .entries()
        .par_iter()
        .map(|(c, _)| {
            let mut acc = [0.0; 4];
            let dt = c.dt();
            let mut mid = vec![0.0; n + 1];
            for k in 1..=c.segments() {
                let (a, b) = (c.point(k - 1), c.point(k));
                for j in 0..=n {
                    mid[j] = 0.5 * (a[j] + b[j]);
                }
                if !(mid[n] > delta && mid[n] < ell - delta) {
                    continue;
                }
                let nearest = sigma
                    .atoms()
                    .iter()
                    .map(|s| (dist2(&s.position, &mid[..n]), s.mass))
                    .min_by(|x, y| x.0.total_cmp(&y.0));
                let Some((d2, mass)) = nearest else { continue };
                if d2 > r2 {
                    continue;
                }
                let v = (b[n] - a[n]) / dt;
                // -sigma > 0 marks E+
                if mass < 0.0 {
                    acc[0] += v;
                    acc[1] += 1.0;
                } else {
                    acc[2] += v;
                    acc[3] += 1.0;
                }
            }
            acc
        })
        .collect();
    let mut tot = [0.0; 4];
    for a in &per_curve {
        for j in 0..4 {
            tot[j] += a[j];
        }
    }
    let mean = |s: f64, c: f64| if c > 0.0 { s / c } else { 0.0 };
    VerticalDiagnostic {
        mean_velocity_e_plus: mean(tot[0], tot[1]),
        segments_e_plus: tot[1] as usize,
        mean_velocity_e_minus: mean(tot[2], tot[3]),
        segments_e_minus: tot[3] as usize,
        radius,
    }
}
