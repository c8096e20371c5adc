//! 1-Lipschitz curves stored as uniform-time polylines, and finite weighted
//! ensembles of them.
//!
//! A curve on `[0, ell]` keeps `m + 1` samples at times `t_k = k ell / m`.
//! Its velocity only exists as finite differences, so every integral against
//! `dgamma` is a Riemann–Stieltjes sum at the native resolution:
//!
//! ```text
//! [gamma](phi) ~ sum_{k=1..m} <phi(xi_k), gamma(t_k) - gamma(t_{k-1})>
//! ```
//!
//! with `xi_k` the segment midpoint (second order), or the right endpoint
//! `gamma(t_k)` via [`Curve::right_endpoint_action`] (first order).

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fields::{FieldPanel, ScalarField, VectorField};
use crate::numeric::{all_finite, dist2, dot, pairwise_sum};

/// Relative slack allowed on the per-segment Lipschitz bound.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    ell: f64,
    dim: usize,
    points: Vec<f64>,
}

impl Curve {
    /// `points` is the flat list of `m + 1` samples, `dim` coordinates each.
    pub fn new(ell: f64, dim: usize, points: Vec<f64>) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::invalid("curve length budget must be positive and finite"));
        }
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::invalid("sample buffer is not a whole number of points"));
        }
        let samples = points.len() / dim;
        if samples < 2 {
            return Err(Error::DegenerateCurve(samples));
        }
        if !all_finite(&points) {
            return Err(Error::NonFinite("curve samples"));
        }
        let curve = Self { ell, dim, points };
        let bound = curve.dt() * (1.0 + LIPSCHITZ_SLACK);
        for k in 1..samples {
            let inc = dist2(curve.point(k - 1), curve.point(k)).sqrt();
            if inc > bound {
                return Err(Error::LipschitzViolation {
                    index: k,
                    increment: inc,
                    bound,
                });
            }
        }
        Ok(curve)
    }

    pub fn from_points(ell: f64, points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        let mut flat = Vec::with_capacity(dim * points.len());
        for p in points {
            check_dim(dim, p.len())?;
            flat.extend_from_slice(p);
        }
        if points.len() < 2 {
            return Err(Error::DegenerateCurve(points.len()));
        }
        Self::new(ell, dim, flat)
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of segments `m`.
    pub fn segments(&self) -> usize {
        self.points.len() / self.dim - 1
    }

    pub fn samples(&self) -> usize {
        self.points.len() / self.dim
    }

    /// Time step between samples, `ell / m`.
    pub fn dt(&self) -> f64 {
        self.ell / self.segments() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.ell * k as f64 / self.segments() as f64
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn start(&self) -> &[f64] {
        self.point(0)
    }

    pub fn end(&self) -> &[f64] {
        self.point(self.segments())
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Same samples in reverse order.
    pub fn reversed(&self) -> Self {
        let mut pts = Vec::with_capacity(self.points.len());
        for k in (0..self.samples()).rev() {
            pts.extend_from_slice(self.point(k));
        }
        Self {
            ell: self.ell,
            dim: self.dim,
            points: pts,
        }
    }

    /// Riemann–Stieltjes approximation of the work `int <phi(gamma), dgamma>`,
    /// tagged at segment midpoints. Exactly antisymmetric under reversal and
    /// equal to pairing `phi` with [`AtomicCharge::from_curve`].
    ///
    /// [`AtomicCharge::from_curve`]: crate::charge::AtomicCharge::from_curve
    pub fn curve_action<F: VectorField + ?Sized>(&self, phi: &F) -> Result<f64> {
        self.tagged_action(phi, false)
    }

    /// The same sum tagged at right endpoints, `sum_k <phi(gamma(t_k)), dgamma_k>`.
    /// First-order accurate in `1/m`.
    pub fn right_endpoint_action<F: VectorField + ?Sized>(&self, phi: &F) -> Result<f64> {
        self.tagged_action(phi, true)
    }

    fn tagged_action<F: VectorField + ?Sized>(&self, phi: &F, right_endpoint: bool) -> Result<f64> {
        check_dim(self.dim, phi.dim())?;
        let mut buf = vec![0.0; self.dim];
        let mut inc = vec![0.0; self.dim];
        let mut at = vec![0.0; self.dim];
        let terms: Vec<f64> = (1..=self.segments())
            .map(|k| {
                let (p, q) = (self.point(k - 1), self.point(k));
                for j in 0..self.dim {
                    inc[j] = q[j] - p[j];
                    at[j] = if right_endpoint { q[j] } else { 0.5 * (p[j] + q[j]) };
                }
                phi.eval_into(&at, &mut buf);
                dot(&buf, &inc)
            })
            .collect();
        Ok(pairwise_sum(&terms))
    }

    /// Polyline length `sum_k |gamma(t_k) - gamma(t_{k-1})|`.
    pub fn length(&self) -> f64 {
        let incs: Vec<f64> = (1..=self.segments())
            .map(|k| dist2(self.point(k - 1), self.point(k)).sqrt())
            .collect();
        pairwise_sum(&incs)
    }

    /// `<Div [gamma], psi> = psi(gamma(0)) - psi(gamma(ell))`, in closed form.
    pub fn curve_divergence_action<S: ScalarField + ?Sized>(&self, psi: &S) -> Result<f64> {
        check_dim(self.dim, psi.dim())?;
        Ok(psi.value(self.start()) - psi.value(self.end()))
    }

    /// Time the polyline spends in `region`, with exact per-segment clipping.
    pub fn occupation_time(&self, region: &Region) -> Result<f64> {
        check_dim(self.dim, region.dim())?;
        let dt = self.dt();
        let mut d = vec![0.0; self.dim];
        let parts: Vec<f64> = (1..=self.segments())
            .map(|k| {
                let (p, q) = (self.point(k - 1), self.point(k));
                for j in 0..self.dim {
                    d[j] = q[j] - p[j];
                }
                region.fraction(p, &d) * dt
            })
            .collect();
        Ok(pairwise_sum(&parts))
    }

    /// Certified bounds on `Var([gamma])`: the best panel probe below, the
    /// length above.
    pub fn variation_bracket(&self, panel: &FieldPanel) -> Result<(f64, f64)> {
        if panel.fields.is_empty() {
            return Err(Error::EmptyPanel("fields"));
        }
        let mut lower: f64 = 0.0;
        for phi in &panel.fields {
            // -phi is admissible whenever phi is
            lower = lower.max(self.curve_action(phi)?.abs());
        }
        Ok((lower, self.length()))
    }
}

/// Regions with exact segment clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    /// Closed ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : <x, normal> >= offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Complement(Box<Region>),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::HalfSpace { normal, .. } => normal.len(),
            Region::Complement(r) => r.dim(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => dist2(x, center) <= radius * radius,
            Region::HalfSpace { normal, offset } => dot(x, normal) >= *offset,
            Region::Complement(r) => !r.contains(x),
        }
    }

    /// Fraction of `s in [0, 1]` with `p + s d` inside the region.
    fn fraction(&self, p: &[f64], d: &[f64]) -> f64 {
        match self {
            Region::Ball { center, radius } => {
                let a = dot(d, d);
                let mut pc = 0.0;
                let mut c0 = -radius * radius;
                for j in 0..p.len() {
                    let r = p[j] - center[j];
                    pc += r * d[j];
                    c0 += r * r;
                }
                if a == 0.0 {
                    return if c0 <= 0.0 { 1.0 } else { 0.0 };
                }
                let b = 2.0 * pc;
                let disc = b * b - 4.0 * a * c0;
                if disc <= 0.0 {
                    return 0.0;
                }
                let sq = disc.sqrt();
                let s1 = (-b - sq) / (2.0 * a);
                let s2 = (-b + sq) / (2.0 * a);
                (s2.min(1.0) - s1.max(0.0)).max(0.0)
            }
            Region::HalfSpace { normal, offset } => {
                let f0 = dot(p, normal) - offset;
                let slope = dot(d, normal);
                if slope == 0.0 {
                    return if f0 >= 0.0 { 1.0 } else { 0.0 };
                }
                let root = -f0 / slope;
                if slope > 0.0 {
                    1.0 - root.clamp(0.0, 1.0)
                } else {
                    root.clamp(0.0, 1.0)
                }
            }
            Region::Complement(r) => 1.0 - r.fraction(p, d),
        }
    }
}

/// Finite positive measure on curves: weighted curves sharing `ell` and `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEnsemble {
    ell: f64,
    dim: usize,
    entries: Vec<(Curve, f64)>,
}

/// Ensemble estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl CurveEnsemble {
    pub fn new(ell: f64, dim: usize) -> Self {
        Self {
            ell,
            dim,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(ell: f64, dim: usize, entries: Vec<(Curve, f64)>) -> Result<Self> {
        let mut e = Self::new(ell, dim);
        e.entries.reserve(entries.len());
        for (c, w) in entries {
            e.push(c, w)?;
        }
        Ok(e)
    }

    pub fn push(&mut self, curve: Curve, weight: f64) -> Result<()> {
        check_dim(self.dim, curve.dim())?;
        if curve.ell() != self.ell {
            return Err(Error::invalid(format!(
                "curve length budget {} differs from ensemble budget {}",
                curve.ell(),
                self.ell
            )));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::invalid("curve weights must be positive and finite"));
        }
        self.entries.push((curve, weight));
        Ok(())
    }

    /// Appends all curves of `other`.
    pub fn extend(&mut self, other: CurveEnsemble) -> Result<()> {
        for (c, w) in other.entries {
            self.push(c, w)?;
        }
        Ok(())
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(Curve, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn curves(&self) -> impl Iterator<Item = &Curve> {
        self.entries.iter().map(|(c, _)| c)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, w)| *w).collect()
    }

    /// `nu(K_ell) = sum_j weight_j`.
    pub fn ensemble_mass(&self) -> f64 {
        pairwise_sum(&self.weights())
    }

    /// Per-curve actions in entry order (computed in parallel).
    pub fn curve_actions<F: VectorField + ?Sized>(&self, phi: &F) -> Result<Vec<f64>> {
        check_dim(self.dim, phi.dim())?;
        self.entries.par_iter().map(|(c, _)| c.curve_action(phi)).collect()
    }

    /// `int [gamma](phi) dnu = sum_j weight_j [gamma_j](phi)`.
    pub fn ensemble_action<F: VectorField + ?Sized>(&self, phi: &F) -> Result<f64> {
        Ok(self.ensemble_action_estimate(phi)?.value)
    }

    /// Ensemble action together with its standard error, treating the
    /// curves as i.i.d. draws from `nu / mass`.
    pub fn ensemble_action_estimate<F: VectorField + ?Sized>(&self, phi: &F) -> Result<Estimate> {
        let actions = self.curve_actions(phi)?;
        Ok(weighted_estimate(&self.weights(), &actions))
    }

    pub fn mean_length(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let l: Vec<f64> = self.entries.par_iter().map(|(c, _)| c.length()).collect();
        pairwise_sum(&l) / l.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        let file = EnsembleFile {
            ell: self.ell,
            dim: self.dim,
            curves: self
                .entries
                .iter()
                .map(|(c, w)| EnsembleCurveRecord {
                    w: *w,
                    pts: c.iter_points().map(<[f64]>::to_vec).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: EnsembleFile = serde_json::from_str(s)?;
        let mut e = Self::new(file.ell, file.dim);
        for rec in file.curves {
            let curve = Curve::from_points(file.ell, &rec.pts)?;
            e.push(curve, rec.w)?;
        }
        Ok(e)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_json()?.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    /// One row per `(curve id, sample index)`: `curve,sample,t,weight,x0,..`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "curve,sample,t,weight")?;
        for k in 0..self.dim {
            write!(out, ",x{k}")?;
        }
        writeln!(out)?;
        for (id, (c, w)) in self.entries.iter().enumerate() {
            for (k, p) in c.iter_points().enumerate() {
                write!(out, "{id},{k},{},{w}", c.time(k))?;
                for v in p {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// `sum_j w_j a_j` and its standard error, with the `a_j` taken as i.i.d.
/// samples of a quantity whose mass-weighted mean is being estimated.
pub fn weighted_estimate(weights: &[f64], values: &[f64]) -> Estimate {
    let n = values.len();
    let terms: Vec<f64> = weights.iter().zip(values).map(|(w, a)| w * a).collect();
    let value = pairwise_sum(&terms);
    if n < 2 {
        return Estimate { value, std_error: 0.0 };
    }
    let mass = pairwise_sum(weights);
    let mean = value / mass;
    let dev: Vec<f64> = weights
        .iter()
        .zip(values)
        .map(|(w, a)| w * w * (a - mean) * (a - mean))
        .collect();
    let var = pairwise_sum(&dev) * n as f64 / (n - 1) as f64;
    Estimate {
        value,
        std_error: var.sqrt(),
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    ell: f64,
    dim: usize,
    curves: Vec<EnsembleCurveRecord>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleCurveRecord {
    w: f64,
    pts: Vec<Vec<f64>>,
}
