//! Smooth test functions and test fields with analytic gradients.
//!
//! Every function is a Gaussian-windowed quadratic polynomial
//!
//! ```text
//! psi(x) = scale * p(u) * exp(-|u|^2),   u = (x - center) / radius,
//! p(u)   = a0 + sum_k a_k u_k + sum_k b_k u_k^2
//! ```
//!
//! These are not compactly supported, but value and gradient fall below
//! 1e-40 beyond ten radii, which is far below every tolerance used with
//! them. Normalized constructors divide by a probed supremum times 1.05 so
//! that `|psi| <= 1` (and `|phi| <= 1` for fields) holds everywhere.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Safety factor applied on top of a probed supremum.
pub const NORMALIZATION_SAFETY: f64 = 1.05;

/// Scalar field with an analytic gradient.
pub trait ScalarField: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);
}

/// Vector field `R^n -> R^n`.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::invalid("box has dimension 0"));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("box bounds"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
            return Err(Error::invalid("box is empty (lo >= hi on some axis)"));
        }
        Ok(Self { lo, hi })
    }

    /// Cube `[-half, half]^dim`.
    pub fn cube(dim: usize, half: f64) -> Result<Self> {
        Self::new(vec![-half; dim], vec![half; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn max_side(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .fold(0.0, f64::max)
    }

    /// Smallest box containing all `points`, padded by `margin` on every side.
    pub fn around<'a>(dim: usize, points: impl IntoIterator<Item = &'a [f64]>, margin: f64) -> Result<Self> {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut any = false;
        for p in points {
            check_dim(dim, p.len())?;
            any = true;
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if !any {
            lo.iter_mut().for_each(|v| *v = 0.0);
            hi.iter_mut().for_each(|v| *v = 0.0);
        }
        for k in 0..dim {
            lo[k] -= margin;
            hi[k] += margin;
        }
        Self::new(lo, hi)
    }
}

/// Gaussian-windowed quadratic polynomial on `R^dim`.
#[derive(Debug, Clone)]
pub struct TestFunction {
    dim: usize,
    center: Vec<f64>,
    radius: f64,
    // [a0, a_1..a_n, b_1..b_n]
    coeffs: Vec<f64>,
    scale: f64,
    grad_sup: OnceLock<f64>,
}

impl PartialEq for TestFunction {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.center == other.center
            && self.radius == other.radius
            && self.coeffs == other.coeffs
            && self.scale == other.scale
    }
}

impl TestFunction {
    /// Unnormalized constructor: `scale` is used as given.
    pub fn with_scale(center: Vec<f64>, radius: f64, coeffs: Vec<f64>, scale: f64) -> Result<Self> {
        let dim = center.len();
        if dim == 0 {
            return Err(Error::invalid("test function of dimension 0"));
        }
        if coeffs.len() != 1 + 2 * dim {
            return Err(Error::invalid(format!(
                "expected {} polynomial coefficients, got {}",
                1 + 2 * dim,
                coeffs.len()
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius must be positive and finite"));
        }
        if !crate::numeric::all_finite(&center) || !crate::numeric::all_finite(&coeffs) || !scale.is_finite() {
            return Err(Error::NonFinite("test function parameters"));
        }
        Ok(Self {
            dim,
            center,
            radius,
            coeffs,
            scale,
            grad_sup: OnceLock::new(),
        })
    }

    /// Normalized constructor: `|psi| <= 1 / 1.05` after probing.
    pub fn new(center: Vec<f64>, radius: f64, coeffs: Vec<f64>) -> Result<Self> {
        let mut f = Self::with_scale(center, radius, coeffs, 1.0)?;
        let (lo, hi) = f.window_box(3.0);
        let sup = maximize(&lo, &hi, |x| f.value(x).abs());
        if sup <= 0.0 {
            return Err(Error::invalid("test function is identically zero"));
        }
        f.scale = 1.0 / (NORMALIZATION_SAFETY * sup);
        Ok(f)
    }

    /// Radial bump `exp(-|x-c|^2/r^2)` with peak value 1 at the center.
    pub fn bump(center: Vec<f64>, radius: f64) -> Result<Self> {
        let dim = center.len();
        let mut coeffs = vec![0.0; 1 + 2 * dim];
        coeffs[0] = 1.0;
        Self::with_scale(center, radius, coeffs, 1.0)
    }

    pub fn zero(dim: usize) -> Result<Self> {
        let mut coeffs = vec![0.0; 1 + 2 * dim];
        coeffs[0] = 1.0;
        Self::with_scale(vec![0.0; dim], 1.0, coeffs, 0.0)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Checked evaluation.
    pub fn eval_function(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.value(x))
    }

    /// Checked analytic gradient.
    pub fn eval_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut g = vec![0.0; self.dim];
        self.gradient_into(x, &mut g);
        Ok(g)
    }

    /// Probed supremum of `|grad psi|`, computed once.
    pub fn gradient_sup(&self) -> f64 {
        *self.grad_sup.get_or_init(|| {
            if self.scale == 0.0 {
                return 0.0;
            }
            let (lo, hi) = self.window_box(3.0);
            let mut g = vec![0.0; self.dim];
            maximize(&lo, &hi, |x| {
                self.gradient_into(x, &mut g);
                crate::numeric::norm(&g)
            })
        })
    }

    fn window_box(&self, radii: f64) -> (Vec<f64>, Vec<f64>) {
        let lo = self.center.iter().map(|c| c - radii * self.radius).collect();
        let hi = self.center.iter().map(|c| c + radii * self.radius).collect();
        (lo, hi)
    }

    #[inline]
    fn poly_and_window(&self, x: &[f64]) -> (f64, f64) {
        let n = self.dim;
        let inv_r = 1.0 / self.radius;
        let mut p = self.coeffs[0];
        let mut q = 0.0;
        for k in 0..n {
            let u = (x[k] - self.center[k]) * inv_r;
            p += self.coeffs[1 + k] * u + self.coeffs[1 + n + k] * u * u;
            q += u * u;
        }
        (p, (-q).exp())
    }
}

impl ScalarField for TestFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let (p, w) = self.poly_and_window(x);
        self.scale * p * w
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        if self.scale == 0.0 {
            out[..n].iter_mut().for_each(|g| *g = 0.0);
            return;
        }
        let inv_r = 1.0 / self.radius;
        let (p, w) = self.poly_and_window(x);
        let f = self.scale * inv_r * w;
        for k in 0..n {
            let u = (x[k] - self.center[k]) * inv_r;
            let dp = self.coeffs[1 + k] + 2.0 * self.coeffs[1 + n + k] * u;
            out[k] = f * (dp - 2.0 * u * p);
        }
    }
}

/// Vector field whose components are test functions, scaled so `|phi| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestField {
    dim: usize,
    components: Vec<TestFunction>,
    scale: f64,
    sup: f64,
}

impl TestField {
    /// Normalized field: `|phi| <= 1 / 1.05` after probing.
    pub fn new(components: Vec<TestFunction>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::invalid("test field of dimension 0"));
        }
        for c in &components {
            check_dim(dim, c.dim)?;
        }
        let mut field = Self {
            dim,
            components,
            scale: 1.0,
            sup: 0.0,
        };
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for c in field.components.iter().filter(|c| c.scale != 0.0) {
            let (l, h) = c.window_box(3.0);
            for k in 0..dim {
                lo[k] = lo[k].min(l[k]);
                hi[k] = hi[k].max(h[k]);
            }
        }
        if lo[0] == f64::INFINITY {
            return Err(Error::invalid("test field is identically zero"));
        }
        let mut buf = vec![0.0; dim];
        let sup = maximize(&lo, &hi, |x| {
            field.eval_into(x, &mut buf);
            crate::numeric::norm(&buf)
        });
        field.scale = 1.0 / (NORMALIZATION_SAFETY * sup);
        field.sup = 1.0 / NORMALIZATION_SAFETY;
        Ok(field)
    }

    /// `direction * bump(center, radius)`; for a unit direction the peak norm is 1.
    pub fn directional(direction: &[f64], center: Vec<f64>, radius: f64) -> Result<Self> {
        let dim = direction.len();
        check_dim(dim, center.len())?;
        let dn = crate::numeric::norm(direction);
        if !(dn > 0.0) || !dn.is_finite() {
            return Err(Error::invalid("direction must be nonzero and finite"));
        }
        let mut coeffs = vec![0.0; 1 + 2 * dim];
        coeffs[0] = 1.0;
        let components = direction
            .iter()
            .map(|d| TestFunction::with_scale(center.clone(), radius, coeffs.clone(), *d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            components,
            scale: 1.0,
            sup: dn,
        })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        let components = (0..dim).map(|_| TestFunction::zero(dim)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            components,
            scale: 1.0,
            sup: 0.0,
        })
    }

    pub fn components(&self) -> &[TestFunction] {
        &self.components
    }

    /// Supremum of `|phi|` (probed for normalized fields, exact for the others).
    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    /// Checked evaluation.
    pub fn eval_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(self.eval(x))
    }
}

impl VectorField for TestField {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = self.scale * c.value(x);
        }
    }
}

/// `grad psi` viewed as a vector field.
pub struct GradientField<'a>(pub &'a TestFunction);

impl VectorField for GradientField<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.0.gradient_into(x, out)
    }
}

/// Closure-backed vector field, mostly for injected analytic fields in tests.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Recipe for a panel; panels are regenerated from this, never stored by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub seed: u64,
    pub n_fields: usize,
    pub n_functions: usize,
    #[serde(rename = "box")]
    pub domain_box: BoundingBox,
}

impl PanelSpec {
    pub fn build(&self) -> Result<FieldPanel> {
        make_panel(self.seed, self.n_fields, self.n_functions, &self.domain_box)
    }
}

/// Finite family of probes standing in for "all test fields".
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPanel {
    pub seed: u64,
    pub domain_box: BoundingBox,
    pub fields: Vec<TestField>,
    pub functions: Vec<TestFunction>,
}

impl FieldPanel {
    pub fn from_parts(domain_box: BoundingBox, fields: Vec<TestField>, functions: Vec<TestFunction>) -> Result<Self> {
        let dim = domain_box.dim();
        for f in &fields {
            check_dim(dim, f.dim)?;
        }
        for f in &functions {
            check_dim(dim, f.dim)?;
        }
        Ok(Self {
            seed: 0,
            domain_box,
            fields,
            functions,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain_box.dim()
    }
}

fn random_function(rng: &mut ChaCha8Rng, bx: &BoundingBox) -> Result<TestFunction> {
    let dim = bx.dim();
    let side = bx.max_side();
    let center: Vec<f64> = (0..dim).map(|k| rng.random_range(bx.lo[k]..bx.hi[k])).collect();
    let radius = side * rng.random_range(0.15..0.4);
    let mut coeffs = Vec::with_capacity(1 + 2 * dim);
    let a0: f64 = rng.random_range(0.5..1.0);
    coeffs.push(if rng.random_bool(0.5) { a0 } else { -a0 });
    for _ in 0..dim {
        coeffs.push(rng.random_range(-1.0..1.0));
    }
    for _ in 0..dim {
        coeffs.push(rng.random_range(-0.5..0.5));
    }
    TestFunction::new(center, radius, coeffs)
}

/// Deterministic panel of `n_fields` fields and `n_functions` functions in `bx`.
pub fn make_panel(seed: u64, n_fields: usize, n_functions: usize, bx: &BoundingBox) -> Result<FieldPanel> {
    if n_fields == 0 && n_functions == 0 {
        return Err(Error::invalid("panel needs at least one field or function"));
    }
    let bx = BoundingBox::new(bx.lo.clone(), bx.hi.clone())?;
    let dim = bx.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fields = Vec::with_capacity(n_fields);
    for _ in 0..n_fields {
        let comps = (0..dim)
            .map(|_| random_function(&mut rng, &bx))
            .collect::<Result<Vec<_>>>()?;
        fields.push(TestField::new(comps)?);
    }
    let mut functions = Vec::with_capacity(n_functions);
    for _ in 0..n_functions {
        functions.push(random_function(&mut rng, &bx)?);
    }
    Ok(FieldPanel {
        seed,
        domain_box: bx,
        fields,
        functions,
    })
}

fn grid_points_per_axis(dim: usize) -> usize {
    match dim {
        1 => 401,
        2 => 81,
        3 => 25,
        4 => 11,
        _ => 5,
    }
}

/// Global maximum of `f` over a box: dense grid, then compass search from
/// the best grid points.
pub(crate) fn maximize(lo: &[f64], hi: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    const STARTS: usize = 4;
    let dim = lo.len();
    let per_axis = grid_points_per_axis(dim);
    let total = per_axis.pow(dim as u32);
    let spacing: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| (h - l) / (per_axis - 1) as f64).collect();

    let mut best: Vec<(f64, Vec<f64>)> = Vec::with_capacity(STARTS + 1);
    let mut x = vec![0.0; dim];
    for idx in 0..total {
        let mut r = idx;
        for k in 0..dim {
            x[k] = lo[k] + (r % per_axis) as f64 * spacing[k];
            r /= per_axis;
        }
        let v = f(&x);
        if best.len() < STARTS || v > best[best.len() - 1].0 {
            let pos = best.iter().position(|(b, _)| v > *b).unwrap_or(best.len());
            best.insert(pos, (v, x.clone()));
            best.truncate(STARTS);
        }
    }

    let mut overall = best.first().map(|b| b.0).unwrap_or(0.0);
    for (mut val, mut pt) in best {
        let mut step = spacing.iter().cloned().fold(0.0, f64::max);
        let floor = step * 1e-9;
        while step > floor {
            let mut improved = false;
            for k in 0..dim {
                for sgn in [1.0, -1.0] {
                    let orig = pt[k];
                    pt[k] = orig + sgn * step;
                    let v = f(&pt);
                    if v > val {
                        val = v;
                        improved = true;
                    } else {
                        pt[k] = orig;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        overall = overall.max(val);
    }
    overall
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_function() -> TestFunction {
        TestFunction::new(vec![0.3, -0.2], 0.7, vec![0.8, 0.5, -0.4, 0.3, -0.2]).unwrap()
    }

    // independent closed-form re-derivation of psi
    fn oracle_value(f: &TestFunction, x: &[f64]) -> f64 {
        let c = f.center();
        let r = f.radius();
        let a = f.coeffs();
        let (u0, u1) = ((x[0] - c[0]) / r, (x[1] - c[1]) / r);
        let poly = a[0] + a[1] * u0 + a[2] * u1 + a[3] * u0.powi(2) + a[4] * u1.powi(2);
        f.scale() * poly * (-(u0 * u0 + u1 * u1)).exp()
    }

    #[test]
    fn bump_peaks_at_one() {
        let f = TestFunction::bump(vec![1.0, 2.0, 3.0], 0.5).unwrap();
        assert_eq!(f.eval_function(&[1.0, 2.0, 3.0]).unwrap(), 1.0);
    }

    #[test]
    fn far_field_tails_vanish() {
        let f = sample_function();
        let far = [0.3 + 10.0 * 0.7, -0.2];
        assert!(f.eval_function(&far).unwrap().abs() <= 1e-20);
        let g = f.eval_gradient(&far).unwrap();
        assert!(crate::numeric::norm(&g) <= 1e-18);
    }

    #[test]
    fn matches_closed_form() {
        let f = sample_function();
        for x in [[0.0, 0.0], [1.0, -1.0], [0.3, 0.5], [-0.7, 0.1]] {
            let v = f.eval_function(&x).unwrap();
            assert!((v - oracle_value(&f, &x)).abs() <= 1e-15);
        }
    }

    #[test]
    fn gradient_vanishes_at_center_of_radial_bump() {
        let f = TestFunction::bump(vec![0.5, -0.5], 0.3).unwrap();
        let g = f.eval_gradient(&[0.5, -0.5]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_agrees_with_central_differences() {
        let f = sample_function();
        let h = 1e-5;
        for x in [[0.1, 0.2], [0.9, -0.4], [-0.5, 0.6]] {
            let g = f.eval_gradient(&x).unwrap();
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
                assert!((g[k] - fd).abs() <= 1e-8, "k={k} g={} fd={fd}", g[k]);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = sample_function();
        assert!(matches!(f.eval_function(&[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(f.eval_gradient(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn normalized_function_is_bounded() {
        let f = sample_function();
        let sup = maximize(&[-3.0, -3.0], &[3.0, 3.0], |x| f.value(x).abs());
        assert!(sup <= 1.0 / NORMALIZATION_SAFETY + 1e-9);
    }

    #[test]
    fn empty_box_is_rejected() {
        assert!(BoundingBox::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        let bx = BoundingBox { lo: vec![1.0], hi: vec![0.0] };
        assert!(make_panel(1, 1, 1, &bx).is_err());
    }

    #[test]
    fn panel_is_deterministic_and_sized() {
        let bx = BoundingBox::cube(2, 1.5).unwrap();
        let a = make_panel(1, 5, 3, &bx).unwrap();
        let b = make_panel(1, 5, 3, &bx).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fields.len(), 5);
        assert_eq!(a.functions.len(), 3);
        let c = make_panel(2, 5, 3, &bx).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn directional_field_has_unit_peak() {
        let phi = TestField::directional(&[0.6, 0.8], vec![0.0, 0.0], 1.0).unwrap();
        let v = phi.eval_field(&[0.0, 0.0]).unwrap();
        assert_eq!(v, vec![0.6, 0.8]);
        assert_eq!(phi.sup_norm(), 1.0);
    }
}
