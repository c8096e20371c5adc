//! Gaussian mollification of atomic charges.
//!
//! With `g_eps` the centered Gaussian density of width `eps`, the mollified
//! charge exposes
//!
//! ```text
//! density r(x) = sum_i |w_i| g_eps(x - x_i)          (of rho = r dx)
//! drift   phi(x) = sum_i w_i g_eps(x - x_i) / r(x)   (|phi| <= 1)
//! ```
//!
//! Both sums are evaluated relative to the nearest atom (the common factor
//! `exp(-min_i |x - x_i|^2 / 2 eps^2)` cancels in the drift), so the drift
//! stays well defined far from every atom where the raw terms underflow.
//! Terms more than `exp(-50)` below the leading one are skipped; they cannot
//! change a double-precision sum. In dimensions up to 4 the atoms are bucketed
//! in a uniform grid so that only nearby cells are visited.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::charge::AtomicCharge;
use crate::error::{check_dim, Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::numeric::{dot, pairwise_sum};
use crate::quadrature::GaussHermite;

/// Default Gauss–Hermite nodes per axis.
pub const DEFAULT_QUADRATURE_ORDER: usize = 20;

const EXPONENT_CUTOFF: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct MollifiedCharge {
    source: AtomicCharge,
    epsilon: f64,
    dim: usize,
    positions: Vec<f64>,
    weights: Vec<f64>,
    masses: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
    inv_two_eps2: f64,
    grid: Option<CellGrid>,
}

impl MollifiedCharge {
    pub fn new(source: AtomicCharge, epsilon: f64) -> Result<Self> {
        if source.is_empty() {
            return Err(Error::EmptyCharge);
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive and finite"));
        }
        let dim = source.dim();
        let mut positions = Vec::with_capacity(dim * source.len());
        let mut weights = Vec::with_capacity(dim * source.len());
        let mut masses = Vec::with_capacity(source.len());
        for a in source.atoms() {
            positions.extend_from_slice(&a.position);
            weights.extend_from_slice(&a.weight);
            masses.push(a.mass());
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut run = 0.0;
        for m in &masses {
            run += m;
            cumulative.push(run);
        }
        let total = source.total_variation();
        let cutoff_radius = (EXPONENT_CUTOFF * 2.0).sqrt() * epsilon;
        let grid = CellGrid::build(dim, &positions, &weights, &masses, 0.5 * cutoff_radius);
        Ok(Self {
            source,
            epsilon,
            dim,
            positions,
            weights,
            masses,
            cumulative,
            total,
            inv_two_eps2: 1.0 / (2.0 * epsilon * epsilon),
            grid,
        })
    }

    pub fn source(&self) -> &AtomicCharge {
        &self.source
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn total_variation(&self) -> f64 {
        self.total
    }

    /// `phi_eps(x)`; never exceeds 1 in norm.
    pub fn drift_eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        self.drift_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked drift evaluation into `out`.
    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        let (den, _) = self.shifted_sums(x, out);
        for o in out.iter_mut() {
            *o /= den;
        }
    }

    /// `r_eps(x)`. Underflows to zero only far outside the support.
    pub fn density_eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density_eval(x)?.exp())
    }

    pub fn log_density_eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let mut scratch = vec![0.0; self.dim];
        let (den, dmin) = self.shifted_sums(x, &mut scratch);
        let n = self.dim as f64;
        let log_norm = -0.5 * n * (2.0 * std::f64::consts::PI).ln() - n * self.epsilon.ln();
        Ok(log_norm - dmin * self.inv_two_eps2 + den.ln())
    }

    /// `n` i.i.d. exact samples of `rho_eps / Var`.
    pub fn sample_rho(&self, seed: u64, n: usize) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        Ok((0..n)
            .into_par_iter()
            .map(|i| self.sample_with_atom(seed, i as u64).1)
            .collect())
    }

    /// Sample number `index` of the stream for `seed`, with the index of the
    /// atom whose Gaussian it came from. Each index has its own ChaCha stream.
    pub fn sample_with_atom(&self, seed: u64, index: u64) -> (usize, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let u: f64 = rng.random::<f64>() * self.total;
        let atom = self.cumulative.partition_point(|c| *c <= u).min(self.masses.len() - 1);
        let base = &self.positions[atom * self.dim..(atom + 1) * self.dim];
        let x = base
            .iter()
            .map(|p| {
                let z: f64 = rng.sample(StandardNormal);
                p + self.epsilon * z
            })
            .collect();
        (atom, x)
    }

    /// `<mu * k_eps, phi> = sum_i <w_i, (k_eps * phi)(x_i)>` by per-atom
    /// Gauss–Hermite quadrature.
    pub fn smoothed_action<F: VectorField + ?Sized>(&self, phi: &F) -> Result<f64> {
        self.smoothed_action_with_order(phi, DEFAULT_QUADRATURE_ORDER)
    }

    pub fn smoothed_action_with_order<F: VectorField + ?Sized>(&self, phi: &F, order: usize) -> Result<f64> {
        check_dim(self.dim, phi.dim())?;
        let gh = GaussHermite::new(order)?;
        let terms = self
            .source
            .atoms()
            .par_iter()
            .map(|a| {
                let mut buf = vec![0.0; self.dim];
                gh.gaussian_expectation(&a.position, self.epsilon, |x| {
                    phi.eval_into(x, &mut buf);
                    dot(&a.weight, &buf)
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(pairwise_sum(&terms))
    }

    /// `int psi d rho_eps = sum_i |w_i| E[psi(x_i + eps Z)]`.
    pub fn smoothed_integral<S: ScalarField + ?Sized>(&self, psi: &S) -> Result<f64> {
        check_dim(self.dim, psi.dim())?;
        let gh = GaussHermite::new(DEFAULT_QUADRATURE_ORDER)?;
        let terms = self
            .source
            .atoms()
            .par_iter()
            .map(|a| Ok(a.mass() * gh.gaussian_expectation(&a.position, self.epsilon, |x| psi.value(x))?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(pairwise_sum(&terms))
    }

    /// Writes `sum_i w_i e_i` into `num` and returns `(sum_i |w_i| e_i, min_d2)`
    /// with `e_i = exp(-(|x - x_i|^2 - min_d2) / 2 eps^2)`.
    #[inline]
    fn shifted_sums(&self, x: &[f64], num: &mut [f64]) -> (f64, f64) {
        match self.dim {
            1 => self.sums_fixed::<1>(x, num),
            2 => self.sums_fixed::<2>(x, num),
            3 => self.sums_fixed::<3>(x, num),
            4 => self.sums_fixed::<4>(x, num),
            _ => self.sums_dyn(x, num),
        }
    }

    #[inline]
    fn sums_fixed<const D: usize>(&self, x: &[f64], num: &mut [f64]) -> (f64, f64) {
        let mut xd = [0.0; D];
        xd.copy_from_slice(&x[..D]);
        if let Some(g) = &self.grid {
            if let Some(r) = g.sums::<D>(&xd, EXPONENT_CUTOFF / self.inv_two_eps2, self.inv_two_eps2, num) {
                return r;
            }
        }
        let mut dmin = f64::INFINITY;
        for p in self.positions.chunks_exact(D) {
            let mut d2 = 0.0;
            for k in 0..D {
                let t = p[k] - xd[k];
                d2 += t * t;
            }
            if d2 < dmin {
                dmin = d2;
            }
        }
        let limit = dmin + EXPONENT_CUTOFF / self.inv_two_eps2;
        let mut acc = [0.0; D];
        let mut den = 0.0;
        for ((p, w), m) in self
            .positions
            .chunks_exact(D)
            .zip(self.weights.chunks_exact(D))
            .zip(&self.masses)
        {
            let mut d2 = 0.0;
            for k in 0..D {
                let t = p[k] - xd[k];
                d2 += t * t;
            }
            if d2 <= limit {
                let e = (-(d2 - dmin) * self.inv_two_eps2).exp();
                den += m * e;
                for k in 0..D {
                    acc[k] += w[k] * e;
                }
            }
        }
        num[..D].copy_from_slice(&acc);
        (den, dmin)
    }

    fn sums_dyn(&self, x: &[f64], num: &mut [f64]) -> (f64, f64) {
        let d = self.dim;
        let dmin = self
            .positions
            .chunks_exact(d)
            .map(|p| crate::numeric::dist2(p, x))
            .fold(f64::INFINITY, f64::min);
        let limit = dmin + EXPONENT_CUTOFF / self.inv_two_eps2;
        num[..d].iter_mut().for_each(|v| *v = 0.0);
        let mut den = 0.0;
        for ((p, w), m) in self.positions.chunks_exact(d).zip(self.weights.chunks_exact(d)).zip(&self.masses) {
            let d2 = crate::numeric::dist2(p, x);
            if d2 <= limit {
                let e = (-(d2 - dmin) * self.inv_two_eps2).exp();
                den += m * e;
                for k in 0..d {
                    num[k] += w[k] * e;
                }
            }
        }
        (den, dmin)
    }
}

/// Cell-sorted copy of the atoms. Cells are row-major with the last axis
/// fastest, so a box of cells is a set of contiguous atom runs.
#[derive(Debug, Clone)]
struct CellGrid {
    lo: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    starts: Vec<usize>,
    positions: Vec<f64>,
    weights: Vec<f64>,
    masses: Vec<f64>,
}

const GRID_MIN_ATOMS: usize = 32;
const GRID_MAX_DIM: usize = 4;

impl CellGrid {
    fn build(dim: usize, positions: &[f64], weights: &[f64], masses: &[f64], cell: f64) -> Option<Self> {
        let n = masses.len();
        if n < GRID_MIN_ATOMS || dim > GRID_MAX_DIM {
            return None;
        }
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in positions.chunks_exact(dim) {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let cap = (8 * n).max(4096) as f64;
        let mut cell = cell;
        let shape = loop {
            let shape: Vec<usize> = (0..dim).map(|k| ((hi[k] - lo[k]) / cell).floor() as usize + 1).collect();
            let cells = shape.iter().map(|&s| s as f64).product::<f64>();
            if cells <= cap {
                break shape;
            }
            cell *= (cells / cap).powf(1.0 / dim as f64).max(1.01);
        };
        let cells: usize = shape.iter().product();
        let index_of = |p: &[f64]| {
            let mut idx = 0;
            for k in 0..dim {
                let c = (((p[k] - lo[k]) / cell).floor() as usize).min(shape[k] - 1);
                idx = idx * shape[k] + c;
            }
            idx
        };
        let keys: Vec<usize> = positions.chunks_exact(dim).map(index_of).collect();
        let mut starts = vec![0usize; cells + 1];
        for &c in &keys {
            starts[c + 1] += 1;
        }
        for c in 0..cells {
            starts[c + 1] += starts[c];
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| keys[i]);
        let gather = |src: &[f64], w: usize| order.iter().flat_map(|&i| src[i * w..(i + 1) * w].iter().copied()).collect();
        Some(Self {
            positions: gather(positions, dim),
            weights: gather(weights, dim),
            masses: gather(masses, 1),
            lo,
            cell,
            shape,
            starts,
        })
    }

    /// Calls `f` with each contiguous atom run inside the cell box `[a, b]`.
    #[inline]
    fn for_each_run<const D: usize>(&self, a: [i64; D], b: [i64; D], mut f: impl FnMut(std::ops::Range<usize>)) {
        let mut lo = [0usize; D];
        let mut hi = [0usize; D];
        for k in 0..D {
            let top = self.shape[k] as i64 - 1;
            let (l, h) = (a[k].max(0), b[k].min(top));
            if l > h {
                return;
            }
            lo[k] = l as usize;
            hi[k] = h as usize;
        }
        let mut idx = lo;
        loop {
            let mut base = 0;
            for k in 0..D - 1 {
                base = base * self.shape[k] + idx[k];
            }
            base *= self.shape[D - 1];
            f(self.starts[base + lo[D - 1]]..self.starts[base + hi[D - 1] + 1]);
            // odometer over all axes but the last
            let mut k = D - 1;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if idx[k] < hi[k] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = lo[k];
            }
        }
    }

    /// Same sums as the brute-force pass, or `None` when the nearest atom is
    /// not certainly within the neighbouring cells.
    #[inline]
    fn sums<const D: usize>(&self, x: &[f64; D], cutoff: f64, inv_two_eps2: f64, num: &mut [f64]) -> Option<(f64, f64)> {
        let mut c = [0i64; D];
        let mut gap = f64::INFINITY;
        for k in 0..D {
            let u = (x[k] - self.lo[k]) / self.cell;
            if !u.is_finite() || u.abs() > 1e15 {
                return None;
            }
            c[k] = u.floor() as i64;
            let off = (u - c[k] as f64) * self.cell;
            gap = gap.min(self.cell + off).min(2.0 * self.cell - off);
        }
        let dist = |i: usize| {
            let p = &self.positions[i * D..(i + 1) * D];
            let mut d2 = 0.0;
            for k in 0..D {
                let t = p[k] - x[k];
                d2 += t * t;
            }
            d2
        };
        let mut dmin = f64::INFINITY;
        self.for_each_run(c.map(|v| v - 1), c.map(|v| v + 1), |r| {
            for i in r {
                dmin = dmin.min(dist(i));
            }
        });
        if !(dmin <= gap * gap) {
            return None;
        }
        let limit = dmin + cutoff;
        let reach = limit.sqrt();
        let mut a = [0i64; D];
        let mut b = [0i64; D];
        for k in 0..D {
            a[k] = ((x[k] - reach - self.lo[k]) / self.cell).floor() as i64;
            b[k] = ((x[k] + reach - self.lo[k]) / self.cell).floor() as i64;
        }
        let mut acc = [0.0; D];
        let mut den = 0.0;
        self.for_each_run(a, b, |r| {
            for i in r {
                let d2 = dist(i);
                if d2 <= limit {
                    let e = (-(d2 - dmin) * inv_two_eps2).exp();
                    den += self.masses[i] * e;
                    let w = &self.weights[i * D..(i + 1) * D];
                    for k in 0..D {
                        acc[k] += w[k] * e;
                    }
                }
            }
        });
        num[..D].copy_from_slice(&acc);
        Some((den, dmin))
    }
}

impl VectorField for MollifiedCharge {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.drift_into(x, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charge::Atom;
    use crate::fields::{TestField, TestFunction};
    use crate::numeric::norm;

    fn charge(atoms: &[(Vec<f64>, Vec<f64>)]) -> AtomicCharge {
        let dim = atoms[0].0.len();
        AtomicCharge::new(dim, atoms.iter().map(|(x, w)| Atom::new(x.clone(), w.clone())).collect()).unwrap()
    }

    fn polygon_loop(m: usize) -> AtomicCharge {
        let atoms = (0..m)
            .map(|k| {
                let a0 = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                let a1 = 2.0 * std::f64::consts::PI * (k + 1) as f64 / m as f64;
                let (p, q) = ([a0.cos(), a0.sin()], [a1.cos(), a1.sin()]);
                Atom::new(
                    vec![0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])],
                    vec![q[0] - p[0], q[1] - p[1]],
                )
            })
            .collect();
        AtomicCharge::new(2, atoms).unwrap()
    }

    #[test]
    fn empty_source_and_bad_eps_rejected() {
        assert!(matches!(MollifiedCharge::new(AtomicCharge::empty(2), 0.1), Err(Error::EmptyCharge)));
        let mu = charge(&[(vec![0.0], vec![1.0])]);
        assert!(MollifiedCharge::new(mu, 0.0).is_err());
    }

    #[test]
    fn single_atom_drift_is_its_direction() {
        let mc = MollifiedCharge::new(charge(&[(vec![0.2, 0.1], vec![3.0, -4.0])]), 0.05).unwrap();
        for x in [[0.2, 0.1], [5.0, -3.0], [1e3, 1e3]] {
            let d = mc.drift_eval(&x).unwrap();
            assert!((d[0] - 0.6).abs() < 1e-12 && (d[1] + 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_cancellation_gives_zero_drift() {
        let mc = MollifiedCharge::new(
            charge(&[(vec![-1.0, 0.0], vec![0.0, 1.0]), (vec![1.0, 0.0], vec![0.0, -1.0])]),
            0.3,
        )
        .unwrap();
        assert_eq!(mc.drift_eval(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(mc.drift_eval(&[0.0, 7.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn drift_far_from_atoms_follows_nearest() {
        let mc = MollifiedCharge::new(
            charge(&[(vec![0.0, 0.0], vec![1.0, 0.0]), (vec![1.0, 0.0], vec![0.0, 1.0])]),
            0.01,
        )
        .unwrap();
        let d = mc.drift_eval(&[100.0, 0.0]).unwrap();
        assert!((d[0]).abs() < 1e-12 && (d[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loop_drift_is_tangent_on_circle() {
        let coarse = MollifiedCharge::new(polygon_loop(256), 0.1).unwrap();
        let dense = MollifiedCharge::new(polygon_loop(2560), 0.1).unwrap();
        for k in 0..16 {
            let a = 0.39 * k as f64;
            let x = [a.cos(), a.sin()];
            let tangent = [-a.sin(), a.cos()];
            let d = coarse.drift_eval(&x).unwrap();
            let dd = dense.drift_eval(&x).unwrap();
            let dev = norm(&[d[0] - tangent[0], d[1] - tangent[1]]);
            assert!(dev < 0.05, "angle {a}: {d:?}");
            assert!(norm(&[d[0] - dd[0], d[1] - dd[1]]) < 0.05);
        }
    }

    #[test]
    fn density_peak_and_linearity() {
        let eps = 0.2;
        let mc = MollifiedCharge::new(charge(&[(vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0])]), eps).unwrap();
        let peak = (2.0 * std::f64::consts::PI).powf(-1.5) * eps.powi(-3);
        assert!((mc.density_eval(&[0.0; 3]).unwrap() - peak).abs() < 1e-12 * peak);

        let one = MollifiedCharge::new(charge(&[(vec![-1.0, 0.0], vec![0.0, 1.0])]), eps).unwrap();
        let two = MollifiedCharge::new(
            charge(&[(vec![-1.0, 0.0], vec![0.0, 1.0]), (vec![1.0, 0.0], vec![1.0, 0.0])]),
            eps,
        )
        .unwrap();
        let x = [0.0, 0.3];
        let r1 = one.density_eval(&x).unwrap();
        let r2 = two.density_eval(&x).unwrap();
        assert!((r2 - 2.0 * r1).abs() < 1e-13 * r2);
    }

    #[test]
    fn smoothed_action_limits() {
        let mu = charge(&[(vec![0.1, -0.2], vec![2.0, 1.0])]);
        let mc = MollifiedCharge::new(mu, 1e-3).unwrap();
        assert_eq!(mc.smoothed_action(&TestField::zero(2).unwrap()).unwrap(), 0.0);
        // field ~ constant (0.6, 0.8) on the 10 eps ball
        let phi = TestField::directional(&[0.6, 0.8], vec![0.1, -0.2], 100.0).unwrap();
        let v = mc.smoothed_action(&phi).unwrap();
        assert!((v - 2.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn smoothed_action_rejects_high_dimension() {
        let mu = charge(&[(vec![0.0; 5], vec![1.0, 0.0, 0.0, 0.0, 0.0])]);
        let mc = MollifiedCharge::new(mu, 0.1).unwrap();
        let phi = TestField::directional(&[1.0, 0.0, 0.0, 0.0, 0.0], vec![0.0; 5], 1.0).unwrap();
        assert!(matches!(mc.smoothed_action(&phi), Err(Error::QuadratureDimension { .. })));
    }

    #[test]
    fn smoothed_integral_of_bump_against_gaussian() {
        // E[exp(-|c + eps Z|^2 / r^2)] in 1-D has a closed form
        let (c, eps, r) = (0.3f64, 0.2f64, 0.5f64);
        let mc = MollifiedCharge::new(charge(&[(vec![c], vec![-2.0])]), eps).unwrap();
        let psi = TestFunction::bump(vec![0.0], r).unwrap();
        let s2 = r * r / 2.0 + eps * eps;
        let exact = 2.0 * (r * r / 2.0 / s2).sqrt() * (-c * c / (2.0 * s2)).exp();
        let got = mc.smoothed_integral(&psi).unwrap();
        assert!((got - exact).abs() < 1e-13, "{got} vs {exact}");
    }

    #[test]
    fn sampling_is_deterministic_and_picks_by_mass() {
        let mc = MollifiedCharge::new(
            charge(&[(vec![0.0], vec![1.0]), (vec![10.0], vec![-3.0])]),
            0.1,
        )
        .unwrap();
        assert_eq!(mc.sample_rho(9, 100).unwrap(), mc.sample_rho(9, 100).unwrap());
        let n = 20_000;
        let first = (0..n).filter(|&i| mc.sample_with_atom(4, i).0 == 0).count();
        let freq = first as f64 / n as f64;
        assert!((freq - 0.25).abs() <= 4.0 * (0.25f64 * 0.75 / n as f64).sqrt(), "{freq}");
        assert!(mc.sample_rho(1, 0).is_err());
    }

    #[test]
    fn single_atom_sample_mean() {
        let eps = 0.5;
        let mc = MollifiedCharge::new(charge(&[(vec![1.0, -2.0], vec![0.0, 1.0])]), eps).unwrap();
        let n = 10_000;
        let s = mc.sample_rho(11, n).unwrap();
        for k in 0..2 {
            let mean: f64 = s.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            let target = [1.0, -2.0][k];
            assert!((mean - target).abs() <= 4.0 * eps / (n as f64).sqrt());
        }
    }

    #[test]
    fn grid_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in 1..=4 {
            let atoms: Vec<(Vec<f64>, Vec<f64>)> = (0..200)
                .map(|_| {
                    let x = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                    let w = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
                    (x, w)
                })
                .collect();
            let gridded = MollifiedCharge::new(charge(&atoms), 0.03).unwrap();
            assert!(gridded.grid.is_some());
            let mut brute = gridded.clone();
            brute.grid = None;
            for _ in 0..500 {
                let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
                let (a, b) = (gridded.drift_eval(&x).unwrap(), brute.drift_eval(&x).unwrap());
                for k in 0..dim {
                    assert!((a[k] - b[k]).abs() <= 1e-13, "dim {dim}: {a:?} vs {b:?}");
                }
                let (la, lb) = (gridded.log_density_eval(&x).unwrap(), brute.log_density_eval(&x).unwrap());
                assert!((la - lb).abs() <= 1e-12 * lb.abs().max(1.0));
            }
        }
    }
}
