//! Fixed-step RK4 flow of a bounded drift field, recorded as uniform-time
//! curves, and a Monte Carlo check that the flow leaves the mollified mass
//! distribution invariant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::Curve;
use crate::error::{check_dim, Error, Result};
use crate::fields::{ScalarField, TestFunction, VectorField};
use crate::mollifier::MollifiedCharge;
use crate::numeric::{all_finite, mean_and_stderr};

/// Above this many steps the recorder starts striding.
pub const MAX_DEFAULT_SAMPLES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub ell: f64,
    pub step: f64,
    pub record_count: usize,
}

impl FlowConfig {
    pub fn new(ell: f64, step: f64, record_count: usize) -> Result<Self> {
        let cfg = Self { ell, step, record_count };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Records every step up to 1024 samples, then the smallest stride that
    /// divides the step count.
    pub fn with_default_record(ell: f64, step: f64) -> Result<Self> {
        let n = Self::step_count(ell, step)?;
        let record_count = if n < MAX_DEFAULT_SAMPLES {
            n + 1
        } else {
            let min_stride = n.div_ceil(MAX_DEFAULT_SAMPLES - 1);
            let stride = (min_stride..=n).find(|s| n % s == 0).unwrap_or(n);
            n / stride + 1
        };
        Self::new(ell, step, record_count)
    }

    fn step_count(ell: f64, step: f64) -> Result<usize> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::invalid("ell must be positive and finite"));
        }
        if !(step > 0.0 && step <= ell) {
            return Err(Error::invalid("step must be in (0, ell]"));
        }
        let ratio = ell / step;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::invalid(format!("ell / step = {ratio} is not an integer")));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let n = Self::step_count(self.ell, self.step)?;
        if self.record_count < 2 {
            return Err(Error::invalid("record_count must be at least 2"));
        }
        if n % (self.record_count - 1) != 0 {
            return Err(Error::invalid(format!(
                "record_count - 1 = {} does not divide the {n} steps",
                self.record_count - 1
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        Self::step_count(self.ell, self.step).expect("validated")
    }

    /// Step actually taken: `ell / steps`, so record times are exact.
    pub fn effective_step(&self) -> f64 {
        self.ell / self.steps() as f64
    }

    pub fn stride(&self) -> usize {
        self.steps() / (self.record_count - 1)
    }
}

/// One classical RK4 step, in place. `k` holds four scratch vectors.
#[inline]
fn rk4_step<F: VectorField + ?Sized>(drift: &F, x: &mut [f64], h: f64, k: &mut [Vec<f64>; 5]) -> Result<()> {
    let d = x.len();
    let [k1, k2, k3, k4, tmp] = k;
    drift.eval_into(x, k1);
    for j in 0..d {
        tmp[j] = x[j] + 0.5 * h * k1[j];
    }
    drift.eval_into(tmp, k2);
    for j in 0..d {
        tmp[j] = x[j] + 0.5 * h * k2[j];
    }
    drift.eval_into(tmp, k3);
    for j in 0..d {
        tmp[j] = x[j] + h * k3[j];
    }
    drift.eval_into(tmp, k4);
    if !(all_finite(k1) && all_finite(k2) && all_finite(k3) && all_finite(k4)) {
        return Err(Error::NonFinite("drift evaluation"));
    }
    for j in 0..d {
        x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    Ok(())
}

fn scratch(dim: usize) -> [Vec<f64>; 5] {
    std::array::from_fn(|_| vec![0.0; dim])
}

/// `t -> u(t, x0)` on `[0, ell]`, sampled at the configured record times.
pub fn integrate<F: VectorField + ?Sized>(drift: &F, x0: &[f64], cfg: &FlowConfig) -> Result<Curve> {
    check_dim(drift.dim(), x0.len())?;
    cfg.validate()?;
    let dim = x0.len();
    let h = cfg.effective_step();
    let stride = cfg.stride();
    let mut x = x0.to_vec();
    let mut k = scratch(dim);
    let mut points = Vec::with_capacity(cfg.record_count * dim);
    points.extend_from_slice(&x);
    for _ in 1..cfg.record_count {
        for _ in 0..stride {
            rk4_step(drift, &mut x, h, &mut k)?;
        }
        points.extend_from_slice(&x);
    }
    Curve::new(cfg.ell, dim, points)
}

/// Integrates every start point; output order matches input order.
pub fn integrate_batch<F: VectorField + ?Sized>(drift: &F, starts: &[Vec<f64>], cfg: &FlowConfig) -> Result<Vec<Curve>> {
    starts.par_iter().map(|x0| integrate(drift, x0, cfg)).collect()
}

/// `u(t, x0)` with steps of at most `step` (a final partial step reaches `t`).
pub fn flow_point<F: VectorField + ?Sized>(drift: &F, x0: &[f64], t: f64, step: f64) -> Result<Vec<f64>> {
    check_dim(drift.dim(), x0.len())?;
    let mut x = x0.to_vec();
    let mut k = scratch(x0.len());
    advance(drift, &mut x, t, step, &mut k)?;
    Ok(x)
}

fn advance<F: VectorField + ?Sized>(drift: &F, x: &mut [f64], t: f64, step: f64, k: &mut [Vec<f64>; 5]) -> Result<()> {
    if !(t >= 0.0) || !(step > 0.0) {
        return Err(Error::invalid("flow time must be >= 0 and step > 0"));
    }
    let full = (t / step * (1.0 + 1e-12)).floor() as usize;
    for _ in 0..full {
        rk4_step(drift, x, step, k)?;
    }
    let rest = t - full as f64 * step;
    if rest > 1e-12 * step {
        rk4_step(drift, x, rest, k)?;
    }
    Ok(())
}

/// `|E psi(u(t, X)) - E psi(X)|` estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleStat {
    pub time: f64,
    pub discrepancy: f64,
    pub std_error: f64,
}

/// Liouville diagnostic for one test function and one time.
pub fn liouville_discrepancy(
    drift: &MollifiedCharge,
    seed: u64,
    n_samples: usize,
    psi: &TestFunction,
    t: f64,
    cfg: &FlowConfig,
) -> Result<LiouvilleStat> {
    let table = liouville_scan(drift, seed, n_samples, std::slice::from_ref(psi), &[t], cfg)?;
    Ok(table[0][0])
}

/// Liouville diagnostic over several functions and times sharing one set of
/// flowed samples. Result is indexed `[function][time]`.
///
/// Samples `x_j ~ rho_eps / Var` are flowed once; for each time the paired
/// differences `psi(u(t, x_j)) - psi(x_j)` give the estimate and its error.
pub fn liouville_scan(
    drift: &MollifiedCharge,
    seed: u64,
    n_samples: usize,
    psis: &[TestFunction],
    times: &[f64],
    cfg: &FlowConfig,
) -> Result<Vec<Vec<LiouvilleStat>>> {
    cfg.validate()?;
    let dim = drift.source().dim();
    for psi in psis {
        check_dim(dim, psi.dim())?;
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|a, b| times[*a].total_cmp(&times[*b]));
    for &t in times {
        if !(0.0..=cfg.ell).contains(&t) {
            return Err(Error::invalid(format!("time {t} outside [0, ell]")));
        }
    }
    let h = cfg.effective_step();
    let starts = drift.sample_rho(seed, n_samples)?;

    // positions[j][time index]
    let positions: Vec<Vec<Vec<f64>>> = starts
        .par_iter()
        .map(|x0| {
            let mut k = scratch(dim);
            let mut x = x0.clone();
            let mut now = 0.0;
            let mut out = vec![Vec::new(); times.len()];
            for &ti in &order {
                advance(drift, &mut x, times[ti] - now, h, &mut k)?;
                now = times[ti];
                out[ti] = x.clone();
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    Ok(psis
        .iter()
        .map(|psi| {
            let base: Vec<f64> = starts.iter().map(|x| psi.value(x)).collect();
            times
                .iter()
                .enumerate()
                .map(|(ti, &t)| {
                    let diffs: Vec<f64> = positions
                        .iter()
                        .zip(&base)
                        .map(|(p, b)| psi.value(&p[ti]) - b)
                        .collect();
                    let (mean, se) = mean_and_stderr(&diffs);
                    LiouvilleStat {
                        time: t,
                        discrepancy: mean.abs(),
                        std_error: se,
                    }
                })
                .collect()
        })
        .collect())
}
