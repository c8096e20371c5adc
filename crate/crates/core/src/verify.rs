//! The acceptance suite: twelve numbered criteria, each producing one or more
//! checks with the measured value, its bound and a pass flag.
//!
//! A report is plain JSON. Everything time dependent lives under the single
//! top-level `"timestamp"` key, which [`comparable`] strips, so two reports
//! from the same configuration compare equal.

use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::charge::{AtomicCharge, ScalarAtomicMeasure};
use crate::curves::{Curve, CurveEnsemble};
use crate::decompose::{decompose_with_report, mollification_gaps, DecomposeParams, DecompositionReport};
use crate::error::{Error, Result};
use crate::fields::{make_panel, BoundingBox, FieldPanel, FnField, GradientField, TestField};
use crate::flow::{flow_point, liouville_scan, FlowConfig};
use crate::lift::{build_lift, decompose_with_divergence, lifted_panel, verify_lift_divergence, DivergencePair, LiftParams, LiftReport};
use crate::mollifier::MollifiedCharge;
use crate::numeric::{dist2, norm};
use crate::scenario::{Scenario, ScenarioKind};
use crate::threads::with_threads;

pub const CRITERIA: [(u32, &str); 12] = [
    (1, "curve divergence identity"),
    (2, "drift bound and exactness"),
    (3, "mass budget"),
    (4, "flow decomposition reconstruction"),
    (5, "mollification refinement"),
    (6, "Liouville invariance"),
    (7, "endpoint identity"),
    (8, "length and variation budget"),
    (9, "lift divergence"),
    (10, "lift reconstruction"),
    (11, "vertical speed"),
    (12, "determinism"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Multiplies every upper bound; 0 makes the suite fail by construction.
    pub tolerance_scale: f64,
    /// Criteria to run; empty means all.
    pub only: Vec<u32>,
    pub loop_atoms: usize,
    pub segment_atoms: usize,
    pub ell: f64,
    pub epsilon: f64,
    pub step: f64,
    pub n_curves: usize,
    pub panel_fields: usize,
    pub panel_functions: usize,
    pub polylines: usize,
    pub polyline_samples: usize,
    pub drift_probes: usize,
    pub refinement_schedule: Vec<f64>,
    pub liouville_samples: usize,
    pub liouville_step: f64,
    pub liouville_times: Vec<f64>,
    pub lift_step: f64,
    pub lift_curves: usize,
    pub column_atoms: usize,
    pub slab_width: f64,
    pub determinism_curves: usize,
    pub determinism_threads: Vec<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            tolerance_scale: 1.0,
            only: Vec::new(),
            loop_atoms: 512,
            segment_atoms: 64,
            ell: 1.0,
            epsilon: 0.05,
            step: 1e-3,
            n_curves: 20_000,
            panel_fields: 10,
            panel_functions: 10,
            polylines: 50,
            polyline_samples: 4096,
            drift_probes: 10_000,
            refinement_schedule: vec![0.4, 0.2, 0.1, 0.05],
            liouville_samples: 100_000,
            liouville_step: 0.01,
            liouville_times: vec![0.5, 1.0],
            lift_step: 5e-3,
            lift_curves: 20_000,
            column_atoms: 64,
            slab_width: 0.1,
            determinism_curves: 400,
            determinism_threads: vec![1, 4],
        }
    }
}

impl VerifyConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn wants(&self, id: u32) -> bool {
        self.only.is_empty() || self.only.contains(&id)
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance_scale >= 0.0 && self.tolerance_scale.is_finite()) {
            return Err(Error::invalid("tolerance_scale must be finite and >= 0"));
        }
        if let Some(bad) = self.only.iter().find(|id| !(1..=12).contains(*id)) {
            return Err(Error::invalid(format!("no criterion {bad}")));
        }
        if self.refinement_schedule.len() < 2 {
            return Err(Error::invalid("refinement schedule needs two widths"));
        }
        if self.determinism_threads.is_empty() {
            return Err(Error::invalid("determinism_threads is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: u32,
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Set when the criterion could not be evaluated at all.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamp {
    pub unix_seconds: u64,
    /// Wall-clock seconds per criterion.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub passed: bool,
    pub failing: Vec<String>,
    pub criteria: Vec<CriterionResult>,
    pub timestamp: Timestamp,
}

impl VerifyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// 0 if every selected criterion passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    /// One line per criterion.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            let secs = self.timestamp.timings.get(&c.id.to_string()).copied().unwrap_or(0.0);
            let status = if c.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!("{status} {:>2} {:<34} {:>8.1}s", c.id, c.name, secs));
            if let Some(e) = &c.error {
                s.push_str(&format!("  error: {e}"));
            } else if let Some(worst) = c.checks.iter().find(|k| !k.passed) {
                s.push_str(&format!(
                    "  {}: {:.3e} {} {:.3e}",
                    worst.name,
                    worst.measured,
                    if worst.relation == Relation::AtMost { "<=" } else { ">=" },
                    worst.bound
                ));
            }
            s.push('\n');
        }
        s
    }
}

struct Checks<'a> {
    id: u32,
    scale: f64,
    out: &'a mut Vec<Check>,
}

impl Checks<'_> {
    fn at_most(&mut self, name: impl Into<String>, measured: f64, bound: f64) {
        let bound = bound * self.scale;
        self.out.push(Check {
            criterion: self.id,
            name: name.into(),
            measured,
            relation: Relation::AtMost,
            bound,
            passed: measured <= bound,
        });
    }

    fn at_least(&mut self, name: impl Into<String>, measured: f64, bound: f64) {
        self.out.push(Check {
            criterion: self.id,
            name: name.into(),
            measured,
            relation: Relation::AtLeast,
            bound,
            passed: measured >= bound,
        });
    }
}

/// Shared, lazily computed runs.
struct Context<'a> {
    cfg: &'a VerifyConfig,
    loop_charge: AtomicCharge,
    loop_panel: FieldPanel,
    loop_run: Option<(CurveEnsemble, DecompositionReport)>,
    segment: (AtomicCharge, ScalarAtomicMeasure),
    segment_panel: FieldPanel,
    lift_runs: Option<(LiftReport, LiftReport)>,
    mass_records: Vec<(String, f64)>,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a VerifyConfig) -> Result<Self> {
        let (loop_charge, _) = Scenario::loop_charge(cfg.loop_atoms, 1.0).with_seed(cfg.seed).generate()?;
        let loop_panel = make_panel(cfg.seed, cfg.panel_fields, cfg.panel_functions, &BoundingBox::cube(2, 1.5)?)?;
        let (mu, sigma) = Scenario::segment(cfg.segment_atoms, vec![0.0, 0.0], vec![1.0, 0.0]).generate()?;
        let segment_panel = segment_panel(cfg)?;
        Ok(Self {
            cfg,
            loop_charge,
            loop_panel,
            loop_run: None,
            segment: (mu, sigma.expect("segment carries its divergence")),
            segment_panel,
            lift_runs: None,
            mass_records: Vec::new(),
        })
    }

    fn loop_params(&self) -> Result<DecomposeParams> {
        let c = self.cfg;
        DecomposeParams::new(c.epsilon, c.n_curves, FlowConfig::with_default_record(c.ell, c.step)?, c.seed)
    }

    fn loop_run(&mut self) -> Result<&(CurveEnsemble, DecompositionReport)> {
        if self.loop_run.is_none() {
            let p = self.loop_params()?;
            let run = decompose_with_report(&self.loop_charge, &p, &self.loop_panel)?;
            self.mass_records.push(("loop".into(), run.1.mass.relative_error));
            self.loop_run = Some(run);
        }
        Ok(self.loop_run.as_ref().unwrap())
    }

    fn lift_params(&self) -> Result<LiftParams> {
        let c = self.cfg;
        let inner = DecomposeParams::new(c.epsilon, c.lift_curves, FlowConfig::with_default_record(c.ell, c.lift_step)?, c.seed)?;
        LiftParams::new(c.ell, c.column_atoms, c.slab_width, inner)
    }

    fn lift_runs(&mut self) -> Result<&(LiftReport, LiftReport)> {
        if self.lift_runs.is_none() {
            let p = self.lift_params()?;
            let (mu, sigma) = self.segment.clone();
            let pair = DivergencePair::certify(mu, sigma.clone(), &self.segment_panel)?;
            let seg = decompose_with_divergence(&pair, &p, &self.segment_panel)?.report;
            // mu = 0 with a dipole divergence is not a divergence pair; it is
            // the limit case and runs uncertified on purpose
            let null = DivergencePair::certify(AtomicCharge::empty(2), sigma, &self.segment_panel)?;
            let p_null = LiftParams {
                certification_threshold: f64::INFINITY,
                ..p
            };
            let null = decompose_with_divergence(&null, &p_null, &self.segment_panel)?.report;
            self.mass_records.push(("segment lift".into(), seg.mass.relative_error));
            self.mass_records.push(("null lift".into(), null.mass.relative_error));
            self.lift_runs = Some((seg, null));
        }
        Ok(self.lift_runs.as_ref().unwrap())
    }
}

/// Random fields in the segment's neighbourhood, led by a bump field pointing
/// along the segment.
fn segment_panel(cfg: &VerifyConfig) -> Result<FieldPanel> {
    let bx = BoundingBox::new(vec![-0.5, -0.75], vec![1.5, 0.75])?;
    let mut panel = make_panel(cfg.seed, cfg.panel_fields.saturating_sub(1), cfg.panel_functions.max(1), &bx)?;
    panel.fields.insert(0, TestField::directional(&[1.0, 0.0], vec![0.5, 0.0], 0.5)?);
    Ok(panel)
}

/// Runs the selected criteria and assembles the report.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let mut ctx = Context::new(cfg)?;
    let mut timings = BTreeMap::new();
    let mut results: BTreeMap<u32, CriterionResult> = BTreeMap::new();
    // mass budget last: it audits the runs made by the others
    let order = [1, 2, 4, 5, 6, 7, 8, 9, 10, 11, 12, 3];
    for id in order.into_iter().filter(|id| cfg.wants(*id)) {
        let started = Instant::now();
        let mut checks = Vec::new();
        let mut c = Checks {
            id,
            scale: cfg.tolerance_scale,
            out: &mut checks,
        };
        let outcome = match id {
            1 => criterion_curve_divergence(&ctx, &mut c),
            2 => criterion_drift(&ctx, &mut c),
            3 => criterion_mass(&mut ctx, &mut c),
            4 => criterion_reconstruction(&mut ctx, &mut c),
            5 => criterion_refinement(&ctx, &mut c),
            6 => criterion_liouville(&ctx, &mut c),
            7 => criterion_endpoints(&mut ctx, &mut c),
            8 => criterion_lengths(&mut ctx, &mut c),
            9 => criterion_lift_divergence(&ctx, &mut c),
            10 => criterion_lift_reconstruction(&mut ctx, &mut c),
            11 => criterion_vertical(&mut ctx, &mut c),
            _ => criterion_determinism(cfg, &mut c),
        };
        timings.insert(id.to_string(), started.elapsed().as_secs_f64());
        let error = outcome.err().map(|e| e.to_string());
        let passed = error.is_none() && !checks.is_empty() && checks.iter().all(|k| k.passed);
        results.insert(
            id,
            CriterionResult {
                id,
                name: CRITERIA[id as usize - 1].1.to_string(),
                passed,
                checks,
                error,
            },
        );
    }
    let criteria: Vec<CriterionResult> = results.into_values().collect();
    let failing: Vec<String> = criteria
        .iter()
        .filter(|c| !c.passed)
        .flat_map(|c| {
            let mut names: Vec<String> = c.checks.iter().filter(|k| !k.passed).map(|k| format!("{}: {}", c.id, k.name)).collect();
            if let Some(e) = &c.error {
                names.push(format!("{}: {e}", c.id));
            }
            names
        })
        .collect();
    Ok(VerifyReport {
        config: cfg.clone(),
        passed: criteria.iter().all(|c| c.passed),
        failing,
        criteria,
        timestamp: Timestamp {
            unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            timings,
        },
    })
}

/// Constant-speed polyline through `vertices`, resampled at `segments + 1`
/// equally spaced arc-length points on `[0, length]`.
fn resampled_polyline(vertices: &[[f64; 2]], segments: usize) -> Result<Curve> {
    let lens: Vec<f64> = vertices.windows(2).map(|w| dist2(&w[0], &w[1]).sqrt()).collect();
    let total: f64 = lens.iter().sum();
    let mut pts = Vec::with_capacity(segments + 1);
    let mut piece = 0;
    let mut before = 0.0;
    for k in 0..=segments {
        let s = total * k as f64 / segments as f64;
        while piece + 1 < lens.len() && s > before + lens[piece] {
            before += lens[piece];
            piece += 1;
        }
        let u = ((s - before) / lens[piece]).clamp(0.0, 1.0);
        let (a, b) = (vertices[piece], vertices[piece + 1]);
        pts.push(vec![a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]);
    }
    Curve::from_points(total * (1.0 + 1e-9), &pts)
}

fn criterion_curve_divergence(ctx: &Context, c: &mut Checks) -> Result<()> {
    let cfg = ctx.cfg;
    let panel = make_panel(cfg.seed, 0, cfg.panel_functions, &BoundingBox::cube(2, 1.5)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xC1);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.polylines {
        let n = rng.random_range(3..10);
        let vertices: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let gamma = resampled_polyline(&vertices, cfg.polyline_samples)?;
        for psi in &panel.functions {
            let rs = gamma.curve_action(&GradientField(psi))?;
            worst = worst.max((-rs - gamma.curve_divergence_action(psi)?).abs());
        }
    }
    c.at_most("max |-sum <grad psi, dgamma> - (psi(start) - psi(end))|", worst, 1e-5);
    Ok(())
}

fn criterion_drift(ctx: &Context, c: &mut Checks) -> Result<()> {
    let cfg = ctx.cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xD2);
    for kind in ScenarioKind::ALL {
        let (mu, _) = Scenario::new(kind).with_seed(cfg.seed).generate()?;
        if mu.is_empty() {
            continue;
        }
        let mc = MollifiedCharge::new(mu.clone(), cfg.epsilon)?;
        let bx = BoundingBox::around(2, mu.atoms().iter().map(|a| a.position.as_slice()), 5.0 * cfg.epsilon)?;
        let mut worst: f64 = 0.0;
        let mut worst_exact: f64 = 0.0;
        let mut out = [0.0; 2];
        for j in 0..cfg.drift_probes {
            // every tenth probe is far from the support
            let spread = if j % 10 == 9 { 20.0 } else { 1.0 };
            let x: Vec<f64> = (0..2)
                .map(|k| {
                    let mid = 0.5 * (bx.lo[k] + bx.hi[k]);
                    mid + spread * (rng.random::<f64>() - 0.5) * (bx.hi[k] - bx.lo[k])
                })
                .collect();
            mc.drift_into(&x, &mut out);
            worst = worst.max(norm(&out) - 1.0);
            if kind == ScenarioKind::SingleAtom {
                let w = &mu.atoms()[0].weight;
                let wn = norm(w);
                worst_exact = worst_exact.max(((out[0] - w[0] / wn).powi(2) + (out[1] - w[1] / wn).powi(2)).sqrt());
            }
        }
        c.at_most(format!("{kind}: max |phi| - 1"), worst.max(0.0), 1e-12);
        if kind == ScenarioKind::SingleAtom {
            c.at_most("single_atom: max |phi - w/|w||", worst_exact, 1e-12);
        }
    }
    Ok(())
}

fn criterion_mass(ctx: &mut Context, c: &mut Checks) -> Result<()> {
    if ctx.mass_records.is_empty() {
        ctx.loop_run()?;
    }
    for (name, err) in &ctx.mass_records {
        c.at_most(format!("{name}: relative mass error"), *err, 1e-12);
    }
    Ok(())
}

fn criterion_reconstruction(ctx: &mut Context, c: &mut Checks) -> Result<()> {
    let var = ctx.loop_charge.total_variation();
    let (_, report) = ctx.loop_run()?;
    for (i, r) in report.reconstruction.iter().enumerate() {
        let bound = (0.02 * var * r.field_sup).max(4.0 * r.ensemble.std_error);
        c.at_most(format!("field {i}: |ensemble - smoothed|"), r.error_vs_smoothed, bound);
    }
    Ok(())
}

fn criterion_refinement(ctx: &Context, c: &mut Checks) -> Result<()> {
    let gaps = mollification_gaps(&ctx.loop_charge, &ctx.cfg.refinement_schedule, &ctx.loop_panel)?;
    let last = gaps.len() - 1;
    for f in 0..ctx.loop_panel.fields.len() {
        let increases = (1..gaps.len()).filter(|&e| !(gaps[e][f] < gaps[e - 1][f])).count();
        c.at_most(format!("field {f}: non-decreasing steps"), increases as f64, 0.0);
        c.at_most(format!("field {f}: final/initial gap"), gaps[last][f] / gaps[0][f], 0.15);
    }
    Ok(())
}

fn criterion_liouville(ctx: &Context, c: &mut Checks) -> Result<()> {
    let cfg = ctx.cfg;
    let mc = MollifiedCharge::new(ctx.loop_charge.clone(), cfg.epsilon)?;
    let flow = FlowConfig::with_default_record(cfg.ell, cfg.liouville_step)?;
    let table = liouville_scan(&mc, cfg.seed, cfg.liouville_samples, &ctx.loop_panel.functions, &cfg.liouville_times, &flow)?;
    for (i, row) in table.iter().enumerate() {
        for s in row {
            c.at_most(format!("psi {i}, t = {}: discrepancy", s.time), s.discrepancy, 3.0 * s.std_error + 1e-6);
        }
    }
    for (i, order) in rk4_orders(0.2, 3)?.into_iter().enumerate() {
        c.at_least(format!("rotation RK4 order, halving {}", i + 1), order, 3.7);
        c.at_most(format!("rotation RK4 order, halving {} (upper)", i + 1), order, 4.3);
    }
    Ok(())
}

/// Observed orders of the integrator on the rotation field over `halvings`
/// successive step halvings, starting from `h0`.
pub fn rk4_orders(h0: f64, halvings: usize) -> Result<Vec<f64>> {
    let rotation = FnField::new(2, |x: &[f64], out: &mut [f64]| {
        out[0] = -x[1];
        out[1] = x[0];
    });
    let exact = [1f64.cos(), 1f64.sin()];
    let errors = (0..=halvings)
        .map(|k| {
            let end = flow_point(&rotation, &[1.0, 0.0], 1.0, h0 / f64::powi(2.0, k as i32))?;
            Ok(dist2(&end, &exact).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

fn criterion_endpoints(ctx: &mut Context, c: &mut Checks) -> Result<()> {
    let (_, report) = ctx.loop_run()?;
    for (i, e) in report.endpoints.iter().enumerate() {
        c.at_most(format!("psi {i}: start-point error"), e.start_error, 4.0 * e.start_estimate.std_error);
        c.at_most(
            format!("psi {i}: start-vs-end cancellation"),
            e.cancellation.value.abs(),
            3.0 * e.cancellation.std_error + 1e-4,
        );
    }
    Ok(())
}

fn criterion_lengths(ctx: &mut Context, c: &mut Checks) -> Result<()> {
    let ell = ctx.cfg.ell;
    let panel = ctx.loop_panel.clone();
    let (_, report) = ctx.loop_run()?;
    c.at_least("mean length / ell", report.lengths.mean_over_ell, 0.95);
    c.at_most("max length", report.lengths.max, ell * (1.0 + 1e-9));

    // out along e1 and straight back: length 2, charge 0
    let m = 2 * ctx.cfg.polyline_samples;
    let pts: Vec<Vec<f64>> = (0..=m)
        .map(|k| {
            let t = 2.0 * k as f64 / m as f64;
            vec![if t <= 1.0 { t } else { 2.0 - t }, 0.0]
        })
        .collect();
    let back_and_forth = Curve::from_points(2.0, &pts)?;
    let (lower, length) = back_and_forth.variation_bracket(&panel)?;
    c.at_most("back-and-forth: variation lower bound", lower, 0.05);
    c.at_most("back-and-forth: |length - 2|", (length - 2.0).abs(), 1e-12);
    Ok(())
}

fn criterion_lift_divergence(ctx: &Context, c: &mut Checks) -> Result<()> {
    let p = ctx.lift_params()?;
    let (mu, sigma) = ctx.segment.clone();
    let pair = DivergencePair::certify(mu, sigma, &ctx.segment_panel)?;
    let lifted = build_lift(&pair, &p)?;
    let panel = lifted_panel(&ctx.segment_panel, p.ell, ctx.cfg.panel_functions.max(1))?;
    let d = verify_lift_divergence(&lifted, &panel)?;
    c.at_most("lift divergence - certification", d - pair.certification, 1e-3);
    Ok(())
}

fn criterion_lift_reconstruction(ctx: &mut Context, c: &mut Checks) -> Result<()> {
    let (seg, null) = ctx.lift_runs()?.clone();
    c.at_most("segment: aligned field relative error", seg.reconstruction[0].rel_error, 0.1);
    for (i, r) in null.reconstruction.iter().enumerate() {
        c.at_most(format!("null charge: field {i} |estimate|"), r.estimate.value.abs(), 3.0 * r.estimate.std_error);
    }
    c.at_most("segment: kept + discarded vs Var/ell", seg.mass.relative_error, 1e-12);
    c.at_most("null charge: kept + discarded vs Var/ell", null.mass.relative_error, 1e-12);
    Ok(())
}

fn criterion_vertical(ctx: &mut Context, c: &mut Checks) -> Result<()> {
    let (seg, _) = ctx.lift_runs()?;
    let v = seg.vertical;
    c.at_least("mean height velocity near E+ (sink of mu)", v.mean_velocity_e_plus, 0.8);
    c.at_most("mean height velocity near E- (source of mu)", v.mean_velocity_e_minus, -0.8);
    c.at_least("segments sampled near E+", v.segments_e_plus as f64, 1.0);
    c.at_least("segments sampled near E-", v.segments_e_minus as f64, 1.0);
    Ok(())
}

/// Reports of a small loop decomposition and a small segment lift.
fn determinism_probe(cfg: &VerifyConfig) -> Result<Value> {
    let small = VerifyConfig {
        n_curves: cfg.determinism_curves,
        lift_curves: cfg.determinism_curves,
        step: 0.01,
        lift_step: 0.01,
        ..cfg.clone()
    };
    let ctx = Context::new(&small)?;
    let (_, loop_report) = decompose_with_report(&ctx.loop_charge, &ctx.loop_params()?, &ctx.loop_panel)?;
    let (mu, sigma) = ctx.segment.clone();
    let pair = DivergencePair::certify(mu, sigma, &ctx.segment_panel)?;
    let lift = decompose_with_divergence(&pair, &ctx.lift_params()?, &ctx.segment_panel)?.report;
    Ok(serde_json::json!({ "loop": loop_report, "lift": lift }))
}

fn criterion_determinism(cfg: &VerifyConfig, c: &mut Checks) -> Result<()> {
    let runs = cfg
        .determinism_threads
        .iter()
        .map(|&t| with_threads(Some(t), || determinism_probe(cfg))?)
        .collect::<Result<Vec<Value>>>()?;
    let rerun = with_threads(Some(cfg.determinism_threads[0]), || determinism_probe(cfg))??;
    c.at_most(
        format!("rerun at {} thread(s): differing reports", cfg.determinism_threads[0]),
        if rerun == runs[0] { 0.0 } else { 1.0 },
        0.0,
    );
    for (t, run) in cfg.determinism_threads.iter().zip(&runs).skip(1) {
        let diff = max_scalar_difference(&runs[0], run).unwrap_or(f64::INFINITY);
        c.at_most(format!("max scalar difference, {t} vs {} threads", cfg.determinism_threads[0]), diff.min(f64::MAX), 1e-12);
    }
    Ok(())
}

/// Drops the top-level `"timestamp"` member.
pub fn comparable(report: &Value) -> Value {
    let mut v = report.clone();
    if let Value::Object(map) = &mut v {
        map.remove("timestamp");
    }
    v
}

/// Largest absolute difference between corresponding numbers of two JSON
/// documents of identical shape; `None` if the shapes or any non-numeric
/// leaves differ.
pub fn max_scalar_difference(a: &Value, b: &Value) -> Option<f64> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64()?, y.as_f64()?);
            Some((x - y).abs())
        }
        (Value::Array(xs), Value::Array(ys)) => {
            if xs.len() != ys.len() {
                return None;
            }
            xs.iter().zip(ys).try_fold(0.0f64, |m, (x, y)| Some(m.max(max_scalar_difference(x, y)?)))
        }
        (Value::Object(xs), Value::Object(ys)) => {
            if xs.len() != ys.len() {
                return None;
            }
            xs.iter()
                .try_fold(0.0f64, |m, (k, x)| Some(m.max(max_scalar_difference(x, ys.get(k)?)?)))
        }
        _ => (a == b).then_some(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_order_on_rotation() {
        for o in rk4_orders(0.2, 3).unwrap() {
            assert!((3.7..=4.3).contains(&o), "{o}");
        }
    }

    #[test]
    fn polyline_resampling() {
        let c = resampled_polyline(&[[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]], 300).unwrap();
        assert!((c.length() - 3.0).abs() < 1e-12);
        assert_eq!(c.end(), &[1.0, 2.0]);
        assert_eq!(c.point(100), &[1.0, 0.0]);
    }

    #[test]
    fn json_differences() {
        let a = serde_json::json!({"x": [1.0, 2.0], "s": "k", "timestamp": {"unix_seconds": 4}});
        let b = serde_json::json!({"x": [1.0, 2.5], "s": "k", "timestamp": {"unix_seconds": 9}});
        assert_eq!(max_scalar_difference(&comparable(&a), &comparable(&b)), Some(0.5));
        let c = serde_json::json!({"x": [1.0], "s": "k"});
        assert_eq!(max_scalar_difference(&comparable(&a), &c), None);
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = VerifyConfig::from_json("{}").unwrap();
        assert_eq!(cfg, VerifyConfig::default());
        assert!(VerifyConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let bad = VerifyConfig {
            only: vec![13],
            ..Default::default()
        };
        assert!(run_verify(&bad).is_err());
    }

    #[test]
    fn quick_criteria_pass_and_zero_tolerance_fails() {
        let cfg = VerifyConfig {
            only: vec![1, 9],
            polylines: 5,
            ..Default::default()
        };
        let r = run_verify(&cfg).unwrap();
        assert!(r.passed, "{}", r.summary());
        assert_eq!(r.criteria.len(), 2);
        let strict = VerifyConfig {
            tolerance_scale: 0.0,
            ..cfg
        };
        let r = run_verify(&strict).unwrap();
        assert_eq!(r.exit_code(), 1);
        assert!(!r.failing.is_empty());
    }
}
