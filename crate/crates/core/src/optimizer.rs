//! Adam minimization of the sliced objective with directions redrawn every
//! epoch.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, ParamBox};
use crate::objective::{
    fd_step, finite_difference, objective_prepared, FdGradient, PreparedDirections,
    SlicedObjectiveConfig,
};
use crate::rng::{draw_directions, tags};
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub n_epochs: usize,
    /// Stop once the epoch objective changes by less than this.
    pub tol: f64,
    /// Iterates kept as final-selection candidates every this many epochs.
    pub eval_every: usize,
    /// Fraction of the last epochs averaged into one extra candidate.
    pub tail_fraction: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            n_epochs: 1000,
            tol: 1e-12,
            eval_every: 10,
            tail_fraction: 0.25,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::Config("Adam betas must lie in (0, 1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.n_epochs == 0 || self.eval_every == 0 {
            return Err(Error::Config(
                "n_epochs and eval_every must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.tail_fraction) {
            return Err(Error::Config("tail_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub psi: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(psi: Vec<f64>) -> Self {
        let n = psi.len();
        Self {
            psi,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update, projected onto `bounds` if given.
/// Returns true when the projection changed the raw update.
pub fn adam_step(
    state: &mut AdamState,
    grad: &[f64],
    cfg: &AdamConfig,
    bounds: Option<&ParamBox>,
) -> Result<bool> {
    if grad.len() != state.psi.len() {
        return Err(Error::DimensionMismatch {
            expected: state.psi.len(),
            got: grad.len(),
        });
    }
    if let Some(j) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient component {j} at step {}",
            state.t + 1
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for j in 0..grad.len() {
        state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * grad[j];
        state.v[j] = cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
        let mh = state.m[j] / c1;
        let vh = state.v[j] / c2;
        state.psi[j] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
    }
    Ok(bounds.is_some_and(|b| b.project(&mut state.psi)))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// A finite-difference coordinate fell back to a one-sided stencil.
    OneSidedGradient,
    /// An Adam update left the parameter box and was clamped.
    ProjectedToBox,
    /// The epoch objective changed by less than the tolerance.
    EarlyStop,
    /// Optimization stopped on a non-finite objective or gradient.
    NonFinite,
    /// The selected estimate lies on the parameter box.
    AtBoundary,
    /// Indirect inference: the optimal weight was singular, identity used.
    WeightFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub objective: f64,
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub psi_hat: Vec<f64>,
    /// Objective of `psi_hat` on the fixed evaluation set.
    pub objective: f64,
    /// Objective of the initial value on the same set.
    pub init_objective: f64,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub epochs_run: usize,
    pub flags: Vec<Flag>,
}

impl EstimateResult {
    pub fn has_flag(&self, f: &Flag) -> bool {
        self.flags.contains(f)
    }

    /// `epoch,objective,psi1,...` preceded by a format header.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        Self::write_trace_rows(&self.trace, out)
    }

    pub fn write_trace_rows<W: Write>(trace: &[TraceRow], mut out: W) -> Result<()> {
        writeln!(out, "# msdest v1 trace")?;
        let d = trace.first().map_or(0, |r| r.psi.len());
        let names: Vec<String> = (1..=d).map(|j| format!("psi{j}")).collect();
        writeln!(out, "epoch,objective,{}", names.join(","))?;
        for row in trace {
            let psi: Vec<String> = row.psi.iter().map(|p| format!("{p:e}")).collect();
            writeln!(out, "{},{:e},{}", row.epoch, row.objective, psi.join(","))?;
        }
        Ok(())
    }
}

/// A stochastic objective redrawn every epoch, plus a fixed objective used
/// to compare candidate estimates.
pub trait EpochObjective {
    fn bounds(&self) -> &ParamBox;

    fn begin_epoch(&mut self, epoch: usize) -> Result<()>;

    fn epoch_value(&self, psi: &[f64]) -> Result<f64>;

    fn epoch_gradient(&self, psi: &[f64]) -> Result<FdGradient> {
        let b = self.bounds();
        finite_difference(|p| self.epoch_value(p), psi, &b.lo, &b.hi, fd_step)
    }

    fn eval_value(&self, psi: &[f64]) -> Result<f64>;
}

fn push_flag(flags: &mut Vec<Flag>, f: Flag) {
    if !flags.contains(&f) {
        flags.push(f);
    }
}

fn is_non_finite(e: &Error) -> bool {
    matches!(e, Error::Numeric(_) | Error::Inversion { .. })
}

/// Run Adam on `obj` from `init`.
///
/// The reported estimate is the best of: the initial value, every
/// `eval_every`-th iterate, the last iterate and the average of the last
/// `tail_fraction` of iterates, compared on the fixed evaluation objective.
pub fn minimize_objective<O: EpochObjective + ?Sized>(
    obj: &mut O,
    cfg: &AdamConfig,
    init: &[f64],
) -> Result<EstimateResult> {
    cfg.validate()?;
    let bounds = obj.bounds().clone();
    if !bounds.contains(init) {
        return Err(Error::ParameterDomain(format!(
            "initial value {init:?} outside the parameter box"
        )));
    }
    let mut state = AdamState::new(init.to_vec());
    let mut trace = Vec::with_capacity(cfg.n_epochs);
    let mut flags = Vec::new();
    let mut candidates = vec![init.to_vec()];
    let mut aborted = false;
    let mut prev: Option<f64> = None;
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_epochs);

    for epoch in 0..cfg.n_epochs {
        obj.begin_epoch(epoch)?;
        let g = match obj.epoch_gradient(&state.psi) {
            Ok(g) => g,
            Err(e) if is_non_finite(&e) => {
                push_flag(&mut flags, Flag::NonFinite);
                aborted = true;
                break;
            }
            Err(e) => return Err(e),
        };
        // The trace records the stencil mean rather than paying for an
        // extra evaluation at the center.
        let f = match g.center.or(g.stencil_mean) {
            Some(c) => c,
            None => match obj.epoch_value(&state.psi) {
                Ok(v) => v,
                Err(e) if is_non_finite(&e) => {
                    push_flag(&mut flags, Flag::NonFinite);
                    aborted = true;
                    break;
                }
                Err(e) => return Err(e),
            },
        };
        if !g.one_sided.is_empty() {
            push_flag(&mut flags, Flag::OneSidedGradient);
        }
        trace.push(TraceRow {
            epoch,
            objective: f,
            psi: state.psi.clone(),
        });
        if prev.is_some_and(|p| (f - p).abs() < cfg.tol) {
            push_flag(&mut flags, Flag::EarlyStop);
            break;
        }
        prev = Some(f);
        match adam_step(&mut state, &g.grad, cfg, Some(&bounds)) {
            Ok(true) => push_flag(&mut flags, Flag::ProjectedToBox),
            Ok(false) => {}
            Err(e) if is_non_finite(&e) => {
                push_flag(&mut flags, Flag::NonFinite);
                aborted = true;
                break;
            }
            Err(e) => return Err(e),
        }
        history.push(state.psi.clone());
        if (epoch + 1) % cfg.eval_every == 0 {
            candidates.push(state.psi.clone());
        }
    }
    let epochs_run = trace.len();
    if !aborted {
        candidates.push(state.psi.clone());
        let k = ((history.len() as f64) * cfg.tail_fraction).ceil() as usize;
        if k > 1 {
            let tail = &history[history.len() - k..];
            let mut avg = vec![0.0; init.len()];
            for p in tail {
                for (a, v) in avg.iter_mut().zip(p) {
                    *a += v / k as f64;
                }
            }
            bounds.project(&mut avg);
            candidates.push(avg);
        }
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut init_objective = f64::NAN;
    for (i, c) in candidates.into_iter().enumerate() {
        let v = match obj.eval_value(&c) {
            Ok(v) => v,
            Err(e) if is_non_finite(&e) && i > 0 => continue,
            Err(e) => return Err(e),
        };
        if i == 0 {
            init_objective = v;
        }
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, c));
        }
    }
    let (objective, psi_hat) = best.expect("initial candidate is always evaluated");
    let scale: f64 = bounds
        .lo
        .iter()
        .zip(&bounds.hi)
        .map(|(l, h)| h - l)
        .fold(f64::INFINITY, f64::min);
    let at_boundary = bounds.on_boundary(&psi_hat, 1e-9 * scale.min(1.0));
    if at_boundary {
        push_flag(&mut flags, Flag::AtBoundary);
    }
    Ok(EstimateResult {
        psi_hat,
        objective,
        init_objective,
        trace,
        converged: !aborted && !at_boundary,
        epochs_run,
        flags,
    })
}

/// The sliced objective with `m` directions redrawn each epoch and a fixed
/// evaluation set of `4m` directions.
pub struct SlicedRun<'a> {
    model: &'a Model,
    sample: &'a Sample,
    cfg: SlicedObjectiveConfig,
    m: usize,
    rng: ChaCha8Rng,
    current: Option<PreparedDirections>,
    eval: PreparedDirections,
}

impl<'a> SlicedRun<'a> {
    pub fn new(
        model: &'a Model,
        sample: &'a Sample,
        cfg: &SlicedObjectiveConfig,
        m: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        if m == 0 {
            return Err(Error::Config(
                "number of projections must be positive".into(),
            ));
        }
        let d = sample.dim();
        let eval_dirs = draw_directions(&mut cfg.rng.child(tags::EVAL_DIRECTIONS).rng(), d, 4 * m)?;
        let eval = PreparedDirections::new(sample, &eval_dirs, cfg.kind)?;
        Ok(Self {
            model,
            sample,
            cfg: *cfg,
            m,
            rng: cfg.rng.child(tags::EPOCH_DIRECTIONS).rng(),
            current: None,
            eval,
        })
    }
}

impl EpochObjective for SlicedRun<'_> {
    fn bounds(&self) -> &ParamBox {
        self.model.bounds()
    }

    fn begin_epoch(&mut self, _epoch: usize) -> Result<()> {
        let dirs = draw_directions(&mut self.rng, self.sample.dim(), self.m)?;
        self.current = Some(PreparedDirections::new(self.sample, &dirs, self.cfg.kind)?);
        Ok(())
    }

    fn epoch_value(&self, psi: &[f64]) -> Result<f64> {
        let cur = self
            .current
            .as_ref()
            .ok_or_else(|| Error::Config("epoch not started".into()))?;
        objective_prepared(self.model, self.sample, &self.cfg, psi, cur)
    }

    fn eval_value(&self, psi: &[f64]) -> Result<f64> {
        objective_prepared(self.model, self.sample, &self.cfg, psi, &self.eval)
    }
}

/// Minimize the sliced objective of `model` on `sample`.
pub fn minimize(
    sample: &Sample,
    model: &Model,
    obj_cfg: &SlicedObjectiveConfig,
    adam: &AdamConfig,
    psi_init: &[f64],
) -> Result<EstimateResult> {
    model.check_psi(psi_init)?;
    let mut run = SlicedRun::new(model, sample, obj_cfg, obj_cfg.n_projections)?;
    minimize_objective(&mut run, adam, psi_init)
}

/// Default starting value: the sample maximum (one-sided), 0.5
/// (two-sided) or `(0, 0)` (auction), clamped to the box.
pub fn default_init(model: &Model, sample: &Sample) -> Vec<f64> {
    use crate::models::ModelKind;
    let mut init = match model.kind() {
        ModelKind::OneSidedUniform => {
            vec![sample.y().iter().copied().fold(f64::NEG_INFINITY, f64::max)]
        }
        ModelKind::TwoSidedUniform => vec![0.5],
        ModelKind::Auction { .. } => vec![0.0, 0.0],
    };
    model.bounds().project(&mut init);
    init
}
