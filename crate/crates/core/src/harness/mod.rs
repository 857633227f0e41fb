//! Monte Carlo replication of estimator sampling distributions and
//! population objective profiles.

mod output;
mod profile;
pub mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use output::{write_mc_outputs, write_profile_csv};
pub use profile::{objective_profile, ProfileCurve};

use crate::baselines::{indirect_inference, mle_uniform, oracle_js, IndirectConfig, Weighting};
use crate::distances::{DistanceKind, QuadratureConfig, WeightFn};
use crate::error::{Error, Result};
use crate::inference::{sandwich, wald_ci, InferenceConfig, SandwichEstimate};
use crate::models::{Model, ModelId, ModelKind, ParamBox};
use crate::objective::SlicedObjectiveConfig;
use crate::optimizer::{default_init, minimize, AdamConfig, Flag, TraceRow};
use crate::rng::{tags, RngHandle};
use crate::sample::Sample;
use stats::{
    excess_kurtosis, histogram, ks_statistic, mean, qq_data, sd, skewness, HistBin, SD_FLOOR,
};

/// Replications may fail up to this fraction before the run errors.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorId {
    Mscd,
    Mswd,
    Mle,
    JsOracle,
    Indirect,
}

impl EstimatorId {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mscd => "mscd",
            Self::Mswd => "mswd",
            Self::Mle => "mle",
            Self::JsOracle => "js-oracle",
            Self::Indirect => "indirect",
        }
    }

    pub fn supports(&self, model: &Model) -> bool {
        match self {
            Self::Mscd | Self::Mswd => true,
            Self::Mle | Self::JsOracle => !model.is_conditional(),
            Self::Indirect => model.is_conditional(),
        }
    }
}

impl std::fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub id: EstimatorId,
    pub weight: WeightFn,
    pub n_projections: usize,
    pub quad: QuadratureConfig,
    pub adam: AdamConfig,
    /// Starting value; `None` uses the model default.
    pub init: Option<Vec<f64>>,
    /// Indirect inference: simulated paths per observation.
    pub n_synthetic: usize,
    pub weighting: Weighting,
    /// Oracle JS: grid points before golden-section refinement.
    pub js_grid: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            id: EstimatorId::Mscd,
            weight: WeightFn::wide_window(),
            n_projections: 100,
            quad: QuadratureConfig::default(),
            adam: AdamConfig::default(),
            init: None,
            n_synthetic: 100,
            weighting: Weighting::Optimal,
            js_grid: 201,
        }
    }
}

impl EstimatorConfig {
    pub fn new(id: EstimatorId) -> Self {
        Self {
            id,
            ..Default::default()
        }
    }

    fn objective(&self, rng: RngHandle) -> Option<SlicedObjectiveConfig> {
        let kind = match self.id {
            EstimatorId::Mscd => DistanceKind::Cramer,
            EstimatorId::Mswd => DistanceKind::Wasserstein,
            _ => return None,
        };
        Some(SlicedObjectiveConfig {
            kind,
            weight: self.weight,
            n_projections: self.n_projections,
            quad: self.quad,
            rng,
        })
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        if !self.id.supports(model) {
            return Err(Error::Unsupported(format!(
                "estimator {} on model {}",
                self.id,
                model.id()
            )));
        }
        if let Some(init) = &self.init {
            model.check_psi(init)?;
        }
        if let Some(o) = self.objective(RngHandle::new(0, 0)) {
            o.validate()?;
        }
        if self.js_grid < 2 {
            return Err(Error::Config("js_grid needs at least two points".into()));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceSettings {
    pub enabled: bool,
    pub level: f64,
    pub n_directions: usize,
}

impl Default for InferenceSettings {
    fn default() -> Self {
        Self {
            enabled: false,
            level: 0.95,
            n_directions: 256,
        }
    }
}

/// One fitted estimate with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub psi_hat: Vec<f64>,
    pub objective: Option<f64>,
    pub converged: bool,
    pub epochs: usize,
    pub flags: Vec<Flag>,
    pub se: Option<Vec<f64>>,
    pub ci: Option<Vec<(f64, f64)>>,
    pub sandwich: Option<SandwichEstimate>,
    pub trace: Vec<TraceRow>,
}

impl Outcome {
    fn closed_form(psi_hat: Vec<f64>) -> Self {
        Self {
            psi_hat,
            objective: None,
            converged: true,
            epochs: 0,
            flags: Vec::new(),
            se: None,
            ci: None,
            sandwich: None,
            trace: Vec::new(),
        }
    }
}

fn js_grid(model: &Model, psi0: f64, n: usize) -> Vec<f64> {
    let b = model.bounds();
    let (lo, hi) = match model.kind() {
        ModelKind::OneSidedUniform => ((0.5 * psi0).max(b.lo[0]), (1.5 * psi0).min(b.hi[0])),
        _ => (b.lo[0].max(0.005), b.hi[0].min(0.995)),
    };
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Fit one estimator. `psi0` is only read by the oracle JS estimator;
/// sandwich inference is attached to MSCD fits when enabled.
pub fn run_estimator(
    sample: &Sample,
    model: &Model,
    est: &EstimatorConfig,
    psi0: &[f64],
    rng: RngHandle,
    inference: &InferenceSettings,
) -> Result<Outcome> {
    est.validate(model)?;
    if sample.dim() != 1 + model.covariate_dim() {
        return Err(Error::DimensionMismatch {
            expected: 1 + model.covariate_dim(),
            got: sample.dim(),
        });
    }
    let init = est
        .init
        .clone()
        .unwrap_or_else(|| default_init(model, sample));
    let res = match est.id {
        EstimatorId::Mle => return Ok(Outcome::closed_form(vec![mle_uniform(sample, model)?])),
        EstimatorId::JsOracle => {
            model.check_psi(psi0)?;
            let grid = js_grid(model, psi0[0], est.js_grid);
            return Ok(Outcome::closed_form(vec![oracle_js(
                sample, model, psi0[0], &grid,
            )?]));
        }
        EstimatorId::Indirect => {
            let cfg = IndirectConfig {
                n_synthetic: est.n_synthetic,
                weighting: est.weighting,
                rng,
                optimizer: est.adam,
            };
            indirect_inference(sample, model, &cfg, &init)?
        }
        EstimatorId::Mscd | EstimatorId::Mswd => {
            let obj = est.objective(rng).expect("sliced estimator");
            minimize(sample, model, &obj, &est.adam, &init)?
        }
    };
    let mut out = Outcome {
        psi_hat: res.psi_hat,
        objective: Some(res.objective),
        converged: res.converged,
        epochs: res.epochs_run,
        flags: res.flags,
        se: None,
        ci: None,
        sandwich: None,
        trace: res.trace,
    };
    if inference.enabled && est.id == EstimatorId::Mscd {
        let icfg = InferenceConfig {
            n_directions: inference.n_directions,
            level: inference.level,
            rng,
        };
        let dirs = icfg.directions(sample.dim())?;
        let sw = sandwich(sample, model, &out.psi_hat, &est.weight, &dirs, &est.quad)?;
        out.ci = Some(wald_ci(&out.psi_hat, &sw.se, inference.level)?);
        out.se = Some(sw.se.clone());
        out.sandwich = Some(sw);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McDesign {
    pub model: ModelId,
    #[serde(default = "default_bidders")]
    pub bidders: u32,
    /// Parameter box override.
    #[serde(default)]
    pub bounds: Option<ParamBox>,
    pub psi0: Vec<f64>,
    pub sample_size: usize,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorConfig>,
    #[serde(default)]
    pub inference: InferenceSettings,
    /// Worker cap; `None` uses every core.
    #[serde(default)]
    pub jobs: Option<usize>,
}

pub fn default_bidders() -> u32 {
    6
}

impl McDesign {
    pub fn build_model(&self) -> Result<Model> {
        let m = Model::from_id(self.model, self.bidders)?;
        match &self.bounds {
            Some(b) => m.with_bounds(b.clone()),
            None => Ok(m),
        }
    }

    pub fn validate(&self) -> Result<Model> {
        let model = self.build_model()?;
        model.check_psi(&self.psi0)?;
        if self.replications < 2 {
            return Err(Error::Config(
                "at least two replications are needed to normalize".into(),
            ));
        }
        if self.sample_size == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators configured".into()));
        }
        for e in &self.estimators {
            e.validate(&model)?;
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        Ok(model)
    }
}

/// Replication `r` draws its data from stream `r` of the design seed.
pub fn replication_sample(model: &Model, design: &McDesign, r: usize) -> Result<Sample> {
    let base = RngHandle::new(design.seed, r as u64);
    model.sample(&base.child(tags::DATA), design.sample_size, &design.psi0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    /// Per estimator, in design order: the fit or the failure reason.
    pub results: Vec<std::result::Result<Outcome, String>>,
}

fn run_replication(model: &Model, design: &McDesign, r: usize) -> Replication {
    let base = RngHandle::new(design.seed, r as u64);
    let results = match replication_sample(model, design, r) {
        Ok(sample) => design
            .estimators
            .iter()
            .map(|e| {
                run_estimator(&sample, model, e, &design.psi0, base, &design.inference)
                    .map(|mut o| {
                        o.trace.clear();
                        o
                    })
                    .map_err(|err| err.to_string())
            })
            .collect(),
        Err(err) => vec![Err(err.to_string()); design.estimators.len()],
    };
    Replication { index: r, results }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordSummary {
    pub mean: f64,
    pub sd: f64,
    pub bias: f64,
    pub rmse: f64,
    /// `(psi_hat - psi0) / sd`; empty when `sd` is below the floor.
    pub normalized: Vec<f64>,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub ks: Option<f64>,
    pub qq: Vec<(f64, f64)>,
    pub hist: Vec<HistBin>,
    pub mean_se: Option<f64>,
    pub coverage: Option<f64>,
    pub diagnostics: Vec<String>,
}

fn summarize_coord(
    values: &[f64],
    psi0: f64,
    se: &[Option<f64>],
    ci: &[Option<(f64, f64)>],
) -> CoordSummary {
    let s = sd(values);
    let m = mean(values);
    let rmse =
        (values.iter().map(|v| (v - psi0).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    let mut diagnostics = Vec::new();
    let normalized: Vec<f64> = if s > SD_FLOOR {
        values.iter().map(|v| (v - psi0) / s).collect()
    } else {
        diagnostics.push(format!(
            "monte carlo sd {s:e} below floor {SD_FLOOR:e}; normalization skipped"
        ));
        Vec::new()
    };
    let ok = !normalized.is_empty();
    let ses: Vec<f64> = se.iter().flatten().copied().collect();
    let cis: Vec<(f64, f64)> = ci.iter().flatten().copied().collect();
    CoordSummary {
        mean: m,
        sd: s,
        bias: m - psi0,
        rmse,
        skewness: ok.then(|| skewness(&normalized)),
        excess_kurtosis: ok.then(|| excess_kurtosis(&normalized)),
        ks: ok.then(|| ks_statistic(&normalized)),
        qq: if ok { qq_data(&normalized) } else { Vec::new() },
        hist: histogram(&normalized),
        mean_se: (!ses.is_empty()).then(|| mean(&ses)),
        coverage: (!cis.is_empty()).then(|| {
            cis.iter()
                .filter(|(lo, hi)| *lo <= psi0 && psi0 <= *hi)
                .count() as f64
                / cis.len() as f64
        }),
        normalized,
        diagnostics,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub id: EstimatorId,
    pub n_ok: usize,
    pub n_failed: usize,
    pub failures: Vec<(usize, String)>,
    pub convergence_rate: f64,
    /// `(replication, psi_hat)` for every successful replication.
    pub estimates: Vec<(usize, Vec<f64>)>,
    pub coords: Vec<CoordSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub design: McDesign,
    pub estimators: Vec<EstimatorSummary>,
}

impl McSummary {
    pub fn estimator(&self, id: EstimatorId) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.id == id)
    }
}

/// Run every replication of `design` and summarize.
pub fn run_mc(design: &McDesign) -> Result<McSummary> {
    let reps = run_replications(design)?;
    summarize(design, &reps)
}

/// The raw replications, sorted by index.
pub fn run_replications(design: &McDesign) -> Result<Vec<Replication>> {
    let model = design.validate()?;
    let work = || {
        (0..design.replications)
            .into_par_iter()
            .map(|r| run_replication(&model, design, r))
            .collect::<Vec<_>>()
    };
    let mut reps = match design.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Harness(e.to_string()))?
            .install(work),
        None => work(),
    };
    reps.sort_by_key(|r| r.index);
    Ok(reps)
}

/// Summaries from replications in any order.
pub fn summarize(design: &McDesign, reps: &[Replication]) -> Result<McSummary> {
    let mut reps: Vec<&Replication> = reps.iter().collect();
    reps.sort_by_key(|r| r.index);
    let d = design.psi0.len();
    let mut out = Vec::new();
    for (e, est) in design.estimators.iter().enumerate() {
        let mut estimates = Vec::new();
        let mut failures = Vec::new();
        let mut converged = 0;
        let mut se = vec![Vec::new(); d];
        let mut ci = vec![Vec::new(); d];
        for rep in &reps {
            match &rep.results[e] {
                Ok(o) => {
                    converged += o.converged as usize;
                    for j in 0..d {
                        se[j].push(o.se.as_ref().map(|s| s[j]));
                        ci[j].push(o.ci.as_ref().map(|c| c[j]));
                    }
                    estimates.push((rep.index, o.psi_hat.clone()));
                }
                Err(reason) => failures.push((rep.index, reason.clone())),
            }
        }
        if failures.len() as f64 > MAX_FAILURE_FRACTION * reps.len() as f64 {
            let first = failures.first().map(|f| f.1.as_str()).unwrap_or("");
            return Err(Error::Harness(format!(
                "{} of {} replications of {} failed (first: {first})",
                failures.len(),
                reps.len(),
                est.id
            )));
        }
        if estimates.len() < 2 {
            return Err(Error::Harness(format!(
                "{} has fewer than two successful replications",
                est.id
            )));
        }
        let coords = (0..d)
            .map(|j| {
                let v: Vec<f64> = estimates.iter().map(|(_, p)| p[j]).collect();
                summarize_coord(&v, design.psi0[j], &se[j], &ci[j])
            })
            .collect();
        out.push(EstimatorSummary {
            id: est.id,
            n_ok: estimates.len(),
            n_failed: failures.len(),
            failures,
            convergence_rate: converged as f64 / estimates.len() as f64,
            estimates,
            coords,
        });
    }
    Ok(McSummary {
        design: design.clone(),
        estimators: out,
    })
}
