//! The sliced objective `S(psi)`: the direction average of the 1-D
//! discrepancy between the projected data and the projected model.
//!
//! Unconditional models project their own law. For conditional models the
//! projected model law is the semiparametric average of conditional CDFs
//! over the observed covariates,
//!
//! ```text
//! G(s; u, psi) = (1/T) sum_t P(u1 Y + u2'X_t <= s | X_t, psi),
//! ```
//!
//! which for `u1 > 0` is `F((s - u2'X_t)/u1 | X_t)`, for `u1 < 0` is
//! `1 - F(((s - u2'X_t)/u1)^- | X_t)`, and for `u1 = 0` the empirical CDF of
//! `u2'X_t`.

use serde::{Deserialize, Serialize};

use crate::distances::{
    cramer_sq_1d, unique_directions, wasserstein_sq_1d, Cdf1d, DistanceKind, QuadratureConfig,
    Quantile1d, StepCdf, StepQuantile, WeightFn,
};
use crate::error::{Error, Result};
use crate::models::{AuctionModel, Model, UniformLaw};
use crate::numeric::{sum_exp_decay_range, EXP_LANES};
use crate::rng::RngHandle;
use crate::sample::{Direction, Sample};

/// `|u1|` below this uses the covariate-only branch of `G`.
pub const RESPONSE_ZERO_TOL: f64 = 1e-12;

/// Bisection tolerance when inverting `G` for conditional MSWD.
pub const INVERSION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlicedObjectiveConfig {
    pub kind: DistanceKind,
    pub weight: WeightFn,
    pub n_projections: usize,
    #[serde(default)]
    pub quad: QuadratureConfig,
    pub rng: RngHandle,
}

impl Default for SlicedObjectiveConfig {
    fn default() -> Self {
        Self {
            kind: DistanceKind::Cramer,
            weight: WeightFn::wide_window(),
            n_projections: 100,
            quad: QuadratureConfig::default(),
            rng: RngHandle::new(0, 0),
        }
    }
}

impl SlicedObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_projections == 0 {
            return Err(Error::Config("n_projections must be at least 1".into()));
        }
        self.weight.validate()?;
        self.quad.validate()
    }
}

/// Law of `u'Z` implied by the model at a fixed parameter.
#[derive(Debug, Clone)]
pub enum ProjectedLaw {
    /// Unconditional law of `sign * Y`.
    Uniform { law: UniformLaw, sign: f64 },
    /// Conditional model along a direction with `u1 != 0`.
    Auction(AuctionProjection),
    /// `u1 = 0`: the empirical law of `u2'X_t`, free of the parameter.
    Covariate(StepCdf),
}

/// `G(.; u, psi)` for the auction model written as a mixture of shifted
/// exponentials: observation `t` contributes a boundary `b_t = u1 g_t + u2'x_t`
/// and rate `a_t = m / (|u1| h_t)`. Stored sorted by `b_t` and padded to
/// the exponential kernel's lane width.
#[derive(Debug, Clone)]
pub struct AuctionProjection {
    upward: bool,
    n: usize,
    bound: Vec<f64>,
    rate: Vec<f64>,
}

impl AuctionProjection {
    pub fn new(model: &AuctionModel, sample: &Sample, u: &Direction) -> Result<Self> {
        let u1 = u.response();
        if u1.abs() < RESPONSE_ZERO_TOL {
            return Err(Error::Numeric("auction projection needs u1 != 0".into()));
        }
        let x = sample
            .x()
            .ok_or_else(|| Error::InvalidSample("auction model needs covariates".into()))?;
        if sample.covariate_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: sample.covariate_dim(),
            });
        }
        let u2 = u.covariate()[0];
        let m = model.bidders as f64;
        let mut pairs: Vec<(f64, f64)> = x
            .iter()
            .map(|&xt| {
                let h = model.h(xt);
                (u1 * h / (m - 1.0) + u2 * xt, m / (u1.abs() * h))
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        pairs.resize(n.div_ceil(EXP_LANES) * EXP_LANES, (0.0, 0.0));
        let (bound, rate) = pairs.into_iter().unzip();
        Ok(Self {
            upward: u1 > 0.0,
            n,
            bound,
            rate,
        })
    }

    fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn value_at(&self, s: f64, k: usize) -> f64 {
        let t = self.n as f64;
        if self.upward {
            // Observations with b_t <= s, which are the first k.
            (k as f64 - sum_exp_decay_range(&self.rate, &self.bound, s, 0, k)) / t
        } else {
            // Observations with b_t >= s contribute exp(-a_t (b_t - s)).
            (k as f64 + sum_exp_decay_range(&self.rate, &self.bound, s, k, self.n)) / t
        }
    }

    fn split(&self, s: f64) -> usize {
        let b = &self.bound[..self.n];
        if self.upward {
            b.partition_point(|&b| b <= s)
        } else {
            b.partition_point(|&b| b < s)
        }
    }

    /// Smallest rate, which governs the slowest tail.
    fn min_rate(&self) -> f64 {
        self.rate[..self.n]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Invert `G` by bisection.
    pub fn inverse(&self, p: f64) -> Option<f64> {
        if !(p > 0.0 && p < 1.0) {
            return None;
        }
        let (first, last) = (self.bound[0], self.bound[self.len() - 1]);
        let scale = 1.0 / self.min_rate();
        let (mut lo, mut hi) = if self.upward {
            (first, last + scale)
        } else {
            (first - scale, last)
        };
        let mut step = scale;
        let mut tries = 0;
        while self.cdf(hi) < p {
            step *= 2.0;
            hi += step;
            tries += 1;
            if tries > 200 || !hi.is_finite() {
                return None;
            }
        }
        step = scale;
        tries = 0;
        while self.cdf(lo) > p {
            step *= 2.0;
            lo -= step;
            tries += 1;
            if tries > 200 || !lo.is_finite() {
                return None;
            }
        }
        for _ in 0..400 {
            if hi - lo <= INVERSION_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (hi - lo <= INVERSION_TOL).then_some(0.5 * (lo + hi))
    }
}

impl Cdf1d for AuctionProjection {
    fn cdf(&self, s: f64) -> f64 {
        self.value_at(s, self.split(s))
    }

    fn cdf_sorted(&self, nodes: &[f64], out: &mut [f64]) {
        let mut k = 0;
        let n = self.len();
        for (s, o) in nodes.iter().zip(out.iter_mut()) {
            if self.upward {
                while k < n && self.bound[k] <= *s {
                    k += 1;
                }
            } else {
                while k < n && self.bound[k] < *s {
                    k += 1;
                }
            }
            *o = self.value_at(*s, k);
        }
    }

    fn knots(&self) -> Vec<f64> {
        self.bound[..self.n].to_vec()
    }
}

impl Cdf1d for ProjectedLaw {
    fn cdf(&self, s: f64) -> f64 {
        match self {
            ProjectedLaw::Uniform { law, sign } => {
                if *sign > 0.0 {
                    law.cdf(s)
                } else {
                    1.0 - law.cdf(-s)
                }
            }
            ProjectedLaw::Auction(a) => a.cdf(s),
            ProjectedLaw::Covariate(c) => c.cdf(s),
        }
    }

    fn cdf_sorted(&self, nodes: &[f64], out: &mut [f64]) {
        match self {
            ProjectedLaw::Auction(a) => a.cdf_sorted(nodes, out),
            ProjectedLaw::Covariate(c) => c.cdf_sorted(nodes, out),
            ProjectedLaw::Uniform { .. } => {
                for (s, o) in nodes.iter().zip(out.iter_mut()) {
                    *o = self.cdf(*s);
                }
            }
        }
    }

    fn knots(&self) -> Vec<f64> {
        match self {
            ProjectedLaw::Uniform { law, sign } => {
                law.knots().into_iter().map(|k| sign * k).collect()
            }
            ProjectedLaw::Auction(a) => a.knots(),
            ProjectedLaw::Covariate(c) => c.knots(),
        }
    }
}

/// Quantile view of a [`ProjectedLaw`]. Conditional laws are inverted
/// numerically; failures surface as NaN and are reported by the caller.
pub struct ProjectedQuantile<'a>(&'a ProjectedLaw, Option<StepQuantile>);

impl<'a> ProjectedQuantile<'a> {
    pub fn new(law: &'a ProjectedLaw) -> Self {
        let step = match law {
            ProjectedLaw::Covariate(c) => Some(StepQuantile::new(c.sorted_values().to_vec())),
            _ => None,
        };
        Self(law, step)
    }
}

impl Quantile1d for ProjectedQuantile<'_> {
    fn quantile(&self, p: f64) -> f64 {
        match (self.0, &self.1) {
            (ProjectedLaw::Uniform { law, sign }, _) => {
                if *sign > 0.0 {
                    law.quantile(p)
                } else {
                    -law.quantile(1.0 - p)
                }
            }
            (ProjectedLaw::Auction(a), _) => a.inverse(p).unwrap_or(f64::NAN),
            (ProjectedLaw::Covariate(_), Some(q)) => q.quantile(p),
            (ProjectedLaw::Covariate(c), None) => {
                StepQuantile::new(c.sorted_values().to_vec()).quantile(p)
            }
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match (self.0, &self.1) {
            (ProjectedLaw::Uniform { law, sign }, _) => law
                .kinks()
                .into_iter()
                .map(|k| if *sign > 0.0 { k } else { 1.0 - k })
                .collect(),
            (ProjectedLaw::Auction(_), _) => Vec::new(),
            (ProjectedLaw::Covariate(_), Some(q)) => q.kinks(),
            (ProjectedLaw::Covariate(_), None) => Vec::new(),
        }
    }
}

/// The model-induced law of `u'Z` at `psi`.
pub fn projected_law(
    model: &Model,
    sample: &Sample,
    u: &Direction,
    psi: &[f64],
) -> Result<ProjectedLaw> {
    if u.dim() != sample.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample.dim(),
            got: u.dim(),
        });
    }
    if model.is_conditional() != sample.is_conditional() {
        return Err(Error::InvalidSample(format!(
            "{} model expects {} sample",
            model.id(),
            if model.is_conditional() {
                "a conditional"
            } else {
                "an unconditional"
            }
        )));
    }
    if !model.is_conditional() {
        return Ok(ProjectedLaw::Uniform {
            law: UniformLaw::new(model, psi[0])?,
            sign: u[0],
        });
    }
    if u.response().abs() < RESPONSE_ZERO_TOL {
        model.check_psi(psi)?;
        return Ok(ProjectedLaw::Covariate(StepCdf::new(
            sample.covariate_index(u),
        )));
    }
    Ok(ProjectedLaw::Auction(AuctionProjection::new(
        &model.auction_at(psi)?,
        sample,
        u,
    )?))
}

/// `G(s; u, psi)` evaluated term by term from the conditional CDF.
pub fn g_hat(model: &Model, sample: &Sample, s: f64, u: &Direction, psi: &[f64]) -> Result<f64> {
    if !sample.is_conditional() {
        return Err(Error::InvalidSample(
            "g_hat needs a conditional sample".into(),
        ));
    }
    if u.dim() != sample.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample.dim(),
            got: u.dim(),
        });
    }
    let u1 = u.response();
    let idx = sample.covariate_index(u);
    let t = sample.len() as f64;
    if u1.abs() < RESPONSE_ZERO_TOL {
        return Ok(idx.iter().filter(|&&c| c <= s).count() as f64 / t);
    }
    let mut total = 0.0;
    for (i, c) in idx.iter().enumerate() {
        total += model.cdf((s - c) / u1, sample.x_row(i), psi)?;
    }
    // The conditional CDFs here are continuous, so the left limit in the
    // u1 < 0 branch equals the value itself.
    Ok(if u1 > 0.0 { total / t } else { 1.0 - total / t })
}

/// Projected data for a fixed set of directions, reused across parameter
/// values (finite-difference stencils, candidate re-evaluation).
#[derive(Debug, Clone)]
pub struct PreparedDirections {
    entries: Vec<Prepared>,
    total: usize,
}

#[derive(Debug, Clone)]
struct Prepared {
    u: Direction,
    count: usize,
    data: EmpiricalProjection,
}

#[derive(Debug, Clone)]
enum EmpiricalProjection {
    Cdf(StepCdf),
    Quantile(StepQuantile),
}

impl PreparedDirections {
    /// Bit-identical directions are merged and weighted by multiplicity.
    pub fn new(sample: &Sample, directions: &[Direction], kind: DistanceKind) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::EmptyDirections);
        }
        let mut entries = Vec::new();
        for (u, count) in unique_directions(directions) {
            let v = sample.project(u)?;
            let data = match kind {
                DistanceKind::Cramer => EmpiricalProjection::Cdf(StepCdf::new(v)),
                DistanceKind::Wasserstein => EmpiricalProjection::Quantile(StepQuantile::new(v)),
            };
            entries.push(Prepared {
                u: u.clone(),
                count,
                data,
            });
        }
        Ok(Self {
            entries,
            total: directions.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn distinct(&self) -> usize {
        self.entries.len()
    }
}

/// `S(psi)` on prepared directions.
pub fn objective_prepared(
    model: &Model,
    sample: &Sample,
    cfg: &SlicedObjectiveConfig,
    psi: &[f64],
    prepared: &PreparedDirections,
) -> Result<f64> {
    model.check_psi(psi)?;
    let mut total = 0.0;
    for e in &prepared.entries {
        let law = projected_law(model, sample, &e.u, psi)?;
        let v = match &e.data {
            EmpiricalProjection::Cdf(emp) => cramer_sq_1d(emp, &law, &cfg.weight, &cfg.quad)?,
            EmpiricalProjection::Quantile(emp) => {
                let q = ProjectedQuantile::new(&law);
                wasserstein_sq_1d(emp, &q, &cfg.weight, &cfg.quad).map_err(|err| {
                    match (&law, err) {
                        (ProjectedLaw::Auction(_), Error::Numeric(reason)) => Error::Inversion {
                            direction: e.u.as_slice().to_vec(),
                            reason,
                        },
                        (_, err) => err,
                    }
                })?
            }
        };
        total += e.count as f64 * v;
    }
    let value = total / prepared.total as f64;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite objective at {psi:?}")));
    }
    Ok(value)
}

/// `S(psi)` averaged over the supplied directions.
pub fn objective_value(
    sample: &Sample,
    model: &Model,
    cfg: &SlicedObjectiveConfig,
    psi: &[f64],
    directions: &[Direction],
) -> Result<f64> {
    let prepared = PreparedDirections::new(sample, directions, cfg.kind)?;
    objective_prepared(model, sample, cfg, psi, &prepared)
}

/// Central finite-difference gradient with step `1e-4 * max(1, |psi_j|)`,
/// falling back to a one-sided difference in coordinates too close to the
/// parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub grad: Vec<f64>,
    /// Coordinates that used a one-sided difference.
    pub one_sided: Vec<usize>,
    /// Objective at `psi` when it was needed (one-sided differences).
    pub center: Option<f64>,
    /// `(f(psi + h e_j) + f(psi - h e_j)) / 2` for the first centrally
    /// differenced coordinate, an `O(h^2)` proxy for `f(psi)`.
    pub stencil_mean: Option<f64>,
}

pub const FD_REL_STEP: f64 = 1e-4;

pub fn fd_step(psi_j: f64) -> f64 {
    FD_REL_STEP * psi_j.abs().max(1.0)
}

/// Finite-difference gradient of `f` with a caller-chosen step rule.
pub fn finite_difference<F>(
    mut f: F,
    psi: &[f64],
    lo: &[f64],
    hi: &[f64],
    step: impl Fn(f64) -> f64,
) -> Result<FdGradient>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut grad = vec![0.0; psi.len()];
    let mut one_sided = Vec::new();
    let mut center = None;
    let mut stencil_mean = None;
    let mut p = psi.to_vec();
    for j in 0..psi.len() {
        let h = step(psi[j]);
        let up_ok = psi[j] + h <= hi[j];
        let dn_ok = psi[j] - h >= lo[j];
        grad[j] = if up_ok && dn_ok {
            p[j] = psi[j] + h;
            let up = f(&p)?;
            p[j] = psi[j] - h;
            let dn = f(&p)?;
            stencil_mean.get_or_insert(0.5 * (up + dn));
            (up - dn) / (2.0 * h)
        } else {
            one_sided.push(j);
            let c = match center {
                Some(c) => c,
                None => {
                    let c = f(psi)?;
                    center = Some(c);
                    c
                }
            };
            if up_ok {
                p[j] = psi[j] + h;
                (f(&p)? - c) / h
            } else if dn_ok {
                p[j] = psi[j] - h;
                (c - f(&p)?) / h
            } else {
                return Err(Error::ParameterDomain(format!(
                    "box too narrow for a difference step in coordinate {j}"
                )));
            }
        };
        p[j] = psi[j];
        if !grad[j].is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient component {j}")));
        }
    }
    Ok(FdGradient {
        grad,
        one_sided,
        center,
        stencil_mean,
    })
}

/// Finite-difference gradient of `S` using the same directions for every
/// evaluation.
pub fn objective_gradient(
    sample: &Sample,
    model: &Model,
    cfg: &SlicedObjectiveConfig,
    psi: &[f64],
    directions: &[Direction],
) -> Result<FdGradient> {
    let prepared = PreparedDirections::new(sample, directions, cfg.kind)?;
    gradient_prepared(model, sample, cfg, psi, &prepared, fd_step)
}

pub fn gradient_prepared(
    model: &Model,
    sample: &Sample,
    cfg: &SlicedObjectiveConfig,
    psi: &[f64],
    prepared: &PreparedDirections,
    step: impl Fn(f64) -> f64,
) -> Result<FdGradient> {
    model.check_psi(psi)?;
    let b = model.bounds();
    finite_difference(
        |p| objective_prepared(model, sample, cfg, p, prepared),
        psi,
        &b.lo,
        &b.hi,
        step,
    )
}
