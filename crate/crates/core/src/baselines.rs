//! Comparison estimators: maximum likelihood for the uniforms, the oracle
//! Jensen–Shannon estimator (the infinite-simulation limit of a GAN), and
//! indirect inference with an OLS auxiliary model for the auction.

use serde::{Deserialize, Serialize};

use crate::distances::QuadGrid;
use crate::error::{Error, Result};
use crate::models::{Model, ModelKind, ParamBox, UniformLaw};
use crate::objective::{fd_step, finite_difference, FdGradient};
use crate::optimizer::{minimize_objective, AdamConfig, EpochObjective, EstimateResult, Flag};
use crate::rng::{tags, RngHandle};
use crate::sample::Sample;

fn uniform_sample<'a>(sample: &'a Sample, model: &Model) -> Result<&'a [f64]> {
    if model.is_conditional() {
        return Err(Error::Unsupported(format!(
            "{} is not a uniform model",
            model.id()
        )));
    }
    if sample.is_conditional() {
        return Err(Error::InvalidSample(
            "uniform models take unconditional samples".into(),
        ));
    }
    Ok(sample.y())
}

/// Maximum likelihood for the uniform families.
///
/// One-sided: the sample maximum. Two-sided: the log-likelihood is evaluated
/// at every order statistic and at the stationary point `k/T` of each segment
/// between order statistics; the first maximizer in ascending order wins.
/// At an order statistic both the value and the left limit are scored, since
/// for `psi > 1/4` the supremum over a segment is approached from the left
/// and is not attained.
pub fn mle_uniform(sample: &Sample, model: &Model) -> Result<f64> {
    let y = uniform_sample(sample, model)?;
    match model.kind() {
        ModelKind::OneSidedUniform => {
            if y.iter().any(|&v| v < 0.0) {
                return Err(Error::Data(
                    "one-sided uniform data must be nonnegative".into(),
                ));
            }
            let mut m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            model.bounds().project(std::slice::from_mut(&mut m));
            Ok(m)
        }
        ModelKind::TwoSidedUniform => mle_two_sided(y, model.bounds()),
        ModelKind::Auction { .. } => unreachable!(),
    }
}

fn mle_two_sided(y: &[f64], bounds: &ParamBox) -> Result<f64> {
    if y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Data(
            "two-sided uniform data must lie in [0, 1]".into(),
        ));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let t = sorted.len();
    let loglik_with = |psi: f64, n1: usize| {
        let n1 = n1 as f64;
        let n2 = t as f64 - n1;
        let mut l = 0.0;
        if n1 > 0.0 {
            l += n1 * (1.0 / (4.0 * psi)).ln();
        }
        if n2 > 0.0 {
            l += n2 * (3.0 / (4.0 * (1.0 - psi))).ln();
        }
        l
    };
    let loglik = |psi: f64| {
        let at = loglik_with(psi, sorted.partition_point(|&v| v <= psi));
        let left = loglik_with(psi, sorted.partition_point(|&v| v < psi));
        at.max(left)
    };
    let mut candidates: Vec<f64> = sorted.clone();
    for k in 0..=t {
        let c = k as f64 / t as f64;
        let lo = if k == 0 { 0.0 } else { sorted[k - 1] };
        let hi = if k == t { 1.0 } else { sorted[k] };
        if c > lo && c < hi {
            candidates.push(c);
        }
    }
    candidates.retain(|&c| bounds.contains(&[c]));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best: Option<(f64, f64)> = None;
    for c in candidates {
        let l = loglik(c);
        if best.is_none_or(|(bl, _)| l > bl) {
            best = Some((l, c));
        }
    }
    best.map(|(_, c)| c)
        .ok_or_else(|| Error::Data("no likelihood candidate inside the parameter box".into()))
}

/// Breakpoints of both densities, used to integrate piecewise-constant
/// uniform densities exactly.
fn density_breaks(a: &UniformLaw, b: &UniformLaw) -> Vec<f64> {
    let mut br = vec![0.0, a.psi(), b.psi(), a.support().1, b.support().1];
    br.sort_by(f64::total_cmp);
    br.dedup();
    br
}

/// `int f log(2f/(f0 + f)) f dy`-type integral with a `0 log 0 = 0`
/// convention, by composite Gauss–Legendre on the density breakpoints.
fn integrate_pieces(breaks: &[f64], mut integrand: impl FnMut(f64) -> f64) -> f64 {
    let grid = QuadGrid::composite(breaks, 4);
    grid.nodes
        .iter()
        .zip(&grid.weights)
        .map(|(s, w)| w * integrand(*s))
        .sum()
}

fn js_term(f: f64, other: f64) -> f64 {
    if f <= 0.0 {
        0.0
    } else {
        f * (2.0 * f / (f + other)).ln()
    }
}

/// The oracle Jensen–Shannon objective at `psi` with true `psi0`.
pub fn js_objective(sample: &Sample, model: &Model, psi0: f64, psi: f64) -> Result<f64> {
    let y = uniform_sample(sample, model)?;
    let f0 = UniformLaw::new(model, psi0)?;
    let f = UniformLaw::new(model, psi)?;
    let mut data = 0.0;
    for &v in y {
        let d0 = f0.density(v);
        if d0 <= 0.0 {
            return Err(Error::Data(format!(
                "observation {v} has zero density under the true parameter"
            )));
        }
        data += (2.0 * d0 / (d0 + f.density(v))).ln();
    }
    data /= 2.0 * y.len() as f64;
    let integral = integrate_pieces(&density_breaks(&f0, &f), |s| {
        js_term(f.density(s), f0.density(s))
    });
    Ok(data + 0.5 * integral)
}

/// Population Jensen–Shannon divergence between the laws at `psi0` and `psi`.
pub fn js_population(model: &Model, psi0: f64, psi: f64) -> Result<f64> {
    let f0 = UniformLaw::new(model, psi0)?;
    let f = UniformLaw::new(model, psi)?;
    let br = density_breaks(&f0, &f);
    let a = integrate_pieces(&br, |s| js_term(f0.density(s), f.density(s)));
    let b = integrate_pieces(&br, |s| js_term(f.density(s), f0.density(s)));
    Ok((0.5 * (a + b)).max(0.0))
}

/// `KL(f_psi0 || f_psi)`; `+inf` when the true law puts mass where
/// `f_psi` vanishes.
pub fn kl_population(model: &Model, psi0: f64, psi: f64) -> Result<f64> {
    let f0 = UniformLaw::new(model, psi0)?;
    let f = UniformLaw::new(model, psi)?;
    let br = density_breaks(&f0, &f);
    let grid = QuadGrid::composite(&br, 4);
    let mut total = 0.0;
    for (s, w) in grid.nodes.iter().zip(&grid.weights) {
        let d0 = f0.density(*s);
        if d0 <= 0.0 {
            continue;
        }
        let d = f.density(*s);
        if d <= 0.0 {
            return Ok(f64::INFINITY);
        }
        total += w * d0 * (d0 / d).ln();
    }
    Ok(total.max(0.0))
}

/// Minimize the oracle JS objective by grid search followed by
/// golden-section refinement around the best grid point.
pub fn oracle_js(sample: &Sample, model: &Model, psi0: f64, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Config(
            "oracle JS needs a nonempty parameter grid".into(),
        ));
    }
    let mut g: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|p| model.bounds().contains(&[*p]))
        .collect();
    g.sort_by(f64::total_cmp);
    if g.is_empty() {
        return Err(Error::Config(
            "oracle JS grid lies outside the parameter box".into(),
        ));
    }
    let f = |p: f64| js_objective(sample, model, psi0, p);
    let mut vals = Vec::with_capacity(g.len());
    for &p in &g {
        vals.push(f(p)?);
    }
    let i = (0..g.len()).fold(0, |b, i| if vals[i] < vals[b] { i } else { b });
    let (mut a, mut b) = (g[i.saturating_sub(1)], g[(i + 1).min(g.len() - 1)]);
    let (mut best_p, mut best_v) = (g[i], vals[i]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
        if b - a < 1e-12 * (1.0 + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    for (p, v) in [(c, fc), (d, fd)] {
        if v < best_v {
            best_p = p;
            best_v = v;
        }
    }
    Ok(best_p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Identity,
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndirectConfig {
    pub n_synthetic: usize,
    pub weighting: Weighting,
    pub rng: RngHandle,
    pub optimizer: AdamConfig,
}

impl Default for IndirectConfig {
    fn default() -> Self {
        Self {
            n_synthetic: 100,
            weighting: Weighting::Optimal,
            rng: RngHandle::new(0, 0),
            optimizer: AdamConfig::default(),
        }
    }
}

/// OLS fit of `y` on `(1, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ols {
    pub beta: [f64; 2],
    pub sigma2: f64,
    /// `X'X` with `X = [1, x]`.
    pub xtx: [[f64; 2]; 2],
}

pub fn ols(y: &[f64], x: &[f64]) -> Result<Ols> {
    if y.len() != x.len() || y.len() < 2 {
        return Err(Error::Regression(
            "need at least two paired observations".into(),
        ));
    }
    let n = y.len() as f64;
    let sx: f64 = x.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let det = n * sxx - sx * sx;
    if !(det.abs() > 1e-12 * n * sxx.max(1.0)) {
        return Err(Error::Regression("singular design matrix".into()));
    }
    let mx = sx / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxxc: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxxc;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let dof = (y.len() as f64 - 2.0).max(1.0);
    Ok(Ols {
        beta: [intercept, slope],
        sigma2: rss / dof,
        xtx: [[n, sx], [sx, sxx]],
    })
}

/// Indirect inference objective with common random numbers.
///
/// Synthetic samples reuse the observed covariates, so the average of the
/// synthetic OLS coefficients equals the OLS fit of the averaged synthetic
/// responses, `h(x_t, psi) (1/(m-1) + mean_s E_st / m)`.
pub struct IndirectObjective {
    x: Vec<f64>,
    mean_e: Vec<f64>,
    bidders: f64,
    beta_hat: [f64; 2],
    weight: [[f64; 2]; 2],
    bounds: ParamBox,
    weight_fallback: bool,
}

impl IndirectObjective {
    pub fn new(sample: &Sample, model: &Model, cfg: &IndirectConfig) -> Result<Self> {
        let bidders = model.bidders().ok_or_else(|| {
            Error::Unsupported(format!(
                "indirect inference is auction-only, got {}",
                model.id()
            ))
        })?;
        if cfg.n_synthetic == 0 {
            return Err(Error::Config("n_synthetic must be at least 1".into()));
        }
        let x = sample
            .x()
            .filter(|_| sample.covariate_dim() == 1)
            .ok_or_else(|| {
                Error::InvalidSample("indirect inference needs one scalar covariate".into())
            })?
            .to_vec();
        let fit = ols(sample.y(), &x)?;
        let t = x.len();
        let base = cfg.rng.child(tags::SYNTHETIC);
        let mut mean_e = vec![0.0; t];
        for s in 0..cfg.n_synthetic {
            let mut r = base.stream(s as u64).rng();
            for e in mean_e.iter_mut() {
                *e += rand::Rng::sample::<f64, _>(&mut r, rand_distr::Exp1);
            }
        }
        mean_e.iter_mut().for_each(|e| *e /= cfg.n_synthetic as f64);
        let identity = [[1.0, 0.0], [0.0, 1.0]];
        let (weight, weight_fallback) = match cfg.weighting {
            Weighting::Identity => (identity, false),
            Weighting::Optimal => {
                // Inverse of the OLS covariance sigma^2 (X'X/T)^{-1}.
                let tt = t as f64;
                let w = [
                    [
                        fit.xtx[0][0] / tt / fit.sigma2,
                        fit.xtx[0][1] / tt / fit.sigma2,
                    ],
                    [
                        fit.xtx[1][0] / tt / fit.sigma2,
                        fit.xtx[1][1] / tt / fit.sigma2,
                    ],
                ];
                let det = w[0][0] * w[1][1] - w[0][1] * w[1][0];
                if fit.sigma2 > 0.0
                    && w[0][0] > 0.0
                    && det > 0.0
                    && w.iter().flatten().all(|v| v.is_finite())
                {
                    (w, false)
                } else {
                    (identity, true)
                }
            }
        };
        Ok(Self {
            x,
            mean_e,
            bidders: bidders as f64,
            beta_hat: fit.beta,
            weight,
            bounds: model.bounds().clone(),
            weight_fallback,
        })
    }

    pub fn beta_hat(&self) -> [f64; 2] {
        self.beta_hat
    }

    /// Average synthetic OLS coefficients at `psi`.
    pub fn beta_tilde(&self, psi: &[f64]) -> Result<[f64; 2]> {
        let m = self.bidders;
        let y: Vec<f64> = self
            .x
            .iter()
            .zip(&self.mean_e)
            .map(|(&x, &e)| (psi[0] + psi[1] * x).exp() * (1.0 / (m - 1.0) + e / m))
            .collect();
        Ok(ols(&y, &self.x)?.beta)
    }

    pub fn value(&self, psi: &[f64]) -> Result<f64> {
        let b = self.beta_tilde(psi)?;
        let d = [self.beta_hat[0] - b[0], self.beta_hat[1] - b[1]];
        let w = &self.weight;
        let v = d[0] * (w[0][0] * d[0] + w[0][1] * d[1]) + d[1] * (w[1][0] * d[0] + w[1][1] * d[1]);
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite indirect objective at {psi:?}"
            )));
        }
        Ok(v)
    }
}

impl EpochObjective for IndirectObjective {
    fn bounds(&self) -> &ParamBox {
        &self.bounds
    }
    fn begin_epoch(&mut self, _epoch: usize) -> Result<()> {
        Ok(())
    }
    fn epoch_value(&self, psi: &[f64]) -> Result<f64> {
        self.value(psi)
    }
    fn epoch_gradient(&self, psi: &[f64]) -> Result<FdGradient> {
        finite_difference(
            |p| self.value(p),
            psi,
            &self.bounds.lo,
            &self.bounds.hi,
            fd_step,
        )
    }
    fn eval_value(&self, psi: &[f64]) -> Result<f64> {
        self.value(psi)
    }
}

/// Indirect inference for the auction model, minimized with the shared Adam
/// routine.
pub fn indirect_inference(
    sample: &Sample,
    model: &Model,
    cfg: &IndirectConfig,
    init: &[f64],
) -> Result<EstimateResult> {
    model.check_psi(init)?;
    let mut obj = IndirectObjective::new(sample, model, cfg)?;
    let mut res = minimize_objective(&mut obj, &cfg.optimizer, init)?;
    if obj.weight_fallback {
        res.flags.push(Flag::WeightFallback);
    }
    Ok(res)
}
