//! The three structural models: one-sided uniform `U[0, psi]`, the
//! two-sided uniform with a density jump at `psi`, and the first-price
//! auction winning-bid model with covariate-dependent support.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::distances::{Cdf1d, Quantile1d};
use crate::error::{Error, Result};
use crate::rng::RngHandle;
use crate::sample::Sample;

/// `U[0, psi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSidedUniform {
    pub psi: f64,
}

impl OneSidedUniform {
    pub fn new(psi: f64) -> Result<Self> {
        if !(psi > 0.0) || !psi.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "one-sided uniform needs psi > 0, got {psi}"
            )));
        }
        Ok(Self { psi })
    }

    pub fn cdf(&self, y: f64) -> f64 {
        (y / self.psi).clamp(0.0, 1.0)
    }

    pub fn density(&self, y: f64) -> f64 {
        if (0.0..=self.psi).contains(&y) {
            1.0 / self.psi
        } else {
            0.0
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.psi * p
    }

    pub fn deriv_cdf_psi(&self, y: f64) -> f64 {
        if y > 0.0 && y < self.psi {
            -y / (self.psi * self.psi)
        } else {
            0.0
        }
    }
}

/// Density `1/(4 psi)` on `(0, psi]` and `3/(4(1 - psi))` on `(psi, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSidedUniform {
    pub psi: f64,
}

impl TwoSidedUniform {
    pub fn new(psi: f64) -> Result<Self> {
        if !(psi > 0.0 && psi < 1.0) {
            return Err(Error::ParameterDomain(format!(
                "two-sided uniform needs 0 < psi < 1, got {psi}"
            )));
        }
        Ok(Self { psi })
    }

    /// Left-branch value `y/(4 psi)` at the jump `y = psi`.
    pub fn cdf(&self, y: f64) -> f64 {
        let p = self.psi;
        if y <= 0.0 {
            0.0
        } else if y <= p {
            y / (4.0 * p)
        } else if y < 1.0 {
            1.0 - 3.0 * (1.0 - y) / (4.0 * (1.0 - p))
        } else {
            1.0
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        let p = self.psi;
        if y > 0.0 && y <= p {
            1.0 / (4.0 * p)
        } else if y > p && y <= 1.0 {
            3.0 / (4.0 * (1.0 - p))
        } else {
            0.0
        }
    }

    pub fn quantile(&self, s: f64) -> f64 {
        let p = self.psi;
        if s <= 0.25 {
            4.0 * p * s
        } else {
            p + 4.0 / 3.0 * (1.0 - p) * (s - 0.25)
        }
    }

    pub fn deriv_cdf_psi(&self, y: f64) -> f64 {
        let p = self.psi;
        if y > 0.0 && y < p {
            -y / (4.0 * p * p)
        } else if y > p && y < 1.0 {
            -3.0 * (1.0 - y) / (4.0 * (1.0 - p) * (1.0 - p))
        } else {
            0.0
        }
    }
}

/// Winning bid of a first-price auction with `m` bidders.
///
/// Given `X = x`, `Y - g` is exponential with mean `h/m`, where
/// `h = exp(psi1 + psi2 x)` and the support boundary is `g = h/(m - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionModel {
    pub psi: [f64; 2],
    pub bidders: u32,
}

impl AuctionModel {
    pub fn new(psi: [f64; 2], bidders: u32) -> Result<Self> {
        if bidders < 2 {
            return Err(Error::ParameterDomain(format!(
                "auction needs at least 2 bidders, got {bidders}"
            )));
        }
        if psi.iter().any(|p| !p.is_finite()) {
            return Err(Error::ParameterDomain(
                "non-finite auction parameter".into(),
            ));
        }
        Ok(Self { psi, bidders })
    }

    pub fn h(&self, x: f64) -> f64 {
        (self.psi[0] + self.psi[1] * x).exp()
    }

    pub fn boundary(&self, x: f64) -> f64 {
        self.h(x) / (self.bidders as f64 - 1.0)
    }

    pub fn cdf(&self, y: f64, x: f64) -> f64 {
        let h = self.h(x);
        let m = self.bidders as f64;
        let g = h / (m - 1.0);
        if y <= g {
            0.0
        } else {
            -(-(m / h) * (y - g)).exp_m1()
        }
    }

    pub fn density(&self, y: f64, x: f64) -> f64 {
        let h = self.h(x);
        let m = self.bidders as f64;
        let g = h / (m - 1.0);
        if y < g {
            0.0
        } else {
            m / h * (-(m / h) * (y - g)).exp()
        }
    }

    pub fn quantile(&self, p: f64, x: f64) -> f64 {
        let h = self.h(x);
        let m = self.bidders as f64;
        h / (m - 1.0) - (h / m) * (-p).ln_1p()
    }

    pub fn deriv_cdf_psi(&self, y: f64, x: f64) -> [f64; 2] {
        let h = self.h(x);
        let m = self.bidders as f64;
        let g = h / (m - 1.0);
        if y <= g {
            return [0.0, 0.0];
        }
        let d = -(-(m / h) * (y - g)).exp() * m * y / h;
        [d, d * x]
    }
}

/// Model identifiers used in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "uniform1")]
    OneSidedUniform,
    #[serde(rename = "uniform2")]
    TwoSidedUniform,
    #[serde(rename = "auction")]
    Auction,
}

impl ModelId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelId::OneSidedUniform => "uniform1",
            ModelId::TwoSidedUniform => "uniform2",
            ModelId::Auction => "auction",
        }
    }
}

impl std::str::FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform1" => Ok(ModelId::OneSidedUniform),
            "uniform2" => Ok(ModelId::TwoSidedUniform),
            "auction" => Ok(ModelId::Auction),
            other => Err(Error::Config(format!("unknown model id {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coordinate-wise parameter bounds. Iterates are clamped onto the closed
/// box, whose edges sit strictly inside each model's natural domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Config(
                "parameter box bounds must be nonempty and of equal length".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Config(
                "parameter box needs lo < hi in every coordinate".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, psi: &[f64]) -> bool {
        psi.len() == self.dim()
            && psi
                .iter()
                .zip(&self.lo)
                .zip(&self.hi)
                .all(|((p, l), h)| p >= l && p <= h)
    }

    /// Clamp in place. Returns true if any coordinate moved.
    pub fn project(&self, psi: &mut [f64]) -> bool {
        let mut moved = false;
        for ((p, l), h) in psi.iter_mut().zip(&self.lo).zip(&self.hi) {
            let c = p.clamp(*l, *h);
            moved |= c != *p;
            *p = c;
        }
        moved
    }

    /// True if any coordinate is within `tol` of its bound.
    pub fn on_boundary(&self, psi: &[f64], tol: f64) -> bool {
        psi.iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .any(|((p, l), h)| p - l <= tol || h - p <= tol)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    OneSidedUniform,
    TwoSidedUniform,
    Auction { bidders: u32 },
}

/// A parametric family together with its parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    bounds: ParamBox,
}

/// Parameter evaluated for one model family.
pub(crate) enum Law {
    One(OneSidedUniform),
    Two(TwoSidedUniform),
    Auction(AuctionModel),
}

impl Model {
    pub fn one_sided() -> Self {
        Self {
            kind: ModelKind::OneSidedUniform,
            bounds: ParamBox {
                lo: vec![1e-6],
                hi: vec![1e6],
            },
        }
    }

    pub fn two_sided() -> Self {
        Self {
            kind: ModelKind::TwoSidedUniform,
            bounds: ParamBox {
                lo: vec![1e-6],
                hi: vec![1.0 - 1e-6],
            },
        }
    }

    pub fn auction(bidders: u32) -> Result<Self> {
        if bidders < 2 {
            return Err(Error::ParameterDomain(format!(
                "auction needs at least 2 bidders, got {bidders}"
            )));
        }
        Ok(Self {
            kind: ModelKind::Auction { bidders },
            bounds: ParamBox {
                lo: vec![-20.0; 2],
                hi: vec![20.0; 2],
            },
        })
    }

    /// `bidders` is only used by the auction model.
    pub fn from_id(id: ModelId, bidders: u32) -> Result<Self> {
        match id {
            ModelId::OneSidedUniform => Ok(Self::one_sided()),
            ModelId::TwoSidedUniform => Ok(Self::two_sided()),
            ModelId::Auction => Self::auction(bidders),
        }
    }

    /// Replace the default box. It must lie inside the natural domain.
    pub fn with_bounds(mut self, bounds: ParamBox) -> Result<Self> {
        if bounds.dim() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: bounds.dim(),
            });
        }
        let ok = match self.kind {
            ModelKind::OneSidedUniform => bounds.lo[0] > 0.0 && bounds.hi[0].is_finite(),
            ModelKind::TwoSidedUniform => bounds.lo[0] > 0.0 && bounds.hi[0] < 1.0,
            ModelKind::Auction { .. } => bounds.lo.iter().chain(&bounds.hi).all(|b| b.is_finite()),
        };
        if !ok {
            return Err(Error::Config(format!(
                "parameter box {bounds:?} leaves the {} domain",
                self.id()
            )));
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn id(&self) -> ModelId {
        match self.kind {
            ModelKind::OneSidedUniform => ModelId::OneSidedUniform,
            ModelKind::TwoSidedUniform => ModelId::TwoSidedUniform,
            ModelKind::Auction { .. } => ModelId::Auction,
        }
    }

    pub fn bounds(&self) -> &ParamBox {
        &self.bounds
    }

    pub fn n_params(&self) -> usize {
        match self.kind {
            ModelKind::Auction { .. } => 2,
            _ => 1,
        }
    }

    pub fn is_conditional(&self) -> bool {
        matches!(self.kind, ModelKind::Auction { .. })
    }

    pub fn covariate_dim(&self) -> usize {
        if self.is_conditional() {
            1
        } else {
            0
        }
    }

    pub fn bidders(&self) -> Option<u32> {
        match self.kind {
            ModelKind::Auction { bidders } => Some(bidders),
            _ => None,
        }
    }

    pub fn check_psi(&self, psi: &[f64]) -> Result<()> {
        if psi.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: psi.len(),
            });
        }
        if !self.bounds.contains(psi) {
            return Err(Error::ParameterDomain(format!(
                "{psi:?} outside the {} parameter box",
                self.id()
            )));
        }
        Ok(())
    }

    pub(crate) fn law(&self, psi: &[f64]) -> Result<Law> {
        self.check_psi(psi)?;
        Ok(match self.kind {
            ModelKind::OneSidedUniform => Law::One(OneSidedUniform::new(psi[0])?),
            ModelKind::TwoSidedUniform => Law::Two(TwoSidedUniform::new(psi[0])?),
            ModelKind::Auction { bidders } => {
                Law::Auction(AuctionModel::new([psi[0], psi[1]], bidders)?)
            }
        })
    }

    pub fn auction_at(&self, psi: &[f64]) -> Result<AuctionModel> {
        match self.law(psi)? {
            Law::Auction(a) => Ok(a),
            _ => Err(Error::Unsupported(format!(
                "{} is not the auction model",
                self.id()
            ))),
        }
    }

    fn covariate(&self, x: Option<&[f64]>) -> Result<f64> {
        match x {
            Some([v]) => Ok(*v),
            Some(row) => Err(Error::DimensionMismatch {
                expected: 1,
                got: row.len(),
            }),
            None => Err(Error::InvalidSample(
                "auction model needs a covariate".into(),
            )),
        }
    }

    /// `F(y | x; psi)`. `x` is ignored by the uniforms.
    pub fn cdf(&self, y: f64, x: Option<&[f64]>, psi: &[f64]) -> Result<f64> {
        Ok(match self.law(psi)? {
            Law::One(m) => m.cdf(y),
            Law::Two(m) => m.cdf(y),
            Law::Auction(m) => m.cdf(y, self.covariate(x)?),
        })
    }

    pub fn density(&self, y: f64, x: Option<&[f64]>, psi: &[f64]) -> Result<f64> {
        Ok(match self.law(psi)? {
            Law::One(m) => m.density(y),
            Law::Two(m) => m.density(y),
            Law::Auction(m) => m.density(y, self.covariate(x)?),
        })
    }

    pub fn quantile(&self, p: f64, x: Option<&[f64]>, psi: &[f64]) -> Result<f64> {
        Ok(match self.law(psi)? {
            Law::One(m) => m.quantile(p),
            Law::Two(m) => m.quantile(p),
            Law::Auction(m) => m.quantile(p, self.covariate(x)?),
        })
    }

    /// Auction: `g(x, psi)`. Uniforms: the parameter-dependent endpoint or
    /// jump location `psi`.
    pub fn support_boundary(&self, x: Option<&[f64]>, psi: &[f64]) -> Result<f64> {
        Ok(match self.law(psi)? {
            Law::One(m) => m.psi,
            Law::Two(m) => m.psi,
            Law::Auction(m) => m.boundary(self.covariate(x)?),
        })
    }

    /// Kink and jump locations of the unconditional CDF.
    pub fn cdf_knots(&self, psi: &[f64]) -> Result<Vec<f64>> {
        match self.law(psi)? {
            Law::One(m) => Ok(vec![0.0, m.psi]),
            Law::Two(m) => Ok(vec![0.0, m.psi, 1.0]),
            Law::Auction(_) => Err(Error::Unsupported(
                "auction knots depend on covariates".into(),
            )),
        }
    }

    /// Probability levels where the unconditional quantile kinks.
    pub fn quantile_kinks(&self, psi: &[f64]) -> Result<Vec<f64>> {
        match self.law(psi)? {
            Law::One(_) => Ok(vec![]),
            Law::Two(_) => Ok(vec![0.25]),
            Law::Auction(_) => Err(Error::Unsupported(
                "auction quantile depends on covariates".into(),
            )),
        }
    }

    /// `dF(y | x; psi)/dpsi`, zero below the support boundary and at kinks.
    pub fn deriv_cdf_psi(&self, y: f64, x: Option<&[f64]>, psi: &[f64]) -> Result<Vec<f64>> {
        Ok(match self.law(psi)? {
            Law::One(m) => vec![m.deriv_cdf_psi(y)],
            Law::Two(m) => vec![m.deriv_cdf_psi(y)],
            Law::Auction(m) => m.deriv_cdf_psi(y, self.covariate(x)?).to_vec(),
        })
    }

    /// Draw `t` observations. Uniforms use the inverse CDF; the auction
    /// draws `X = U^2` with `U ~ U[0, 2]` and `Y = g + (h/m) E`, `E ~ Exp(1)`.
    pub fn sample(&self, rng: &RngHandle, t: usize, psi: &[f64]) -> Result<Sample> {
        if t == 0 {
            return Err(Error::InvalidSample("sample size must be positive".into()));
        }
        let law = self.law(psi)?;
        let mut r = rng.rng();
        match law {
            Law::One(m) => {
                Sample::unconditional((0..t).map(|_| m.quantile(r.random::<f64>())).collect())
            }
            Law::Two(m) => {
                Sample::unconditional((0..t).map(|_| m.quantile(r.random::<f64>())).collect())
            }
            Law::Auction(m) => {
                let (xs, es) = draw_auction_design(&mut r, t);
                let bm = m.bidders as f64;
                let y = xs
                    .iter()
                    .zip(&es)
                    .map(|(&x, &e)| {
                        let h = m.h(x);
                        h / (bm - 1.0) + h / bm * e
                    })
                    .collect();
                Sample::conditional(y, xs, 1)
            }
        }
    }

    /// Closed-form population Cramér distance between the laws at `psi` and
    /// `psi0` (uniforms only).
    pub fn oracle_cramer_sq(&self, psi: f64, psi0: f64) -> Result<f64> {
        self.check_psi(&[psi])?;
        self.check_psi(&[psi0])?;
        let (a, b) = (psi.min(psi0), psi.max(psi0));
        let d = b - a;
        match self.kind {
            ModelKind::OneSidedUniform => Ok(d * d / (3.0 * b)),
            ModelKind::TwoSidedUniform => {
                // Three linear pieces of F_a - F_b on [0, a], [a, b], [b, 1].
                let left = a * d * d / (48.0 * b * b);
                let p = d / (4.0 * b);
                let q = 3.0 * d / (4.0 * (1.0 - a));
                let middle = d * (p * p + p * q + q * q) / 3.0;
                let right = 9.0 * d * d * (1.0 - b) / (48.0 * (1.0 - a) * (1.0 - a));
                Ok(left + middle + right)
            }
            ModelKind::Auction { .. } => Err(Error::Unsupported(
                "no closed-form Cramér oracle for the auction model".into(),
            )),
        }
    }

    /// Closed-form population 2-Wasserstein distance (uniforms only).
    /// Both uniforms give `(psi - psi0)^2 / 3`.
    pub fn oracle_wasserstein_sq(&self, psi: f64, psi0: f64) -> Result<f64> {
        self.check_psi(&[psi])?;
        self.check_psi(&[psi0])?;
        match self.kind {
            ModelKind::OneSidedUniform | ModelKind::TwoSidedUniform => {
                Ok((psi - psi0).powi(2) / 3.0)
            }
            ModelKind::Auction { .. } => Err(Error::Unsupported(
                "no closed-form Wasserstein oracle for the auction model".into(),
            )),
        }
    }

    /// `int R(s; psi, psi0)^2 ds` with
    /// `R = F(s; psi) - F(s; psi0) - D(s; psi0)(psi - psi0)`.
    pub fn oracle_residual_sq(&self, psi: f64, psi0: f64) -> Result<f64> {
        self.check_psi(&[psi])?;
        self.check_psi(&[psi0])?;
        let d = psi - psi0;
        let d3 = d * d * d;
        match self.kind {
            ModelKind::OneSidedUniform => Ok(if psi < psi0 {
                -d3 / (3.0 * psi0 * psi0)
            } else {
                d3 / (3.0 * psi * psi0)
            }),
            ModelKind::TwoSidedUniform => Ok(if psi < psi0 {
                -d3 * (4.0 * psi * (psi0 - 1.0) + 12.0 * psi0 * psi0 - 4.0 * psi0 + 1.0)
                    / (48.0 * (psi - 1.0) * (psi0 - 1.0) * psi0 * psi0)
            } else {
                d3 * (12.0 * psi * psi0 + 4.0 * psi0 * psi0 - 8.0 * psi0 + 1.0)
                    / (48.0 * psi * psi0 * (1.0 - psi0) * (1.0 - psi0))
            }),
            ModelKind::Auction { .. } => Err(Error::Unsupported(
                "no residual oracle for the auction model".into(),
            )),
        }
    }
}

/// Covariates `X = U^2`, `U ~ U[0, 2]`, and standard exponential draws,
/// interleaved per observation.
pub(crate) fn draw_auction_design<R: Rng + ?Sized>(rng: &mut R, t: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(t);
    let mut es = Vec::with_capacity(t);
    for _ in 0..t {
        let u = 2.0 * rng.random::<f64>();
        xs.push(u * u);
        es.push(rng.sample::<f64, _>(Exp1));
    }
    (xs, es)
}

/// Unconditional uniform law at a fixed parameter, usable by the
/// distance functionals.
#[derive(Debug, Clone, Copy)]
pub struct UniformLaw {
    law: UniformKind,
}

#[derive(Debug, Clone, Copy)]
enum UniformKind {
    One(OneSidedUniform),
    Two(TwoSidedUniform),
}

impl UniformLaw {
    pub fn new(model: &Model, psi: f64) -> Result<Self> {
        match model.law(&[psi])? {
            Law::One(m) => Ok(Self {
                law: UniformKind::One(m),
            }),
            Law::Two(m) => Ok(Self {
                law: UniformKind::Two(m),
            }),
            Law::Auction(_) => Err(Error::Unsupported(
                "the auction model is conditional".into(),
            )),
        }
    }

    pub fn psi(&self) -> f64 {
        match self.law {
            UniformKind::One(m) => m.psi,
            UniformKind::Two(m) => m.psi,
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        match self.law {
            UniformKind::One(m) => m.density(y),
            UniformKind::Two(m) => m.density(y),
        }
    }

    pub fn deriv_cdf_psi(&self, y: f64) -> f64 {
        match self.law {
            UniformKind::One(m) => m.deriv_cdf_psi(y),
            UniformKind::Two(m) => m.deriv_cdf_psi(y),
        }
    }

    /// Support `[0, psi]` or `[0, 1]`.
    pub fn support(&self) -> (f64, f64) {
        match self.law {
            UniformKind::One(m) => (0.0, m.psi),
            UniformKind::Two(_) => (0.0, 1.0),
        }
    }
}

impl Cdf1d for UniformLaw {
    fn cdf(&self, s: f64) -> f64 {
        match self.law {
            UniformKind::One(m) => m.cdf(s),
            UniformKind::Two(m) => m.cdf(s),
        }
    }

    fn knots(&self) -> Vec<f64> {
        match self.law {
            UniformKind::One(m) => vec![0.0, m.psi],
            UniformKind::Two(m) => vec![0.0, m.psi, 1.0],
        }
    }
}

impl Quantile1d for UniformLaw {
    fn quantile(&self, p: f64) -> f64 {
        match self.law {
            UniformKind::One(m) => m.quantile(p),
            UniformKind::Two(m) => m.quantile(p),
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self.law {
            UniformKind::One(_) => vec![],
            UniformKind::Two(_) => vec![0.25],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_examples() {
        let one = Model::one_sided();
        let two = Model::two_sided();
        let auc = Model::auction(6).unwrap();
        assert_eq!(one.cdf(1.0, None, &[2.0]).unwrap(), 0.5);
        assert_eq!(two.cdf(0.25, None, &[0.25]).unwrap(), 0.25);
        let g = auc.support_boundary(Some(&[0.7]), &[1.0, 0.5]).unwrap();
        assert_eq!(auc.cdf(g, Some(&[0.7]), &[1.0, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn support_boundary_examples() {
        let auc = Model::auction(6).unwrap();
        assert_relative_eq!(
            auc.support_boundary(Some(&[0.0]), &[0.0, 1.0]).unwrap(),
            0.2,
            max_relative = 1e-15
        );
        assert_eq!(
            Model::one_sided().support_boundary(None, &[2.0]).unwrap(),
            2.0
        );
        assert_eq!(
            Model::two_sided().support_boundary(None, &[0.5]).unwrap(),
            0.5
        );
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            Model::two_sided().cdf(0.5, None, &[1.2]),
            Err(Error::ParameterDomain(_))
        ));
        assert!(matches!(
            Model::one_sided().cdf(0.5, None, &[-1.0]),
            Err(Error::ParameterDomain(_))
        ));
        assert!(Model::auction(1).is_err());
        assert!(Model::auction(6)
            .unwrap()
            .cdf(1.0, None, &[0.0, 0.0])
            .is_err());
        assert!(Model::auction(6)
            .unwrap()
            .oracle_cramer_sq(1.0, 1.0)
            .is_err());
    }

    #[test]
    fn oracle_examples() {
        let one = Model::one_sided();
        assert_relative_eq!(
            one.oracle_cramer_sq(1.5, 2.0).unwrap(),
            0.0416667,
            max_relative = 1e-5
        );
        assert_relative_eq!(
            one.oracle_cramer_sq(3.0, 2.0).unwrap(),
            1.0 / 9.0,
            max_relative = 1e-12
        );
        assert_eq!(one.oracle_cramer_sq(2.0, 2.0).unwrap(), 0.0);
        assert_relative_eq!(
            one.oracle_residual_sq(2.2, 2.0).unwrap(),
            6.0606e-4,
            max_relative = 1e-4
        );
        let two = Model::two_sided();
        assert_relative_eq!(
            two.oracle_residual_sq(0.5, 0.25).unwrap(),
            3.4722e-3,
            max_relative = 1e-4
        );
        assert_eq!(two.oracle_residual_sq(0.3, 0.3).unwrap(), 0.0);
        assert_relative_eq!(
            two.oracle_wasserstein_sq(0.5, 0.25).unwrap(),
            0.0208333,
            max_relative = 1e-5
        );
    }

    #[test]
    fn derivative_examples() {
        let one = Model::one_sided();
        assert_eq!(one.deriv_cdf_psi(1.0, None, &[2.0]).unwrap(), vec![-0.25]);
        assert_eq!(one.deriv_cdf_psi(-1.0, None, &[2.0]).unwrap(), vec![0.0]);
        let auc = Model::auction(6).unwrap();
        assert_eq!(
            auc.deriv_cdf_psi(0.01, Some(&[1.0]), &[1.0, 0.5]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn auction_derivative_matches_finite_difference() {
        let auc = Model::auction(6).unwrap();
        let psi = [1.0, 0.5];
        for &(y, x) in &[(1.5, 0.3), (3.0, 1.7), (10.0, 3.9), (0.8, 0.0)] {
            let d = auc.deriv_cdf_psi(y, Some(&[x]), &psi).unwrap();
            for j in 0..2 {
                let h = 1e-5;
                let mut p = psi;
                p[j] += h;
                let up = auc.cdf(y, Some(&[x]), &p).unwrap();
                p[j] -= 2.0 * h;
                let dn = auc.cdf(y, Some(&[x]), &p).unwrap();
                assert!(
                    (d[j] - (up - dn) / (2.0 * h)).abs() < 1e-6,
                    "y={y} x={x} j={j}"
                );
            }
        }
    }

    #[test]
    fn cdfs_are_monotone_and_bounded() {
        let models = [
            (Model::one_sided(), vec![1.7]),
            (Model::two_sided(), vec![0.35]),
            (Model::auction(6).unwrap(), vec![1.0, 0.5]),
        ];
        for (model, psi) in &models {
            let mut prev = 0.0;
            for i in 0..4000 {
                let y = -1.0 + i as f64 * 0.01;
                let f = model.cdf(y, Some(&[1.3]), psi).unwrap();
                assert!((0.0..=1.0).contains(&f));
                assert!(f >= prev);
                prev = f;
            }
        }
    }

    #[test]
    fn auction_conditional_mean() {
        let auc = Model::auction(6).unwrap();
        let psi = [1.0, 0.5];
        let s = auc.sample(&RngHandle::new(11, 0), 1_000_000, &psi).unwrap();
        // E[Y | X] = h(X) * 11/30, so E[Y / h(X)] = 11/30.
        let a = auc.auction_at(&psi).unwrap();
        let mean = s
            .y()
            .iter()
            .zip(s.x().unwrap())
            .map(|(y, x)| y / a.h(*x))
            .sum::<f64>()
            / s.len() as f64;
        assert_relative_eq!(mean, 11.0 / 30.0, max_relative = 1e-2);
        assert!(s.x().unwrap().iter().all(|x| (0.0..4.0).contains(x)));
    }

    #[test]
    fn samples_respect_cdf_dkw_band() {
        // Dvoretzky–Kiefer–Wolfowitz 99% band.
        let n = 100_000usize;
        let eps = ((2.0f64 / 0.01).ln() / (2.0 * n as f64)).sqrt();
        for (model, psi) in [(Model::one_sided(), 2.0), (Model::two_sided(), 0.25)] {
            let s = model.sample(&RngHandle::new(3, 1), n, &[psi]).unwrap();
            let mut y = s.y().to_vec();
            y.sort_by(f64::total_cmp);
            let mut worst: f64 = 0.0;
            for (i, v) in y.iter().enumerate() {
                let f = model.cdf(*v, None, &[psi]).unwrap();
                worst = worst
                    .max((f - (i + 1) as f64 / n as f64).abs())
                    .max((f - i as f64 / n as f64).abs());
            }
            assert!(worst < eps, "{} sup gap {worst} vs {eps}", model.id());
        }
        let auc = Model::auction(6).unwrap();
        let psi = [1.0, 0.5];
        let s = auc.sample(&RngHandle::new(3, 2), n, &psi).unwrap();
        let a = auc.auction_at(&psi).unwrap();
        // Conditional PIT values are U[0, 1].
        let mut pit: Vec<f64> = s
            .y()
            .iter()
            .zip(s.x().unwrap())
            .map(|(y, x)| a.cdf(*y, *x))
            .collect();
        pit.sort_by(f64::total_cmp);
        let worst = pit
            .iter()
            .enumerate()
            .map(|(i, p)| {
                (p - i as f64 / n as f64)
                    .abs()
                    .max((p - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(worst < eps);
    }

    #[test]
    fn two_sided_sample_mass_below_jump() {
        let m = Model::two_sided();
        let s = m.sample(&RngHandle::new(5, 0), 200_000, &[0.25]).unwrap();
        let frac = s.y().iter().filter(|&&y| y <= 0.25).count() as f64 / s.len() as f64;
        assert!((frac - 0.25).abs() < 0.005);
    }

    #[test]
    fn residual_is_cubic_order() {
        for (model, psi0) in [
            (Model::one_sided(), 2.0),
            (Model::two_sided(), 0.25),
            (Model::two_sided(), 0.5),
        ] {
            let r: Vec<f64> = [0.1, 0.01, 0.001]
                .iter()
                .map(|d| model.oracle_residual_sq(psi0 + d, psi0).unwrap() / (d * d))
                .collect();
            // At psi0 = 1/4 the density is continuous and the residual is
            // an order smaller still, so only a lower bound is shared.
            for w in r.windows(2) {
                let ratio = w[0] / w[1];
                assert!(ratio > 8.0, "ratio {ratio}");
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let two = Model::two_sided();
        for &p in &[0.05, 0.25, 0.4, 0.9] {
            let q = two.quantile(p, None, &[0.6]).unwrap();
            assert_relative_eq!(two.cdf(q, None, &[0.6]).unwrap(), p, max_relative = 1e-12);
        }
        let auc = Model::auction(6).unwrap();
        let q = auc.quantile(0.3, Some(&[2.0]), &[1.0, 0.5]).unwrap();
        assert_relative_eq!(
            auc.cdf(q, Some(&[2.0]), &[1.0, 0.5]).unwrap(),
            0.3,
            max_relative = 1e-12
        );
    }

    #[test]
    fn model_ids_round_trip() {
        for id in [
            ModelId::OneSidedUniform,
            ModelId::TwoSidedUniform,
            ModelId::Auction,
        ] {
            assert_eq!(id.as_str().parse::<ModelId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{id}\""));
        }
    }
}
