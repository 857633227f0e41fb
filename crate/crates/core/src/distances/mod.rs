//! Univariate Cramér and 2-Wasserstein discrepancies and their sliced
//! (direction-averaged) versions.
//!
//! Both functionals are evaluated by composite Gauss–Legendre quadrature on
//! a grid whose breakpoints include every jump or kink of either argument,
//! so piecewise-smooth integrands are integrated to round-off.

mod quadrature;
mod step;

pub use quadrature::{GaussLegendre, QuadGrid};
pub use step::{StepCdf, StepQuantile};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{Direction, Sample};

/// A distribution function on the real line.
pub trait Cdf1d {
    fn cdf(&self, s: f64) -> f64;

    /// Evaluate at ascending `nodes`.
    fn cdf_sorted(&self, nodes: &[f64], out: &mut [f64]) {
        for (s, o) in nodes.iter().zip(out.iter_mut()) {
            *o = self.cdf(*s);
        }
    }

    /// Jump and kink locations. Need not be sorted or unique.
    fn knots(&self) -> Vec<f64>;
}

/// A quantile function on `(0, 1)`.
pub trait Quantile1d {
    fn quantile(&self, p: f64) -> f64;

    /// Probability levels in `(0, 1)` where the quantile jumps or kinks.
    fn kinks(&self) -> Vec<f64>;
}

/// Closure-backed CDF, mostly for oracles and tests.
pub struct FnCdf<F> {
    f: F,
    knots: Vec<f64>,
}

impl<F: Fn(f64) -> f64> FnCdf<F> {
    pub fn new(f: F, knots: Vec<f64>) -> Self {
        Self { f, knots }
    }
}

impl<F: Fn(f64) -> f64> Cdf1d for FnCdf<F> {
    fn cdf(&self, s: f64) -> f64 {
        (self.f)(s)
    }
    fn knots(&self) -> Vec<f64> {
        self.knots.clone()
    }
}

/// Closure-backed quantile function.
pub struct FnQuantile<F> {
    f: F,
    kinks: Vec<f64>,
}

impl<F: Fn(f64) -> f64> FnQuantile<F> {
    pub fn new(f: F, kinks: Vec<f64>) -> Self {
        Self { f, kinks }
    }
}

impl<F: Fn(f64) -> f64> Quantile1d for FnQuantile<F> {
    fn quantile(&self, p: f64) -> f64 {
        (self.f)(p)
    }
    fn kinks(&self) -> Vec<f64> {
        self.kinks.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Cramer,
    Wasserstein,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    IndicatorWindow { lo: f64, hi: f64 },
    UniformUnitInterval,
}

/// `w(s) = norm * 1(s in support)`.
///
/// Serialized flat: `{"kind": "indicator-window", "lo": .., "hi": .., "norm": ..}`
/// or `{"kind": "uniform-unit-interval"}`; `norm` defaults to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightRepr", into = "WeightRepr")]
pub struct WeightFn {
    pub kind: WeightKind,
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum WeightTag {
    IndicatorWindow,
    UniformUnitInterval,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightRepr {
    kind: WeightTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hi: Option<f64>,
    #[serde(default = "one")]
    norm: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<WeightRepr> for WeightFn {
    type Error = Error;
    fn try_from(r: WeightRepr) -> Result<Self> {
        let kind = match (r.kind, r.lo, r.hi) {
            (WeightTag::IndicatorWindow, Some(lo), Some(hi)) => {
                WeightKind::IndicatorWindow { lo, hi }
            }
            // JSON has no infinities; a missing bound means unbounded.
            (WeightTag::IndicatorWindow, lo, hi) => WeightKind::IndicatorWindow {
                lo: lo.unwrap_or(f64::NEG_INFINITY),
                hi: hi.unwrap_or(f64::INFINITY),
            },
            (WeightTag::UniformUnitInterval, None, None) => WeightKind::UniformUnitInterval,
            (WeightTag::UniformUnitInterval, _, _) => {
                return Err(Error::Config(
                    "uniform-unit-interval weight takes no lo/hi".into(),
                ))
            }
        };
        let w = WeightFn { kind, norm: r.norm };
        w.validate()?;
        Ok(w)
    }
}

impl From<WeightFn> for WeightRepr {
    fn from(w: WeightFn) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        match w.kind {
            WeightKind::IndicatorWindow { lo, hi } => WeightRepr {
                kind: WeightTag::IndicatorWindow,
                lo: finite(lo),
                hi: finite(hi),
                norm: w.norm,
            },
            WeightKind::UniformUnitInterval => WeightRepr {
                kind: WeightTag::UniformUnitInterval,
                lo: None,
                hi: None,
                norm: w.norm,
            },
        }
    }
}

impl WeightFn {
    pub fn window(lo: f64, hi: f64) -> Result<Self> {
        let w = Self {
            kind: WeightKind::IndicatorWindow { lo, hi },
            norm: 1.0,
        };
        w.validate()?;
        Ok(w)
    }

    /// `w = 1` on the whole line.
    pub fn unit() -> Self {
        Self {
            kind: WeightKind::IndicatorWindow {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            },
            norm: 1.0,
        }
    }

    pub fn unit_interval() -> Self {
        Self {
            kind: WeightKind::UniformUnitInterval,
            norm: 1.0,
        }
    }

    /// The `[-50000, 50000]` indicator window used for the auction experiments.
    pub fn wide_window() -> Self {
        Self {
            kind: WeightKind::IndicatorWindow {
                lo: -50_000.0,
                hi: 50_000.0,
            },
            norm: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.norm >= 0.0) || !self.norm.is_finite() {
            return Err(Error::Config(
                "weight normalization must be finite and nonnegative".into(),
            ));
        }
        if let WeightKind::IndicatorWindow { lo, hi } = self.kind {
            if !(lo < hi) {
                return Err(Error::Config(format!(
                    "weight window needs lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            WeightKind::IndicatorWindow { lo, hi } => (lo, hi),
            WeightKind::UniformUnitInterval => (0.0, 1.0),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        let (lo, hi) = self.support();
        if s >= lo && s <= hi {
            self.norm
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub nodes_per_segment: usize,
    pub tail_mass_tol: f64,
    /// Uniform pieces used on each tail beyond the outermost knot.
    pub tail_segments: usize,
    /// Nodes per tail piece.
    pub tail_nodes: usize,
    /// Interior segments are split so none is longer than range / min_cells.
    pub min_cells: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes_per_segment: 8,
            tail_mass_tol: 1e-10,
            tail_segments: 16,
            tail_nodes: 8,
            min_cells: 64,
        }
    }
}

impl QuadratureConfig {
    pub fn with_nodes(nodes_per_segment: usize) -> Self {
        Self {
            nodes_per_segment,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_segment < 2 {
            return Err(Error::Config("nodes_per_segment must be at least 2".into()));
        }
        if !(self.tail_mass_tol > 0.0) {
            return Err(Error::Config("tail_mass_tol must be positive".into()));
        }
        if self.tail_segments == 0 || self.tail_nodes == 0 || self.min_cells == 0 {
            return Err(Error::Config(
                "tail_segments, tail_nodes and min_cells must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.retain(|x| x.is_finite());
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

fn push_refined(breaks: &mut Vec<f64>, a: f64, b: f64, pieces: usize) {
    for i in 1..pieces {
        breaks.push(a + (b - a) * i as f64 / pieces as f64);
    }
    breaks.push(b);
}

/// Quadrature grid for `int (F_a - F_b)^2 w ds`.
///
/// The domain is the weight support intersected with `[L, U]`, where both
/// CDFs are within `tail_mass_tol` of 0 below `L` and of 1 above `U`,
/// padded by one inter-knot spacing.
pub fn cramer_grid<A, B>(a: &A, b: &B, w: &WeightFn, q: &QuadratureConfig) -> Result<QuadGrid>
where
    A: Cdf1d + ?Sized,
    B: Cdf1d + ?Sized,
{
    let mut knots = a.knots();
    knots.extend(b.knots());
    let knots = sorted_unique(knots);
    if knots.is_empty() {
        return Err(Error::Numeric(
            "cannot build a quadrature grid without knots".into(),
        ));
    }
    let (kmin, kmax) = (knots[0], knots[knots.len() - 1]);
    let spacing = if knots.len() > 1 {
        (kmax - kmin) / (knots.len() - 1) as f64
    } else {
        kmin.abs().max(1.0) * 1e-3
    };
    let (wlo, whi) = w.support();
    let tol = q.tail_mass_tol;

    let tail_edge = |dir: f64, anchor: f64, limit: f64| -> Result<f64> {
        let inside = |s: f64| {
            if dir < 0.0 {
                a.cdf(s) <= tol && b.cdf(s) <= tol
            } else {
                a.cdf(s) >= 1.0 - tol && b.cdf(s) >= 1.0 - tol
            }
        };
        let mut step = spacing;
        for _ in 0..200 {
            let s = anchor + dir * step;
            if (dir < 0.0 && s <= limit) || (dir > 0.0 && s >= limit) {
                return Ok(limit);
            }
            if inside(s) {
                return Ok(s + dir * spacing);
            }
            step *= 2.0;
        }
        Err(Error::Numeric(
            "distribution tails do not settle within the search range".into(),
        ))
    };

    let lo = tail_edge(-1.0, kmin, wlo)?.max(wlo);
    let hi = tail_edge(1.0, kmax, whi)?.min(whi);
    if !(hi > lo) {
        return Ok(QuadGrid::default());
    }

    let mut grid = QuadGrid::default();
    let tail_rule = GaussLegendre::cached(q.tail_nodes.max(q.nodes_per_segment));
    let rule = GaussLegendre::cached(q.nodes_per_segment);
    let push_tail = |grid: &mut QuadGrid, a: f64, b: f64| {
        for i in 0..q.tail_segments {
            let s0 = a + (b - a) * i as f64 / q.tail_segments as f64;
            let s1 = a + (b - a) * (i + 1) as f64 / q.tail_segments as f64;
            tail_rule.push_segment(s0, s1, &mut grid.nodes, &mut grid.weights);
        }
    };

    let ilo = kmin.max(lo);
    let ihi = kmax.min(hi);
    if lo < ilo {
        push_tail(&mut grid, lo, ilo.min(hi));
    }
    if ihi > ilo {
        let cell = (kmax - kmin) / q.min_cells as f64;
        let mut breaks = vec![ilo];
        let mut prev = ilo;
        for &k in knots
            .iter()
            .filter(|&&k| k > ilo && k < ihi)
            .chain(std::iter::once(&ihi))
        {
            let pieces = ((k - prev) / cell).ceil().max(1.0) as usize;
            push_refined(&mut breaks, prev, k, pieces);
            prev = k;
        }
        for seg in breaks.windows(2) {
            if seg[1] > seg[0] {
                rule.push_segment(seg[0], seg[1], &mut grid.nodes, &mut grid.weights);
            }
        }
    }
    if hi > ihi {
        push_tail(&mut grid, ihi.max(lo), hi);
    }
    if w.norm != 1.0 {
        grid.weights.iter_mut().for_each(|x| *x *= w.norm);
    }
    Ok(grid)
}

/// Weighted Cramér discrepancy `int (F_a - F_b)^2 w ds`.
pub fn cramer_sq_1d<A, B>(a: &A, b: &B, w: &WeightFn, q: &QuadratureConfig) -> Result<f64>
where
    A: Cdf1d + ?Sized,
    B: Cdf1d + ?Sized,
{
    let grid = cramer_grid(a, b, w, q)?;
    let mut fa = vec![0.0; grid.len()];
    let mut fb = vec![0.0; grid.len()];
    a.cdf_sorted(&grid.nodes, &mut fa);
    b.cdf_sorted(&grid.nodes, &mut fb);
    let mut total = 0.0;
    for ((wk, x), y) in grid.weights.iter().zip(&fa).zip(&fb) {
        let d = x - y;
        if !d.is_finite() {
            return Err(Error::Numeric("non-finite cdf evaluation".into()));
        }
        total += wk * d * d;
    }
    Ok(total.max(0.0))
}

/// Quadrature grid on the part of `(0, 1)` where the weight is positive.
pub fn wasserstein_grid<A, B>(a: &A, b: &B, w: &WeightFn, q: &QuadratureConfig) -> QuadGrid
where
    A: Quantile1d + ?Sized,
    B: Quantile1d + ?Sized,
{
    let (wlo, whi) = w.support();
    let (lo, hi) = (wlo.max(0.0), whi.min(1.0));
    if !(hi > lo) {
        return QuadGrid::default();
    }
    let mut kinks = a.kinks();
    kinks.extend(b.kinks());
    let kinks = sorted_unique(kinks);
    let cell = (hi - lo) / q.min_cells as f64;
    let mut breaks = vec![lo];
    let mut prev = lo;
    for &k in kinks
        .iter()
        .filter(|&&k| k > lo && k < hi)
        .chain(std::iter::once(&hi))
    {
        let pieces = ((k - prev) / cell).ceil().max(1.0) as usize;
        push_refined(&mut breaks, prev, k, pieces);
        prev = k;
    }
    let mut grid = QuadGrid::composite(&breaks, q.nodes_per_segment);
    if w.norm != 1.0 {
        grid.weights.iter_mut().for_each(|x| *x *= w.norm);
    }
    grid
}

/// Weighted 2-Wasserstein discrepancy `int_0^1 (Q_a - Q_b)^2 w ds`.
pub fn wasserstein_sq_1d<A, B>(a: &A, b: &B, w: &WeightFn, q: &QuadratureConfig) -> Result<f64>
where
    A: Quantile1d + ?Sized,
    B: Quantile1d + ?Sized,
{
    let grid = wasserstein_grid(a, b, w, q);
    let mut total = 0.0;
    for (p, wk) in grid.nodes.iter().zip(&grid.weights) {
        let d = a.quantile(*p) - b.quantile(*p);
        if !d.is_finite() {
            return Err(Error::Numeric(format!("unbounded quantile at level {p}")));
        }
        total += wk * d * d;
    }
    Ok(total.max(0.0))
}

/// A model-induced law of `u' Z`, available direction by direction.
pub trait InducedLaw {
    fn cdf_along(&self, u: &Direction) -> Result<Box<dyn Cdf1d + '_>>;
    fn quantile_along(&self, u: &Direction) -> Result<Box<dyn Quantile1d + '_>>;
}

/// Group bit-identical directions, keeping first-occurrence order.
pub fn unique_directions(directions: &[Direction]) -> Vec<(&Direction, usize)> {
    let mut out: Vec<(&Direction, usize)> = Vec::new();
    for u in directions {
        match out.iter_mut().find(|(v, _)| v.same_bits(u)) {
            Some((_, c)) => *c += 1,
            None => out.push((u, 1)),
        }
    }
    out
}

/// One-dimensional discrepancy between the projected sample and the law.
pub fn projected_discrepancy(
    projected: Vec<f64>,
    law: &dyn InducedLaw,
    u: &Direction,
    kind: DistanceKind,
    w: &WeightFn,
    q: &QuadratureConfig,
) -> Result<f64> {
    match kind {
        DistanceKind::Cramer => {
            let emp = StepCdf::new(projected);
            let model = law.cdf_along(u)?;
            cramer_sq_1d(&emp, &*model, w, q)
        }
        DistanceKind::Wasserstein => {
            let emp = StepQuantile::new(projected);
            let model = law.quantile_along(u)?;
            wasserstein_sq_1d(&emp, &*model, w, q)
        }
    }
}

/// Average over `directions` of the 1-D discrepancy between the projected
/// sample and the projected model law.
pub fn sliced_discrepancy(
    sample: &Sample,
    law: &dyn InducedLaw,
    kind: DistanceKind,
    w: &WeightFn,
    directions: &[Direction],
    q: &QuadratureConfig,
) -> Result<f64> {
    if directions.is_empty() {
        return Err(Error::EmptyDirections);
    }
    let mut total = 0.0;
    for (u, count) in unique_directions(directions) {
        let v = projected_discrepancy(sample.project(u)?, law, u, kind, w, q)?;
        total += count as f64 * v;
    }
    Ok(total / directions.len() as f64)
}
