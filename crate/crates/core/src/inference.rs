//! Plug-in sandwich covariance `B^{-1} Omega B^{-1} / T` for the sliced
//! Cramér estimator and Wald intervals.
//!
//! `B` is the direction average of `int D D' w ds` with
//! `D(s; u, psi) = dG(s; u, psi)/dpsi`. `Omega` is the covariance of the
//! per-observation influence terms
//! `phi_t = E_u int [1(u'z_t <= s) - P(u'Z <= s | X_t, psi)] D(s; u, psi) w ds`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distances::{
    cramer_grid, unique_directions, QuadGrid, QuadratureConfig, StepCdf, WeightFn,
};
use crate::error::{Error, Result};
use crate::models::{AuctionModel, Model, UniformLaw};
use crate::numeric::{exp_fast, normal_quantile};
use crate::objective::{projected_law, RESPONSE_ZERO_TOL};
use crate::rng::{draw_directions, tags, RngHandle};
use crate::sample::{Direction, Sample};

/// Condition number above which `B` is pseudo-inverted.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    pub n_directions: usize,
    pub level: f64,
    pub rng: RngHandle,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            n_directions: 256,
            level: 0.95,
            rng: RngHandle::new(0, 0),
        }
    }
}

impl InferenceConfig {
    /// The fixed evaluation directions for a sample of dimension `d`.
    pub fn directions(&self, d: usize) -> Result<Vec<Direction>> {
        if self.n_directions == 0 {
            return Err(Error::Config(
                "inference needs at least one direction".into(),
            ));
        }
        draw_directions(
            &mut self.rng.child(tags::INFERENCE_DIRECTIONS).rng(),
            d,
            self.n_directions,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichEstimate {
    pub b_hat: Vec<Vec<f64>>,
    pub omega_hat: Vec<Vec<f64>>,
    pub cov_hat: Vec<Vec<f64>>,
    pub se: Vec<f64>,
    pub condition: f64,
    /// `B` was ill-conditioned and pseudo-inverted.
    pub pseudo_inverse: bool,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// `D(s; u, psi)` evaluated pointwise from the model's CDF derivative.
/// Zero for conditional directions with `u1 = 0`.
pub fn d_function(
    sample: &Sample,
    model: &Model,
    s: f64,
    u: &Direction,
    psi: &[f64],
) -> Result<Vec<f64>> {
    if u.dim() != sample.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample.dim(),
            got: u.dim(),
        });
    }
    let k = model.n_params();
    if !model.is_conditional() {
        // u = -1 projects to -Y, whose CDF is 1 - F(-s).
        return if u[0] > 0.0 {
            model.deriv_cdf_psi(s, None, psi)
        } else {
            Ok(model
                .deriv_cdf_psi(-s, None, psi)?
                .into_iter()
                .map(|v| -v)
                .collect())
        };
    }
    let u1 = u.response();
    if u1.abs() < RESPONSE_ZERO_TOL {
        model.check_psi(psi)?;
        return Ok(vec![0.0; k]);
    }
    let idx = sample.covariate_index(u);
    let mut d = vec![0.0; k];
    for (t, c) in idx.iter().enumerate() {
        let g = model.deriv_cdf_psi((s - c) / u1, sample.x_row(t), psi)?;
        for (a, b) in d.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let scale = if u1 > 0.0 { 1.0 } else { -1.0 } / sample.len() as f64;
    Ok(d.into_iter().map(|v| v * scale).collect())
}

/// Per-observation auction terms along one direction, in sample order.
struct AuctionTerms {
    upward: bool,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    x: Vec<f64>,
}

impl AuctionTerms {
    fn new(model: &AuctionModel, sample: &Sample, u: &Direction) -> Self {
        let u1 = u.response();
        let u2 = u.covariate()[0];
        let m = model.bidders as f64;
        let x = sample.x().expect("conditional sample").to_vec();
        let mut a = Vec::with_capacity(x.len());
        let mut b = Vec::with_capacity(x.len());
        let mut c = Vec::with_capacity(x.len());
        for &xt in &x {
            let h = model.h(xt);
            a.push(m / (u1.abs() * h));
            c.push(u2 * xt);
            b.push(u1 * h / (m - 1.0) + u2 * xt);
        }
        Self {
            upward: u1 > 0.0,
            a,
            b,
            c,
            x,
        }
    }

    /// `D` on ascending nodes for the two auction parameters.
    fn d_at(&self, nodes: &[f64]) -> [Vec<f64>; 2] {
        let n = nodes.len();
        let mut d0 = vec![0.0; n];
        let mut d1 = vec![0.0; n];
        for t in 0..self.a.len() {
            let (a, b, c, x) = (self.a[t], self.b[t], self.c[t], self.x[t]);
            let range = if self.upward {
                nodes.partition_point(|&s| s <= b)..n
            } else {
                0..nodes.partition_point(|&s| s < b)
            };
            for k in range {
                let s = nodes[k];
                let e = exp_fast(-a * (s - b).abs());
                let v = -e * a * (s - c);
                d0[k] += v;
                d1[k] += v * x;
            }
        }
        let inv = 1.0 / self.a.len() as f64;
        d0.iter_mut().chain(d1.iter_mut()).for_each(|v| *v *= inv);
        [d0, d1]
    }

    /// `sum_k w_k P_t(s_k) D_k` for observation `t`.
    fn expected_term(
        &self,
        t: usize,
        grid: &QuadGrid,
        d: &[Vec<f64>],
        tail_from: &[Vec<f64>],
        out: &mut [f64],
    ) {
        let (a, b) = (self.a[t], self.b[t]);
        let n = grid.nodes.len();
        let split = if self.upward {
            grid.nodes.partition_point(|&s| s < b)
        } else {
            grid.nodes.partition_point(|&s| s <= b)
        };
        for (j, dj) in d.iter().enumerate() {
            let mut acc = 0.0;
            if self.upward {
                // P = 1 - e on s >= b.
                for k in split..n {
                    acc -= grid.weights[k] * exp_fast(-a * (grid.nodes[k] - b)) * dj[k];
                }
                acc += tail_from[j][split];
            } else {
                // P = e on s <= b, 1 above.
                for k in 0..split {
                    acc += grid.weights[k] * exp_fast(-a * (b - grid.nodes[k])) * dj[k];
                }
                acc += tail_from[j][split];
            }
            out[j] = acc;
        }
    }
}

/// Suffix sums `S_j[k] = sum_{i >= k} w_i D_j(s_i)`, length `n + 1`.
fn suffix_sums(grid: &QuadGrid, d: &[Vec<f64>]) -> Vec<Vec<f64>> {
    d.iter()
        .map(|dj| {
            let mut s = vec![0.0; grid.len() + 1];
            for k in (0..grid.len()).rev() {
                s[k] = s[k + 1] + grid.weights[k] * dj[k];
            }
            s
        })
        .collect()
}

struct DirectionPieces {
    grid: QuadGrid,
    d: Vec<Vec<f64>>,
}

fn direction_pieces(
    sample: &Sample,
    model: &Model,
    u: &Direction,
    psi: &[f64],
    w: &WeightFn,
    quad: &QuadratureConfig,
) -> Result<(DirectionPieces, Vec<f64>)> {
    let v = sample.project(u)?;
    let law = projected_law(model, sample, u, psi)?;
    let grid = cramer_grid(&StepCdf::new(v.clone()), &law, w, quad)?;
    let k = model.n_params();
    let d = if !model.is_conditional() {
        let uni = UniformLaw::new(model, psi[0])?;
        let sign = u[0];
        let vals: Vec<f64> = grid
            .nodes
            .iter()
            .map(|&s| {
                if sign > 0.0 {
                    uni.deriv_cdf_psi(s)
                } else {
                    -uni.deriv_cdf_psi(-s)
                }
            })
            .collect();
        vec![vals]
    } else if u.response().abs() < RESPONSE_ZERO_TOL {
        vec![vec![0.0; grid.len()]; k]
    } else {
        let terms = AuctionTerms::new(&model.auction_at(psi)?, sample, u);
        terms.d_at(&grid.nodes).to_vec()
    };
    Ok((DirectionPieces { grid, d }, v))
}

/// `B = E_u int D D' w ds` over the supplied directions.
pub fn b_matrix(
    sample: &Sample,
    model: &Model,
    psi: &[f64],
    w: &WeightFn,
    directions: &[Direction],
    quad: &QuadratureConfig,
) -> Result<DMatrix<f64>> {
    if directions.is_empty() {
        return Err(Error::EmptyDirections);
    }
    model.check_psi(psi)?;
    let k = model.n_params();
    let mut b = DMatrix::zeros(k, k);
    for (u, count) in unique_directions(directions) {
        let (p, _) = direction_pieces(sample, model, u, psi, w, quad)?;
        b += count as f64 * outer_integral(&p);
    }
    Ok(b / directions.len() as f64)
}

fn outer_integral(p: &DirectionPieces) -> DMatrix<f64> {
    let k = p.d.len();
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v: f64 = p
                .grid
                .weights
                .iter()
                .zip(&p.d[i])
                .zip(&p.d[j])
                .map(|((w, a), b)| w * a * b)
                .sum();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Influence terms `phi_t` (rows) and `B`, sharing one pass over directions.
fn influence_and_b(
    sample: &Sample,
    model: &Model,
    psi: &[f64],
    w: &WeightFn,
    directions: &[Direction],
    quad: &QuadratureConfig,
) -> Result<(Vec<Vec<f64>>, DMatrix<f64>)> {
    if directions.is_empty() {
        return Err(Error::EmptyDirections);
    }
    model.check_psi(psi)?;
    let k = model.n_params();
    let total = directions.len() as f64;
    // Directions run in parallel; the reduction below is in direction order,
    // so results do not depend on scheduling.
    let parts: Vec<(f64, DMatrix<f64>, Vec<f64>)> = unique_directions(directions)
        .into_par_iter()
        .map(|(u, count)| {
            let (b, phi) = direction_influence(sample, model, u, psi, w, quad)?;
            Ok((count as f64 / total, b, phi))
        })
        .collect::<Result<_>>()?;
    let mut phi = vec![vec![0.0; k]; sample.len()];
    let mut b = DMatrix::zeros(k, k);
    for (weight, bd, pd) in parts {
        b += weight * bd;
        for (row, chunk) in phi.iter_mut().zip(pd.chunks_exact(k)) {
            for (a, c) in row.iter_mut().zip(chunk) {
                *a += weight * c;
            }
        }
    }
    Ok((phi, b))
}

/// `int D D' w ds` and the row-major `T x k` influence terms along one
/// direction.
fn direction_influence(
    sample: &Sample,
    model: &Model,
    u: &Direction,
    psi: &[f64],
    w: &WeightFn,
    quad: &QuadratureConfig,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let k = model.n_params();
    let (p, v) = direction_pieces(sample, model, u, psi, w, quad)?;
    let suffix = suffix_sums(&p.grid, &p.d);
    let nodes = &p.grid.nodes;
    let auction = if model.is_conditional() && u.response().abs() >= RESPONSE_ZERO_TOL {
        Some(AuctionTerms::new(&model.auction_at(psi)?, sample, u))
    } else {
        None
    };
    // Unconditional and u1 = 0 laws share P across observations.
    let shared: Vec<f64> = if auction.is_none() {
        let law = projected_law(model, sample, u, psi)?;
        (0..k)
            .map(|j| {
                nodes
                    .iter()
                    .zip(&p.grid.weights)
                    .zip(&p.d[j])
                    .map(|((s, wk), dk)| wk * crate::distances::Cdf1d::cdf(&law, *s) * dk)
                    .sum()
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut phi = vec![0.0; sample.len() * k];
    let mut scratch = vec![0.0; k];
    for (t, row) in phi.chunks_exact_mut(k).enumerate() {
        let first = nodes.partition_point(|&s| s < v[t]);
        match &auction {
            Some(terms) => terms.expected_term(t, &p.grid, &p.d, &suffix, &mut scratch),
            None => scratch.copy_from_slice(&shared),
        }
        for j in 0..k {
            row[j] = suffix[j][first] - scratch[j];
        }
    }
    Ok((outer_integral(&p), phi))
}

/// `Omega = (1/T) sum_t phi_t phi_t'`.
pub fn omega_matrix(
    sample: &Sample,
    model: &Model,
    psi: &[f64],
    w: &WeightFn,
    directions: &[Direction],
    quad: &QuadratureConfig,
) -> Result<DMatrix<f64>> {
    let (phi, _) = influence_and_b(sample, model, psi, w, directions, quad)?;
    Ok(outer_average(&phi, model.n_params()))
}

fn outer_average(phi: &[Vec<f64>], k: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(k, k);
    for p in phi {
        for i in 0..k {
            for j in 0..k {
                o[(i, j)] += p[i] * p[j];
            }
        }
    }
    o / phi.len() as f64
}

/// Inverse through the symmetric eigendecomposition. Eigenvalues below
/// `max |lambda| / MAX_CONDITION` are dropped (pseudo-inverse).
pub fn invert_symmetric(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64, bool)> {
    let eig = SymmetricEigen::new(m.clone());
    let abs: Vec<f64> = eig.eigenvalues.iter().map(|l| l.abs()).collect();
    let max = abs.iter().copied().fold(0.0, f64::max);
    let min = abs.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::NotInvertible {
            condition: f64::INFINITY,
        });
    }
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    let pseudo = condition > MAX_CONDITION;
    let cutoff = max / MAX_CONDITION;
    let inv_vals = eig
        .eigenvalues
        .map(|l| if l.abs() > cutoff { 1.0 / l } else { 0.0 });
    let inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    Ok((inv, condition, pseudo))
}

/// The plug-in sandwich at `psi_hat`.
pub fn sandwich(
    sample: &Sample,
    model: &Model,
    psi_hat: &[f64],
    w: &WeightFn,
    directions: &[Direction],
    quad: &QuadratureConfig,
) -> Result<SandwichEstimate> {
    let (phi, b) = influence_and_b(sample, model, psi_hat, w, directions, quad)?;
    let omega = outer_average(&phi, model.n_params());
    let (binv, condition, pseudo) = invert_symmetric(&b)?;
    let cov = &binv * &omega * &binv / sample.len() as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    let se = (0..cov.nrows())
        .map(|i| cov[(i, i)].max(0.0).sqrt())
        .collect();
    Ok(SandwichEstimate {
        b_hat: rows(&b),
        omega_hat: rows(&omega),
        cov_hat: rows(&cov),
        se,
        condition,
        pseudo_inverse: pseudo,
    })
}

/// `psi_hat_j -/+ z_{(1 + level)/2} se_j`.
pub fn wald_ci(psi_hat: &[f64], se: &[f64], level: f64) -> Result<Vec<(f64, f64)>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    if psi_hat.len() != se.len() {
        return Err(Error::DimensionMismatch {
            expected: psi_hat.len(),
            got: se.len(),
        });
    }
    let z = normal_quantile(0.5 + level / 2.0);
    Ok(psi_hat
        .iter()
        .zip(se)
        .map(|(p, s)| (p - z * s, p + z * s))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::g_hat;
    use approx::assert_relative_eq;

    fn dirs(d: usize, m: usize) -> Vec<Direction> {
        InferenceConfig {
            n_directions: m,
            ..Default::default()
        }
        .directions(d)
        .unwrap()
    }

    #[test]
    fn d_examples() {
        let m = Model::auction(6).unwrap();
        let s = m.sample(&RngHandle::new(1, 0), 30, &[1.0, 0.5]).unwrap();
        let u = Direction::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(
            d_function(&s, &m, 1.0, &u, &[1.0, 0.5]).unwrap(),
            vec![0.0, 0.0]
        );
        let one = Model::one_sided();
        let s1 = Sample::unconditional(vec![1.0]).unwrap();
        let e = Direction::new(vec![1.0]).unwrap();
        assert_eq!(d_function(&s1, &one, 1.0, &e, &[2.0]).unwrap(), vec![-0.25]);
    }

    #[test]
    fn auction_d_matches_finite_difference_of_g_hat() {
        let m = Model::auction(6).unwrap();
        let s = m.sample(&RngHandle::new(2, 0), 40, &[1.0, 0.5]).unwrap();
        let psi = [1.0, 0.5];
        for u in dirs(2, 6) {
            let terms = AuctionTerms::new(&m.auction_at(&psi).unwrap(), &s, &u);
            let nodes: Vec<f64> = (0..120).map(|i| -15.0 + i as f64 * 0.29).collect();
            let fast = terms.d_at(&nodes);
            for (k, &x) in nodes.iter().enumerate() {
                let d = d_function(&s, &m, x, &u, &psi).unwrap();
                for j in 0..2 {
                    assert!(
                        (fast[j][k] - d[j]).abs() < 1e-12,
                        "{} {} u={u:?} s={x}",
                        fast[j][k],
                        d[j]
                    );
                    let h = 1e-6;
                    let mut p = psi;
                    p[j] += h;
                    let up = g_hat(&m, &s, x, &u, &p).unwrap();
                    p[j] -= 2.0 * h;
                    let dn = g_hat(&m, &s, x, &u, &p).unwrap();
                    assert!(
                        (d[j] - (up - dn) / (2.0 * h)).abs() < 1e-6,
                        "u={u:?} s={x} j={j}"
                    );
                }
            }
        }
    }

    #[test]
    fn b_for_one_sided_uniform() {
        let m = Model::one_sided();
        let s = m.sample(&RngHandle::new(3, 0), 500, &[2.0]).unwrap();
        let b = b_matrix(
            &s,
            &m,
            &[2.0],
            &WeightFn::unit(),
            &dirs(1, 16),
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(b[(0, 0)], 1.0 / 6.0, max_relative = 1e-9);
    }

    #[test]
    fn zero_d_gives_non_invertible_b() {
        let m = Model::auction(6).unwrap();
        let s = m.sample(&RngHandle::new(4, 0), 20, &[1.0, 0.5]).unwrap();
        let u = Direction::new(vec![0.0, 1.0]).unwrap();
        let b = b_matrix(
            &s,
            &m,
            &[1.0, 0.5],
            &WeightFn::wide_window(),
            &[u.clone(), u],
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert_eq!(b, DMatrix::zeros(2, 2));
        assert!(matches!(
            invert_symmetric(&b),
            Err(Error::NotInvertible { .. })
        ));
    }

    #[test]
    fn duplicated_directions_leave_b_unchanged() {
        let m = Model::auction(6).unwrap();
        let s = m.sample(&RngHandle::new(5, 0), 50, &[1.0, 0.5]).unwrap();
        let d = dirs(2, 5);
        let mut dd = d.clone();
        dd.extend(d.iter().cloned());
        let q = QuadratureConfig::default();
        let a = b_matrix(&s, &m, &[1.0, 0.5], &WeightFn::wide_window(), &d, &q).unwrap();
        let b = b_matrix(&s, &m, &[1.0, 0.5], &WeightFn::wide_window(), &dd, &q).unwrap();
        assert!((a - b).abs().max() < 1e-15);
    }

    #[test]
    fn omega_matches_covariance_kernel_oracle() {
        // Var(int (1(Y <= s) - F(s)) D(s) ds) = int int (F(min) - F F) D D.
        let psi0 = 2.0;
        let f = |s: f64| (s / psi0).clamp(0.0, 1.0);
        let dfun = |s: f64| {
            if s > 0.0 && s < psi0 {
                -s / (psi0 * psi0)
            } else {
                0.0
            }
        };
        let n = 800;
        let h = psi0 / n as f64;
        let mut oracle = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (a, b) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                oracle += (f(a.min(b)) - f(a) * f(b)) * dfun(a) * dfun(b) * h * h;
            }
        }
        let m = Model::one_sided();
        let s = m.sample(&RngHandle::new(6, 0), 100_000, &[psi0]).unwrap();
        let o = omega_matrix(
            &s,
            &m,
            &[psi0],
            &WeightFn::unit(),
            &dirs(1, 8),
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!(
            (o[(0, 0)] / oracle - 1.0).abs() < 0.1,
            "{} vs {oracle}",
            o[(0, 0)]
        );
    }

    #[test]
    fn constant_covariate_reduces_to_classical_variance() {
        // With X fixed, G is the true conditional law and Omega is the
        // covariance kernel integral of the single response row.
        let m = Model::auction(6).unwrap();
        let psi = [1.0, 0.5];
        let law = m.auction_at(&psi).unwrap();
        let x0 = 1.0;
        let draws = m.sample(&RngHandle::new(10, 0), 3000, &psi).unwrap();
        let y: Vec<f64> = draws
            .x()
            .unwrap()
            .iter()
            .zip(draws.y())
            .map(|(x, y)| {
                // Map each draw's exponential onto the fixed covariate.
                let e = (y - law.boundary(*x)) * 6.0 / law.h(*x);
                law.boundary(x0) + law.h(x0) / 6.0 * e
            })
            .collect();
        let s = Sample::conditional(y, vec![x0; 3000], 1).unwrap();
        let u = Direction::new(vec![1.0, 0.0]).unwrap();
        let o = omega_matrix(
            &s,
            &m,
            &psi,
            &WeightFn::wide_window(),
            &[u],
            &QuadratureConfig::default(),
        )
        .unwrap();

        let g = law.boundary(x0);
        let top = g + 40.0 * law.h(x0) / 6.0;
        let n = 600;
        let h = (top - g) / n as f64;
        let pts: Vec<(f64, f64, [f64; 2])> = (0..n)
            .map(|i| {
                let z = g + (i as f64 + 0.5) * h;
                (z, law.cdf(z, x0), law.deriv_cdf_psi(z, x0))
            })
            .collect();
        let mut oracle = [[0.0; 2]; 2];
        for a in &pts {
            for b in &pts {
                let k = a.1.min(b.1) - a.1 * b.1;
                for i in 0..2 {
                    for j in 0..2 {
                        oracle[i][j] += k * a.2[i] * b.2[j] * h * h;
                    }
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (o[(i, j)] / oracle[i][j] - 1.0).abs() < 0.1,
                    "{i}{j}: {} vs {}",
                    o[(i, j)],
                    oracle[i][j]
                );
            }
        }
    }

    #[test]
    fn deterministic_response_gives_zero_omega() {
        // A u1 = 0 direction sees only X, whose law is the empirical one.
        let m = Model::auction(6).unwrap();
        let s = m.sample(&RngHandle::new(7, 0), 30, &[1.0, 0.5]).unwrap();
        let u = Direction::new(vec![0.0, -1.0]).unwrap();
        let (phi, _) = influence_and_b(
            &s,
            &m,
            &[1.0, 0.5],
            &WeightFn::wide_window(),
            &[u],
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!(phi.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn auction_influence_matches_direct_sum() {
        let m = Model::auction(6).unwrap();
        let psi = [1.0, 0.5];
        let s = m.sample(&RngHandle::new(9, 0), 25, &psi).unwrap();
        let w = WeightFn::wide_window();
        let q = QuadratureConfig::with_nodes(2);
        for u in dirs(2, 4) {
            let (phi, _) = influence_and_b(&s, &m, &psi, &w, std::slice::from_ref(&u), &q).unwrap();
            let (p, v) = direction_pieces(&s, &m, &u, &psi, &w, &q).unwrap();
            let (u1, u2) = (u.response(), u.covariate()[0]);
            for t in 0..s.len() {
                let x = s.x_row(t).unwrap();
                let mut direct = [0.0; 2];
                for (k, &node) in p.grid.nodes.iter().enumerate() {
                    let y = (node - u2 * x[0]) / u1;
                    let f = m.cdf(y, Some(x), &psi).unwrap();
                    let pt = if u1 > 0.0 { f } else { 1.0 - f };
                    let ind = if v[t] <= node { 1.0 } else { 0.0 };
                    for j in 0..2 {
                        direct[j] += p.grid.weights[k] * (ind - pt) * p.d[j][k];
                    }
                }
                for j in 0..2 {
                    assert!(
                        (phi[t][j] - direct[j]).abs() < 1e-10,
                        "{} vs {}",
                        phi[t][j],
                        direct[j]
                    );
                }
            }
        }
    }

    #[test]
    fn sandwich_shapes_and_psd() {
        let m = Model::auction(6).unwrap();
        let s = m.sample(&RngHandle::new(8, 0), 100, &[1.0, 0.5]).unwrap();
        let est = sandwich(
            &s,
            &m,
            &[1.0, 0.5],
            &WeightFn::wide_window(),
            &dirs(2, 32),
            &QuadratureConfig::with_nodes(2),
        )
        .unwrap();
        let b = DMatrix::from_row_iterator(2, 2, est.b_hat.iter().flatten().copied());
        assert!((&b - b.transpose()).abs().max() < 1e-12);
        let o = DMatrix::from_row_iterator(2, 2, est.omega_hat.iter().flatten().copied());
        assert!(SymmetricEigen::new(o)
            .eigenvalues
            .iter()
            .all(|l| *l > -1e-10));
        assert!(est.se.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(!est.pseudo_inverse);
    }

    #[test]
    fn wald_examples() {
        let ci = wald_ci(&[0.0], &[1.0], 0.95).unwrap();
        assert_relative_eq!(ci[0].1, 1.959964, max_relative = 1e-6);
        assert_relative_eq!(ci[0].0, -1.959964, max_relative = 1e-6);
        assert_eq!(wald_ci(&[0.7], &[0.0], 0.9).unwrap(), vec![(0.7, 0.7)]);
    }
}
