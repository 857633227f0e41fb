//! Observed data and projection directions.

use std::ops::Index;

use crate::error::{Error, Result};

/// A unit vector in `R^d`. In conditional models index 0 is the response
/// coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Wrap a vector that is already of unit length.
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::InvalidDimension("direction must be nonempty".into()));
        }
        if u.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numeric("non-finite direction component".into()));
        }
        let norm = u.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDimension(format!(
                "direction norm {norm} is not 1"
            )));
        }
        Ok(Self(u))
    }

    /// Normalize an arbitrary nonzero vector.
    pub fn normalized(u: Vec<f64>) -> Result<Self> {
        let norm = u.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm >= 1e-12) || !norm.is_finite() {
            return Err(Error::Numeric(
                "cannot normalize a (near) zero vector".into(),
            ));
        }
        Self::new(u.into_iter().map(|c| c / norm).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    /// Response component `u1`.
    pub fn response(&self) -> f64 {
        self.0[0]
    }

    /// Covariate components `u2`.
    pub fn covariate(&self) -> &[f64] {
        &self.0[1..]
    }

    pub(crate) fn same_bits(&self, other: &Direction) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Index<usize> for Direction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Responses `y` with optional row-major covariates `x` (`T x d_x`).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    y: Vec<f64>,
    x: Option<Vec<f64>>,
    dx: usize,
}

impl Sample {
    pub fn unconditional(y: Vec<f64>) -> Result<Self> {
        Self::validate(&y, None, 0)?;
        Ok(Self { y, x: None, dx: 0 })
    }

    /// `x` is row-major with `dx` columns.
    pub fn conditional(y: Vec<f64>, x: Vec<f64>, dx: usize) -> Result<Self> {
        if dx == 0 {
            return Err(Error::InvalidSample(
                "conditional sample needs at least one covariate".into(),
            ));
        }
        Self::validate(&y, Some(&x), dx)?;
        Ok(Self { y, x: Some(x), dx })
    }

    fn validate(y: &[f64], x: Option<&[f64]>, dx: usize) -> Result<()> {
        if y.is_empty() {
            return Err(Error::InvalidSample(
                "sample must contain at least one observation".into(),
            ));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSample("non-finite response".into()));
        }
        if let Some(x) = x {
            if x.len() != y.len() * dx {
                return Err(Error::InvalidSample(format!(
                    "covariate rows {} do not match {} responses",
                    x.len() / dx.max(1),
                    y.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSample("non-finite covariate".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Dimension of `z_t`: 1 for unconditional samples, `1 + d_x` otherwise.
    pub fn dim(&self) -> usize {
        1 + self.dx
    }

    pub fn covariate_dim(&self) -> usize {
        self.dx
    }

    pub fn is_conditional(&self) -> bool {
        self.x.is_some()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_row(&self, t: usize) -> Option<&[f64]> {
        self.x.as_ref().map(|x| &x[t * self.dx..(t + 1) * self.dx])
    }

    pub fn x(&self) -> Option<&[f64]> {
        self.x.as_deref()
    }

    /// `u2' x_t` for every row (zeros for unconditional samples).
    pub fn covariate_index(&self, u: &Direction) -> Vec<f64> {
        match &self.x {
            None => vec![0.0; self.len()],
            Some(x) => x
                .chunks_exact(self.dx)
                .map(|row| row.iter().zip(u.covariate()).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }

    /// Projections `u' z_t` in sample order.
    pub fn project(&self, u: &Direction) -> Result<Vec<f64>> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        let u1 = u.response();
        Ok(self
            .covariate_index(u)
            .into_iter()
            .zip(&self.y)
            .map(|(c, y)| u1 * y + c)
            .collect())
    }
}
