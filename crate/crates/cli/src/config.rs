//! The JSON run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use msdest::harness::{default_bidders, EstimatorConfig, InferenceSettings, McDesign};
use msdest::{Model, ModelId, ParamBox};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub id: ModelId,
    pub psi0: Vec<f64>,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default = "default_bidders")]
    pub bidders: u32,
    #[serde(default)]
    pub bounds: Option<ParamBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    #[serde(rename = "R")]
    pub r: usize,
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        Self { r: 500, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub emit_svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            emit_svg: true,
        }
    }
}

/// Parameter grid for `profile`; `None` bounds pick a model default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: usize,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self {
            lo: None,
            hi: None,
            points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorConfig>,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub inference: InferenceSettings,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub profile: ProfileSection,
}

fn default_estimators() -> Vec<EstimatorConfig> {
    vec![EstimatorConfig::default()]
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn build_model(&self) -> Result<Model> {
        let m = Model::from_id(self.model.id, self.model.bidders)?;
        let m = match &self.model.bounds {
            Some(b) => m.with_bounds(b.clone())?,
            None => m,
        };
        m.check_psi(&self.model.psi0)?;
        Ok(m)
    }

    pub fn design(&self, jobs: Option<usize>) -> McDesign {
        McDesign {
            model: self.model.id,
            bidders: self.model.bidders,
            bounds: self.model.bounds.clone(),
            psi0: self.model.psi0.clone(),
            sample_size: self.model.t,
            replications: self.mc.r,
            seed: self.mc.seed,
            estimators: self.estimators.clone(),
            inference: self.inference,
            jobs,
        }
    }

    /// The parameter grid for `profile`.
    pub fn profile_grid(&self) -> Result<Vec<f64>> {
        let psi0 = self.model.psi0[0];
        let (dlo, dhi) = match self.model.id {
            ModelId::OneSidedUniform => (0.5 * psi0, 1.5 * psi0),
            ModelId::TwoSidedUniform => (0.01, 0.99),
            ModelId::Auction => bail!("profile needs a uniform model"),
        };
        let (lo, hi) = (
            self.profile.lo.unwrap_or(dlo),
            self.profile.hi.unwrap_or(dhi),
        );
        let n = self.profile.points;
        if n < 2 || lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            bail!("profile grid needs lo < hi and at least two points");
        }
        Ok((0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
