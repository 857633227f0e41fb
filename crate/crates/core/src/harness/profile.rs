//! Population objective curves for the uniform models.

use serde::{Deserialize, Serialize};

use crate::baselines::{js_population, kl_population};
use crate::error::{Error, Result};
use crate::models::Model;

/// Population MSCD, MSWD, KL and JS objectives on a parameter grid. KL is
/// `+inf` wherever it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub psi0: f64,
    pub psi: Vec<f64>,
    pub mscd: Vec<f64>,
    pub mswd: Vec<f64>,
    pub kl: Vec<f64>,
    pub js: Vec<f64>,
}

pub fn objective_profile(model: &Model, psi0: f64, grid: &[f64]) -> Result<ProfileCurve> {
    if model.is_conditional() {
        return Err(Error::Unsupported(format!(
            "objective profiles need a uniform model, got {}",
            model.id()
        )));
    }
    model.check_psi(&[psi0])?;
    let mut c = ProfileCurve {
        psi0,
        psi: grid.to_vec(),
        mscd: vec![],
        mswd: vec![],
        kl: vec![],
        js: vec![],
    };
    for &p in grid {
        // A direction and its negation give the same 1-D distance, so the
        // sliced population objective is the 1-D closed form.
        c.mscd.push(model.oracle_cramer_sq(p, psi0)?);
        c.mswd.push(model.oracle_wasserstein_sq(p, psi0)?);
        c.kl.push(kl_population(model, psi0, p)?);
        c.js.push(js_population(model, psi0, p)?);
    }
    Ok(c)
}
