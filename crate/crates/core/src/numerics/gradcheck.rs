//! Central finite-difference gradient checking.

use serde::{Deserialize, Serialize};

use super::rng::SplitMix64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Number of coordinates to probe. If this is at least the parameter
    /// count, every coordinate is checked.
    pub probes: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { eps: 1e-5, probes: 64, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub param_name: String,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub num_probes: usize,
}

impl GradCheckReport {
    pub fn passes(&self, max_rel: f64) -> bool {
        self.max_rel_err < max_rel
    }

    /// Folds another report into this one, keeping the worst errors.
    pub fn merge(&mut self, other: &GradCheckReport) {
        self.max_abs_err = self.max_abs_err.max(other.max_abs_err);
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
        self.num_probes += other.num_probes;
    }
}

/// Compares `analytic` against `(f(θ+εe) − f(θ−εe)) / 2ε` on seeded coordinates.
///
/// Relative error uses the denominator `max(|fd|, |analytic|, 1e-8)`.
pub fn finite_diff_check<F>(
    param_name: &str,
    mut loss_fn: F,
    params: &[f64],
    analytic: &[f64],
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(opts.eps > 0.0 && opts.eps <= 1e-2) {
        return Err(Error::config(format!("gradcheck eps {} outside (0, 1e-2]", opts.eps)));
    }
    if opts.probes == 0 {
        return Err(Error::config("gradcheck needs at least one probe"));
    }
    if params.is_empty() {
        return Err(Error::Empty(format!("parameter set {param_name}")));
    }
    if params.len() != analytic.len() {
        return Err(Error::LengthMismatch { expected: params.len(), actual: analytic.len() });
    }

    let mut coords: Vec<usize> = (0..params.len()).collect();
    if opts.probes < coords.len() {
        let mut rng = SplitMix64::new(opts.seed);
        // partial Fisher-Yates: the first `probes` slots are a uniform sample
        for i in 0..opts.probes {
            let j = i + rng.below(coords.len() - i);
            coords.swap(i, j);
        }
        coords.truncate(opts.probes);
    }

    let mut theta = params.to_vec();
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for &c in &coords {
        let orig = theta[c];
        theta[c] = orig + opts.eps;
        let fp = loss_fn(&theta)?;
        theta[c] = orig - opts.eps;
        let fm = loss_fn(&theta)?;
        theta[c] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!("loss while probing {param_name}[{c}]")));
        }
        let fd = (fp - fm) / (2.0 * opts.eps);
        let an = analytic[c];
        let abs = (fd - an).abs();
        let rel = abs / fd.abs().max(an.abs()).max(1e-8);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
    }

    Ok(GradCheckReport {
        param_name: param_name.to_string(),
        max_abs_err: max_abs,
        max_rel_err: max_rel,
        num_probes: coords.len(),
    })
}
