//! Error measures against the ground truth.

use obdd_core::model::wrap_distance;
use obdd_core::C64;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// `||f_hat - f|| / ||f||` after the best global phase, and on magnitudes only.
pub fn nmse(f_hat: &[C64], f: &[C64]) -> Result<(f64, f64)> {
    if f_hat.len() != f.len() {
        return Err(obdd_core::Error::ShapeMismatch {
            what: "message estimate",
            expected: f.len(),
            found: f_hat.len(),
        }
        .into());
    }
    let fnorm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if fnorm == 0.0 {
        return Err(HarnessError::Core(obdd_core::Error::Domain(
            "reference message is zero",
        )));
    }
    // the best phase rotates f_hat onto f: e^{j theta} = <f_hat, f> / |<f_hat, f>|
    let inner: C64 = f_hat.iter().zip(f).map(|(a, b)| a.conj() * b).sum();
    let rot = if inner.norm() > 0.0 {
        inner / inner.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let aligned = f_hat
        .iter()
        .zip(f)
        .map(|(a, b)| (a * rot - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let magnitude = f_hat
        .iter()
        .zip(f)
        .map(|(a, b)| (a.norm() - b.norm()).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok((aligned / fnorm, magnitude / fnorm))
}

/// `10 log10(1 / nmse)`.
pub fn nmse_db(value: f64) -> f64 {
    -10.0 * value.log10()
}

/// Fraction of differing symbols.
pub fn ser(estimate: &[u32], truth: &[u32]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let wrong =
        estimate.iter().zip(truth).filter(|(a, b)| a != b).count() + truth.len().abs_diff(estimate.len());
    wrong as f64 / truth.len() as f64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayMatch {
    /// Wrap-around error of every matched pair, in order of increasing error.
    pub errors: Vec<f64>,
    pub misses: usize,
    pub false_alarms: usize,
}

impl DelayMatch {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_exact(&self) -> bool {
        self.misses == 0 && self.false_alarms == 0
    }
}

/// Greedy nearest-pair matching under the wrap-around metric, pairs farther
/// than `tol` are left unmatched.
pub fn match_delays(estimated: &[f64], truth: &[f64], tol: f64) -> DelayMatch {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &e) in estimated.iter().enumerate() {
        for (j, &t) in truth.iter().enumerate() {
            let d = wrap_distance(e, t);
            if d <= tol {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_e = vec![false; estimated.len()];
    let mut used_t = vec![false; truth.len()];
    let mut errors = Vec::new();
    for (d, i, j) in pairs {
        if !used_e[i] && !used_t[j] {
            used_e[i] = true;
            used_t[j] = true;
            errors.push(d);
        }
    }
    DelayMatch {
        misses: used_t.iter().filter(|u| !**u).count(),
        false_alarms: used_e.iter().filter(|u| !**u).count(),
        errors,
    }
}
