//! The MaNo estimator.
//!
//! Logits are normalized row by row with one of two maps chosen once per
//! dataset (`softrun`), then aggregated with a scaled entry-wise `L_p` norm:
//!
//! ```text
//! score = (1/(NK) Σ_i Σ_k Q_ik^p)^{1/p}
//! ```
//!
//! The branch is picked from the criterion `Φ`, the mean negative
//! log-softmax over every entry. `Φ ≤ η` selects the truncated exponential
//! `1 + q + q²/2 + … + qⁿ/n!`; `Φ > η` selects the softmax.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    compensated_sum, logsumexp_finite, phi_in_place, softmax_into, tsallis_unchecked,
    LogitsMatrix, ProbMatrix, ProbVector,
};
use crate::rng::{streams, SeededStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftrunConfig {
    /// Threshold on `Φ` separating the Taylor and softmax branches.
    pub eta: f64,
    /// Order of the truncated exponential used by the Taylor branch.
    pub taylor_order: u32,
    /// Exponent of the entry-wise norm.
    pub p: f64,
}

impl Default for SoftrunConfig {
    fn default() -> Self {
        Self { eta: 5.0, taylor_order: 2, p: 4.0 }
    }
}

impl SoftrunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::invalid(format!("p must be finite and > 1, got {}", self.p)));
        }
        if self.taylor_order < 1 {
            return Err(Error::invalid("taylor order must be at least 1"));
        }
        if self.eta.is_nan() {
            return Err(Error::invalid("eta must not be NaN"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Taylor,
    Softmax,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Taylor => "Taylor",
            Branch::Softmax => "Softmax",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManoResult {
    pub score: f64,
    pub phi_value: f64,
    pub branch: Branch,
    /// Mean Tsallis `p`-entropy of the normalized rows.
    pub mean_tsallis: f64,
}

#[derive(Debug, Clone)]
pub struct Softrun {
    pub probs: ProbMatrix,
    pub phi_value: f64,
    pub branch: Branch,
}

/// Truncated exponential `Σ_{j≤n} q^j/j!` per entry followed by `φ`.
/// For `n ≥ 3` the row minimum is subtracted first so entries stay
/// nonnegative; for `n ≤ 2` the polynomial is already positive.
pub fn taylor_normalize(q: &[f64], order: u32) -> Result<ProbVector> {
    if q.is_empty() {
        return Err(Error::invalid("taylor_normalize of an empty vector"));
    }
    if order < 1 {
        return Err(Error::invalid("taylor order must be at least 1"));
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("taylor_normalize: non-finite logit"));
    }
    let mut out = vec![0.0; q.len()];
    taylor_into(q, order, &mut out);
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("taylor_normalize: polynomial overflowed"));
    }
    Ok(ProbVector::from_vec_unchecked(out))
}

fn taylor_into(q: &[f64], order: u32, out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(q) {
        // Horner: 1 + x(1 + x/2(1 + x/3(...)))
        let mut acc = 1.0;
        for j in (1..=order).rev() {
            acc = 1.0 + acc * x / j as f64;
        }
        *o = acc;
    }
    // Order 1 can also go negative (q < -1).
    if order >= 3 || out.iter().any(|&v| v < 0.0) {
        let min = out.iter().copied().fold(f64::INFINITY, f64::min);
        out.iter_mut().for_each(|v| *v -= min);
    }
    phi_in_place(out);
}

/// `Φ = −(1/NK) Σ_i Σ_k ln softmax(q_i)_k`, natural log.
pub fn criterion_phi(logits: &LogitsMatrix) -> f64 {
    let k = logits.n_cols() as f64;
    let per_row = logits.rows().map(|row| {
        let mean = compensated_sum(row.iter().copied()) / k;
        logsumexp_finite(row) - mean
    });
    compensated_sum(per_row) / logits.n_rows() as f64
}

/// Dataset-level normalization: one `Φ`, one branch, every row mapped into
/// the simplex. `Φ == η` goes to the Taylor branch.
pub fn softrun(logits: &LogitsMatrix, cfg: &SoftrunConfig) -> Result<Softrun> {
    cfg.validate()?;
    let phi_value = criterion_phi(logits);
    let branch = if phi_value <= cfg.eta { Branch::Taylor } else { Branch::Softmax };
    let (n, k) = (logits.n_rows(), logits.n_cols());
    let mut data = vec![0.0; n * k];
    for (row, out) in logits.rows().zip(data.chunks_exact_mut(k)) {
        match branch {
            Branch::Taylor => taylor_into(row, cfg.taylor_order, out),
            Branch::Softmax => softmax_into(row, out),
        }
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(
            "softrun: normalization overflowed; logits too large for the Taylor order",
        ));
    }
    Ok(Softrun { probs: ProbMatrix::from_vec_unchecked(data, n, k), phi_value, branch })
}

/// `(1/(NK) Σ Q_ik^p)^{1/p}` for a row-stochastic matrix.
pub fn aggregate_lp(probs: &ProbMatrix, p: f64) -> f64 {
    let nk = (probs.n_rows() * probs.n_cols()) as f64;
    (compensated_sum(probs.as_slice().iter().map(|x| x.powf(p))) / nk).powf(1.0 / p)
}

pub fn mean_tsallis(probs: &ProbMatrix, alpha: f64) -> f64 {
    compensated_sum(probs.rows().map(|r| tsallis_unchecked(r, alpha))) / probs.n_rows() as f64
}

pub fn mano_score(logits: &LogitsMatrix, cfg: &SoftrunConfig) -> Result<ManoResult> {
    let Softrun { probs, phi_value, branch } = softrun(logits, cfg)?;
    Ok(ManoResult {
        score: aggregate_lp(&probs, cfg.p),
        phi_value,
        branch,
        mean_tsallis: mean_tsallis(&probs, cfg.p),
    })
}

/// `|wᵀz + b| / ‖w‖₂`.
pub fn distance_to_hyperplane(w: &[f64], b: f64, z: &[f64]) -> Result<f64> {
    if w.len() != z.len() {
        return Err(Error::invalid(format!(
            "distance_to_hyperplane: dimension mismatch {} vs {}",
            w.len(),
            z.len()
        )));
    }
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::invalid("distance_to_hyperplane: zero normal vector"));
    }
    let dot: f64 = w.iter().zip(z).map(|(a, b)| a * b).sum();
    Ok((dot + b).abs() / norm)
}

/// 99% interval of `Φ` over random logit matrices for one class count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiInterval {
    pub k: usize,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiStudyConfig {
    pub n_models: usize,
    /// Rows per simulated logit matrix.
    pub n_samples: usize,
    /// Logits are drawn uniformly in `[-logit_bound, logit_bound]`.
    pub logit_bound: f64,
    pub seed: u64,
}

impl Default for PhiStudyConfig {
    fn default() -> Self {
        Self { n_models: 100_000, n_samples: 1, logit_bound: 5.0, seed: 0 }
    }
}

/// Monte-Carlo distribution of `Φ` for random logits, reported as the
/// 0.5th and 99.5th percentiles (linear interpolation between order
/// statistics). Each class count draws from its own stream, so results for
/// one `K` do not depend on which other `K` were requested.
pub fn phi_confidence_study(k_range: &[usize], cfg: &PhiStudyConfig) -> Result<Vec<PhiInterval>> {
    if cfg.n_models < 100 {
        return Err(Error::invalid(format!("need at least 100 models, got {}", cfg.n_models)));
    }
    if cfg.n_samples < 1 {
        return Err(Error::invalid("need at least one sample per model"));
    }
    if !(cfg.logit_bound >= 0.0) || !cfg.logit_bound.is_finite() {
        return Err(Error::invalid("logit bound must be finite and nonnegative"));
    }
    k_range
        .iter()
        .map(|&k| {
            if k < 2 {
                return Err(Error::invalid(format!("class count must be at least 2, got {k}")));
            }
            let mut rng = SeededStream::new(cfg.seed, streams::PHI_STUDY + k as u64);
            let mut row = vec![0.0; k];
            let mut values: Vec<f64> = (0..cfg.n_models)
                .map(|_| {
                    let per_row = (0..cfg.n_samples).map(|_| {
                        for v in row.iter_mut() {
                            *v = rng.uniform_in(-cfg.logit_bound, cfg.logit_bound);
                        }
                        logsumexp_finite(&row) - row.iter().sum::<f64>() / k as f64
                    });
                    compensated_sum(per_row) / cfg.n_samples as f64
                })
                .collect();
            values.sort_by(f64::total_cmp);
            Ok(PhiInterval { k, low: percentile(&values, 0.005), high: percentile(&values, 0.995) })
        })
        .collect()
}

/// Linear-interpolation percentile of sorted data, `q ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
