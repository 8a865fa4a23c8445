//! Numeric kernels shared by the estimators.
//!
//! Everything here is a pure function of its inputs. Matrices are stored
//! row-major in a flat `Vec<f64>`; rows are samples and columns are classes.

mod linalg;
mod matrix;
mod ot;

pub use linalg::{nuclear_norm, singular_values, symmetric_eigenvalues, JacobiConfig};
pub use matrix::{LogitsMatrix, ProbMatrix, ProbVector};
pub use ot::{sinkhorn_ot, SinkhornConfig, SinkhornResult};

use crate::error::{Error, Result};

/// Neumaier-compensated sum. The result does not depend on how the caller
/// chunks its work, only on the order of the iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::invalid(format!(
            "{what}: non-finite value {} at index {i}",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// `max(q) + ln Σ exp(q_k − max(q))`.
pub fn logsumexp(q: &[f64]) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::invalid("logsumexp of an empty vector"));
    }
    ensure_finite(q, "logsumexp")?;
    Ok(logsumexp_finite(q))
}

pub(crate) fn logsumexp_finite(q: &[f64]) -> f64 {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = q.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Numerically stable softmax via max subtraction.
pub fn softmax(q: &[f64]) -> Result<ProbVector> {
    if q.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    ensure_finite(q, "softmax")?;
    let mut out = vec![0.0; q.len()];
    softmax_into(q, &mut out);
    Ok(ProbVector::from_vec_unchecked(out))
}

pub(crate) fn softmax_into(q: &[f64], out: &mut [f64]) {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(q) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// The link `u ↦ u / ‖u‖₁` on the nonnegative orthant, with `φ(0)` and
/// every constant vector mapped to the uniform distribution.
pub fn phi(u: &[f64]) -> Result<ProbVector> {
    if u.is_empty() {
        return Err(Error::invalid("phi of an empty vector"));
    }
    ensure_finite(u, "phi")?;
    if let Some(i) = u.iter().position(|&x| x < 0.0) {
        return Err(Error::invalid(format!(
            "phi: negative entry {} at index {i}",
            u[i]
        )));
    }
    let mut out = u.to_vec();
    phi_in_place(&mut out);
    Ok(ProbVector::from_vec_unchecked(out))
}

/// Caller guarantees nonnegative finite entries.
pub(crate) fn phi_in_place(u: &mut [f64]) {
    let k = u.len() as f64;
    let first = u[0];
    if u.iter().all(|&x| x == first) {
        u.iter_mut().for_each(|x| *x = 1.0 / k);
        return;
    }
    let total: f64 = u.iter().sum();
    u.iter_mut().for_each(|x| *x /= total);
}

/// Entry-wise `L_p` norm `(Σ |m|^p)^{1/p}` of a matrix given by its entries.
pub fn entrywise_lp_norm(entries: &[f64], p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("entrywise_lp_norm requires finite p > 1, got {p}")));
    }
    ensure_finite(entries, "entrywise_lp_norm")?;
    Ok(compensated_sum(entries.iter().map(|x| x.abs().powf(p))).powf(1.0 / p))
}

/// Tsallis entropy with the `1/α` prefactor: `(1/α)(α−1)⁻¹(1 − ‖p‖_α^α)`.
pub fn tsallis_entropy(p: &ProbVector, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("tsallis_entropy requires finite alpha > 1, got {alpha}")));
    }
    Ok(tsallis_unchecked(p, alpha))
}

pub(crate) fn tsallis_unchecked(p: &[f64], alpha: f64) -> f64 {
    let norm_pow: f64 = p.iter().map(|x| x.powf(alpha)).sum();
    (1.0 - norm_pow) / (alpha * (alpha - 1.0))
}

/// `KL(p ‖ s) = Σ p_k ln(p_k / s_k)` with `0 · ln 0 = 0`.
pub fn kl_divergence(p: &ProbVector, s: &ProbVector) -> Result<f64> {
    if p.len() != s.len() {
        return Err(Error::invalid(format!(
            "kl_divergence: length mismatch {} vs {}",
            p.len(),
            s.len()
        )));
    }
    let mut terms = Vec::with_capacity(p.len());
    for (index, (&pk, &sk)) in p.iter().zip(s.iter()).enumerate() {
        if pk == 0.0 {
            continue;
        }
        if sk == 0.0 {
            return Err(Error::DivergenceUndefined { index, mass: pk });
        }
        terms.push(pk * (pk / sk).ln());
    }
    // Rounding can push an exact zero slightly negative.
    Ok(compensated_sum(terms).max(0.0))
}

/// Which normalization of the Shannon entropy to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyForm {
    /// `−Σ p_k ln p_k`
    Standard,
    /// `−(1/K) Σ p_k ln p_k`, the form the criterion inequality is stated with.
    ClassAveraged,
}

pub fn shannon_entropy(p: &ProbVector, form: EntropyForm) -> f64 {
    let h = shannon_unchecked(p);
    match form {
        EntropyForm::Standard => h,
        EntropyForm::ClassAveraged => h / p.len() as f64,
    }
}

pub(crate) fn shannon_unchecked(p: &[f64]) -> f64 {
    let h: f64 = p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    h.max(0.0)
}
