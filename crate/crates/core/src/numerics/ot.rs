use super::{compensated_sum, ProbVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    /// Entropic regularization strength.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Convergence threshold on the L1 row-marginal violation.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { epsilon: 0.01, max_iter: 10_000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornResult {
    /// Transport cost `⟨P, C⟩` of the final plan.
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    pub marginal_error: f64,
}

const CHECK_EVERY: usize = 10;

/// Entropic optimal transport between `mu` (rows) and `nu` (columns) with
/// log-domain Sinkhorn updates. Non-convergence is reported in the result.
pub fn sinkhorn_ot(
    cost: &[f64],
    mu: &ProbVector,
    nu: &ProbVector,
    cfg: &SinkhornConfig,
) -> Result<SinkhornResult> {
    let (n, m) = (mu.len(), nu.len());
    if cost.len() != n * m {
        return Err(Error::invalid(format!(
            "sinkhorn: cost buffer of length {} does not match {n}x{m}",
            cost.len()
        )));
    }
    if let Some(i) = cost.iter().position(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::invalid(format!(
            "sinkhorn: cost entry {} at index {i} is not finite and nonnegative",
            cost[i]
        )));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(Error::invalid(format!("sinkhorn: epsilon must be > 0, got {}", cfg.epsilon)));
    }

    let eps = cfg.epsilon;
    let log_mu: Vec<f64> = mu.iter().map(|x| x.ln()).collect();
    let log_nu: Vec<f64> = nu.iter().map(|x| x.ln()).collect();
    let scaled: Vec<f64> = cost.iter().map(|c| -c / eps).collect();

    // Potentials divided by epsilon.
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut buf = vec![0.0; n.max(m)];
    let mut iterations = 0;
    let mut marginal_error = f64::INFINITY;

    while iterations < cfg.max_iter {
        for i in 0..n {
            let row = &scaled[i * m..(i + 1) * m];
            for j in 0..m {
                buf[j] = g[j] + row[j];
            }
            f[i] = log_mu[i] - lse(&buf[..m]);
        }
        for j in 0..m {
            for i in 0..n {
                buf[i] = f[i] + scaled[i * m + j];
            }
            g[j] = log_nu[j] - lse(&buf[..n]);
        }
        iterations += 1;

        if iterations % CHECK_EVERY == 0 || iterations == cfg.max_iter {
            marginal_error = row_violation(&scaled, &f, &g, mu, m);
            if marginal_error < cfg.tol {
                break;
            }
        }
    }

    let mut terms = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let lp = f[i] + g[j] + scaled[i * m + j];
            if lp > f64::NEG_INFINITY {
                terms.push(lp.exp() * cost[i * m + j]);
            }
        }
    }
    Ok(SinkhornResult {
        cost: compensated_sum(terms),
        converged: marginal_error < cfg.tol,
        iterations,
        marginal_error,
    })
}

fn row_violation(scaled: &[f64], f: &[f64], g: &[f64], mu: &[f64], m: usize) -> f64 {
    f.iter()
        .enumerate()
        .map(|(i, fi)| {
            let mass: f64 = (0..m)
                .map(|j| {
                    let lp = fi + g[j] + scaled[i * m + j];
                    if lp > f64::NEG_INFINITY { lp.exp() } else { 0.0 }
                })
                .sum();
            (mass - mu[i]).abs()
        })
        .sum()
}

// logsumexp that tolerates -inf entries (zero-mass marginals).
fn lse(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
