use crate::error::{Error, Result};

/// Stopping rule for the Jacobi solvers.
#[derive(Debug, Clone, Copy)]
pub struct JacobiConfig {
    /// Eigensolver: stop once the off-diagonal Frobenius norm is below
    /// `tol * ‖A‖_F`. SVD: skip column pairs whose cosine is below `tol`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for JacobiConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_sweeps: 100 }
    }
}

/// Eigenvalues of a symmetric `n × n` matrix (row-major) by cyclic Jacobi
/// rotations, in ascending order.
pub fn symmetric_eigenvalues(a: &[f64], n: usize, cfg: JacobiConfig) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::invalid(format!(
            "symmetric_eigenvalues: buffer of length {} is not {n}x{n}",
            a.len()
        )));
    }
    let mut a = a.to_vec();
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if total == 0.0 {
        return Ok(vec![0.0; n]);
    }

    for _ in 0..cfg.max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i * n + j] * a[i * n + j];
                }
            }
        }
        if off.sqrt() <= cfg.tol * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, n, p, q, c, s);
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

// A <- Jᵀ A J with J the Givens rotation in the (p, q) plane.
fn rotate(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = c * akp - s * akq;
        a[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = c * apk - s * aqk;
        a[q * n + k] = s * apk + c * aqk;
    }
}

/// Singular values of an `n_rows × n_cols` row-major matrix, descending.
///
/// One-sided (Hestenes) Jacobi on the narrower side: pairs of columns are
/// rotated until mutually orthogonal, and the column norms are then the
/// singular values. Unlike going through a Gram matrix this keeps small
/// singular values accurate to roughly machine precision times the largest.
pub fn singular_values(m: &[f64], n_rows: usize, n_cols: usize, cfg: JacobiConfig) -> Result<Vec<f64>> {
    if n_rows == 0 || n_cols == 0 || m.len() != n_rows * n_cols {
        return Err(Error::invalid(format!(
            "singular_values: buffer of length {} does not match shape {n_rows}x{n_cols}",
            m.len()
        )));
    }
    if let Some(i) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("singular_values: non-finite entry at index {i}")));
    }
    // `cols[j]` holds column j of A (or of Aᵀ when A is wide).
    let (n_vec, len) = (n_cols.min(n_rows), n_cols.max(n_rows));
    let mut cols: Vec<Vec<f64>> = if n_cols <= n_rows {
        (0..n_cols).map(|j| (0..n_rows).map(|i| m[i * n_cols + j]).collect()).collect()
    } else {
        m.chunks_exact(n_cols).map(<[f64]>::to_vec).collect()
    };
    debug_assert!(cols.iter().all(|c| c.len() == len));

    for _ in 0..cfg.max_sweeps {
        let mut rotated = false;
        for p in 0..n_vec {
            for q in p + 1..n_vec {
                let (head, tail) = cols.split_at_mut(q);
                let (a, b) = (&mut head[p], &mut tail[0]);
                let alpha: f64 = a.iter().map(|x| x * x).sum();
                let beta: f64 = b.iter().map(|x| x * x).sum();
                let gamma: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= cfg.tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    let (xv, yv) = (*x, *y);
                    *x = c * xv - s * yv;
                    *y = s * xv + c * yv;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Sum of singular values of an `n_rows × n_cols` row-major matrix.
pub fn nuclear_norm(m: &[f64], n_rows: usize, n_cols: usize) -> Result<f64> {
    let sv = singular_values(m, n_rows, n_cols, JacobiConfig { tol: 1e-15, max_sweeps: 60 })?;
    Ok(sv.iter().sum())
}
