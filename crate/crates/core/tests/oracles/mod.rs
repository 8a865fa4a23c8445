//! Reference implementations for the integration and acceptance tests.
//! They deliberately share no code with the library and favor obviously
//! correct over fast.
#![allow(dead_code)]

/// Nuclear norm from the spectrum of the symmetric embedding
/// `[[0, A], [Aᵀ, 0]]`, whose eigenvalues are `±σ_i` padded with zeros, so
/// `‖A‖_* = ½ Σ|λ|`. Eigenvalues come from classical (largest-pivot) Jacobi.
pub fn nuclear_norm_embedding(a: &[f64], rows: usize, cols: usize) -> f64 {
    let n = rows + cols;
    let mut m = vec![0.0; n * n];
    for i in 0..rows {
        for j in 0..cols {
            m[i * n + rows + j] = a[i * cols + j];
            m[(rows + j) * n + i] = a[i * cols + j];
        }
    }
    0.5 * classical_jacobi(m, n).iter().map(|l| l.abs()).sum::<f64>()
}

pub fn classical_jacobi(mut m: Vec<f64>, n: usize) -> Vec<f64> {
    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..200 * n * n {
        let (mut p, mut q, mut big) = (0, 0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                if m[i * n + j].abs() > big {
                    big = m[i * n + j].abs();
                    p = i;
                    q = j;
                }
            }
        }
        if big <= 1e-17 * frob {
            break;
        }
        let (app, aqq, apq) = (m[p * n + p], m[q * n + q], m[p * n + q]);
        let theta = 0.5 * (2.0 * apq).atan2(aqq - app);
        let (s, c) = theta.sin_cos();
        // Columns then rows: M <- Gᵀ M G.
        for k in 0..n {
            let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
            m[k * n + p] = c * mkp - s * mkq;
            m[k * n + q] = s * mkp + c * mkq;
        }
        for k in 0..n {
            let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
            m[p * n + k] = c * mpk - s * mqk;
            m[q * n + k] = s * mpk + c * mqk;
        }
        m[p * n + q] = 0.0;
        m[q * n + p] = 0.0;
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

/// Exact discrete optimal transport cost by successive shortest paths on
/// the transportation network (Bellman–Ford on the residual graph).
pub fn exact_ot(cost: &[f64], mu: &[f64], nu: &[f64]) -> f64 {
    let (n, m) = (mu.len(), nu.len());
    let (src, sink) = (0, n + m + 1);
    struct Edge {
        to: usize,
        cap: f64,
        cost: f64,
        rev: usize,
    }
    let mut g: Vec<Vec<Edge>> = (0..n + m + 2).map(|_| Vec::new()).collect();
    let add = |g: &mut Vec<Vec<Edge>>, a: usize, b: usize, cap: f64, cost: f64| {
        let ra = g[b].len();
        let rb = g[a].len();
        g[a].push(Edge { to: b, cap, cost, rev: ra });
        g[b].push(Edge { to: a, cap: 0.0, cost: -cost, rev: rb });
    };
    for i in 0..n {
        add(&mut g, src, 1 + i, mu[i], 0.0);
        for j in 0..m {
            add(&mut g, 1 + i, 1 + n + j, 2.0, cost[i * m + j]);
        }
    }
    for (j, &v) in nu.iter().enumerate() {
        add(&mut g, 1 + n + j, sink, v, 0.0);
    }

    let mut total = 0.0;
    let mut flow = 0.0;
    while flow < 1.0 - 1e-13 {
        let nodes = g.len();
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes];
        dist[src] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for (ei, e) in g[u].iter().enumerate() {
                    if e.cap > 1e-15 && dist[u] + e.cost < dist[e.to] - 1e-15 {
                        dist[e.to] = dist[u] + e.cost;
                        prev[e.to] = Some((u, ei));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_infinite() {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while let Some((u, ei)) = prev[v] {
            push = push.min(g[u][ei].cap);
            v = u;
        }
        let mut v = sink;
        while let Some((u, ei)) = prev[v] {
            g[u][ei].cap -= push;
            let (to, rev) = (g[u][ei].to, g[u][ei].rev);
            g[to][rev].cap += push;
            v = u;
        }
        flow += push;
        total += push * dist[sink];
    }
    total
}

/// Standard normal CDF by composite Simpson integration of the density.
pub fn normal_cdf(x: f64) -> f64 {
    let steps = 20_000;
    let h = x / steps as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = f(0.0) + f(x);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    0.5 + acc * h / 3.0
}

/// Average ranks by direct counting, `O(n²)`.
pub fn naive_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

pub fn spearman_naive(x: &[f64], y: &[f64]) -> f64 {
    pearson(&naive_ranks(x), &naive_ranks(y))
}

/// Softmax straight from the definition; only for moderate logits.
pub fn softmax_naive(q: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = q.iter().map(|x| x.exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}
