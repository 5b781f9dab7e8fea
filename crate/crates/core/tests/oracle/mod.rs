// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's numerics.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timeinf::{ArInstance, TimeSeries};

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, v)| {
        let mut r = row.clone();
        r.push(*v);
        r
    }).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        assert!(m[col][col] != 0.0, "singular system");
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = m[i][n];
        for j in i + 1..n {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    x
}

pub fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// `|a − b| / max(|a|, |b|)`, zero when both are zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn rel_err_vec(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Random SPD matrix `AᵀA + I`.
pub fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[k][i] * a[k][j];
            }
            s[i][j] = acc + if i == j { 1.0 } else { 0.0 };
        }
    }
    s
}

/// `x_t = Σ coefs[k]·x_{t−1−k} + noise·u_t` with uniform `u_t ∈ [−1, 1)`.
pub fn ar_series(len: usize, coefs: &[f64], noise: f64, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; len];
    for t in 0..len {
        let mut v = noise * rng.random_range(-1.0..1.0);
        for (k, c) in coefs.iter().enumerate() {
            if t > k {
                v += c * x[t - 1 - k];
            }
        }
        x[t] = v;
    }
    TimeSeries::univariate(x).unwrap()
}

pub fn features(inst: &ArInstance, intercept: bool) -> Vec<f64> {
    let mut f = inst.covariates.clone();
    if intercept {
        f.push(1.0);
    }
    f
}

/// Weighted least squares `argmin Σ wᵢ (yᵢ − xᵢᵀθ)²` via the normal equations.
pub fn weighted_ls(rows: &[(Vec<f64>, f64, f64)]) -> Vec<f64> {
    let q = rows[0].0.len();
    let mut a = vec![vec![0.0; q]; q];
    let mut b = vec![0.0; q];
    for (x, y, w) in rows {
        for i in 0..q {
            b[i] += w * x[i] * y;
            for j in 0..q {
                a[i][j] += w * x[i] * x[j];
            }
        }
    }
    gauss_solve(&a, &b)
}

/// Minimizer of `(1−ε)·mean_i ρ(train_i) + ε·Σ_k w_k ρ(extra_k)` for squared loss.
pub fn contaminated_fit(train: &[ArInstance], extra: &[(&ArInstance, f64)], eps: f64, intercept: bool) -> Vec<f64> {
    let n = train.len() as f64;
    let mut rows: Vec<(Vec<f64>, f64, f64)> =
        train.iter().map(|i| (features(i, intercept), i.target, (1.0 - eps) / n)).collect();
    rows.extend(extra.iter().map(|(i, w)| (features(i, intercept), i.target, eps * w)));
    weighted_ls(&rows)
}

pub fn plain_fit(train: &[ArInstance], intercept: bool) -> Vec<f64> {
    contaminated_fit(train, &[], 0.0, intercept)
}

pub fn sq_loss(theta: &[f64], inst: &ArInstance, intercept: bool) -> f64 {
    let f = features(inst, intercept);
    let r = inst.target - f.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
    r * r
}

/// Central difference in ε of `g(θ(ε))` under contamination.
pub fn contamination_derivative(
    train: &[ArInstance],
    extra: &[(&ArInstance, f64)],
    eps: f64,
    g: impl Fn(&[f64]) -> f64,
) -> f64 {
    let plus = contaminated_fit(train, extra, eps, false);
    let minus = contaminated_fit(train, extra, -eps, false);
    (g(&plus) - g(&minus)) / (2.0 * eps)
}

/// Central difference in ε of the parameters under contamination.
pub fn contamination_param_derivative(train: &[ArInstance], extra: &[(&ArInstance, f64)], eps: f64) -> Vec<f64> {
    let plus = contaminated_fit(train, extra, eps, false);
    let minus = contaminated_fit(train, extra, -eps, false);
    plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * eps)).collect()
}

/// Every instance whose span `[target − m, target]` contains `point`.
pub fn covering(instances: &[ArInstance], point: usize) -> Vec<usize> {
    instances
        .iter()
        .enumerate()
        .filter(|(_, inst)| inst.target_index >= point && inst.target_index - inst.covariates.len() <= point)
        .map(|(j, _)| j)
        .collect()
}

/// Brute-force pair-count AUC: positive above negative counts 1, ties 1/2.
pub fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Best two-cluster split of the scores by exhaustive cut scan with two-pass
/// SSE. Returns the lowest score of the upper cluster.
pub fn exhaustive_two_means_cut(scores: &[f64]) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sse = |xs: &[f64]| {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
    };
    let mut best = (f64::INFINITY, 0);
    for cut in 1..sorted.len() {
        if sorted[cut - 1] == sorted[cut] {
            continue;
        }
        let total = sse(&sorted[..cut]) + sse(&sorted[cut..]);
        if total < best.0 {
            best = (total, cut);
        }
    }
    sorted[best.1]
}
