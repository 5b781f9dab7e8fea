// SPDX-License-Identifier: MIT OR Apache-2.0

//! Anomaly scores from per-dimension influence, thresholding, and metrics.

use crate::error::{Error, Result};
use crate::influence::ScoreSeries;

/// Final scores in `[0, 1]` plus the scaled score of every dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyScores {
    pub scores: Vec<f64>,
    /// One scaled column per dimension.
    pub per_dim: Vec<Vec<f64>>,
    pub method: String,
}

/// Scales each dimension separately and averages across dimensions.
///
/// Per dimension: take `|raw|`, fill uncovered entries with the smallest
/// covered magnitude, then min-max scale to `[0, 1]` (a constant column
/// scales to zeros).
pub fn sep_inf(raw_per_dim: &[Vec<f64>], coverage: &[Vec<usize>]) -> Result<AnomalyScores> {
    let dims = raw_per_dim.len();
    if dims == 0 || raw_per_dim[0].is_empty() {
        return Err(Error::EmptyInput);
    }
    if coverage.len() != dims {
        return Err(Error::LengthMismatch { left: coverage.len(), right: dims });
    }
    let len = raw_per_dim[0].len();
    let mut per_dim = Vec::with_capacity(dims);
    for (raw, cov) in raw_per_dim.iter().zip(coverage) {
        if raw.len() != len {
            return Err(Error::LengthMismatch { left: raw.len(), right: len });
        }
        if cov.len() != len {
            return Err(Error::LengthMismatch { left: cov.len(), right: len });
        }
        per_dim.push(scale_dimension(raw, cov));
    }
    let scores = (0..len)
        .map(|t| per_dim.iter().map(|col| col[t]).sum::<f64>() / dims as f64)
        .collect();
    Ok(AnomalyScores { scores, per_dim, method: "sep-inf".into() })
}

/// [`sep_inf`] over one score series per dimension.
pub fn sep_inf_from_series(series: &[ScoreSeries]) -> Result<AnomalyScores> {
    let raw: Vec<Vec<f64>> = series.iter().map(|s| s.scores.clone()).collect();
    let cov: Vec<Vec<usize>> = series.iter().map(|s| s.coverage.clone()).collect();
    let mut out = sep_inf(&raw, &cov)?;
    if let Some(first) = series.first() {
        out.method = format!("{}+sep-inf", first.meta.method);
    }
    Ok(out)
}

fn scale_dimension(raw: &[f64], coverage: &[usize]) -> Vec<f64> {
    let fill = raw
        .iter()
        .zip(coverage)
        .filter(|(v, c)| **c > 0 && v.is_finite())
        .map(|(v, _)| v.abs())
        .fold(f64::INFINITY, f64::min);
    let fill = if fill.is_finite() { fill } else { 0.0 };
    let magnitudes: Vec<f64> = raw
        .iter()
        .zip(coverage)
        .map(|(v, c)| if *c > 0 && v.is_finite() { v.abs() } else { fill })
        .collect();
    let lo = magnitudes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = magnitudes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; raw.len()];
    }
    magnitudes.iter().map(|v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    KMeans,
    TopK(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyPrediction {
    pub labels: Vec<u8>,
    pub rule: ThresholdRule,
    pub threshold_value: f64,
    /// Set when all scores are equal and no split exists.
    pub degenerate: bool,
}

impl AnomalyPrediction {
    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == 1).count()
    }
}

fn check_finite(scores: &[f64]) -> Result<()> {
    if let Some(t) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("score at {t} is not finite")));
    }
    Ok(())
}

/// Two-cluster 1-D k-means: the threshold split minimizing the within-cluster
/// sum of squares. The upper cluster is labelled anomalous; the threshold is
/// the midpoint of the two cluster means.
pub fn kmeans_threshold(scores: &[f64]) -> Result<AnomalyPrediction> {
    if scores.len() < 2 {
        return Err(Error::InvalidArgument("k-means thresholding needs at least two scores".into()));
    }
    check_finite(scores)?;
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if sorted[0] == sorted[n - 1] {
        return Ok(AnomalyPrediction {
            labels: vec![0; n],
            rule: ThresholdRule::KMeans,
            threshold_value: f64::INFINITY,
            degenerate: true,
        });
    }

    // Centred prefix sums keep the SSE formula well conditioned.
    let shift = sorted.iter().sum::<f64>() / n as f64;
    let mut sum = vec![0.0; n + 1];
    let mut sum_sq = vec![0.0; n + 1];
    for (i, v) in sorted.iter().enumerate() {
        let c = v - shift;
        sum[i + 1] = sum[i] + c;
        sum_sq[i + 1] = sum_sq[i] + c * c;
    }
    let sse_fast = |cut: usize| {
        let (nl, nh) = (cut as f64, (n - cut) as f64);
        let low = sum_sq[cut] - sum[cut] * sum[cut] / nl;
        let sh = sum[n] - sum[cut];
        let high = (sum_sq[n] - sum_sq[cut]) - sh * sh / nh;
        low + high
    };
    let cuts: Vec<usize> = (1..n).filter(|&c| sorted[c - 1] < sorted[c]).collect();
    let best_fast = cuts.iter().map(|&c| sse_fast(c)).fold(f64::INFINITY, f64::min);
    // Re-rank near-ties with an exact two-pass sum.
    let tol = 1e-9 * best_fast.abs().max(1e-300) + 1e-12;
    let cut = cuts
        .iter()
        .copied()
        .filter(|&c| sse_fast(c) <= best_fast + tol)
        .map(|c| (c, two_pass_sse(&sorted[..c]) + two_pass_sse(&sorted[c..])))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, _)| c)
        .expect("at least one distinct cut");

    let low_mean = mean(&sorted[..cut]);
    let high_mean = mean(&sorted[cut..]);
    let mut threshold = 0.5 * (low_mean + high_mean);
    if !(sorted[cut - 1] < threshold && threshold <= sorted[cut]) {
        threshold = sorted[cut];
    }
    let labels = scores.iter().map(|s| u8::from(*s >= threshold)).collect();
    Ok(AnomalyPrediction { labels, rule: ThresholdRule::KMeans, threshold_value: threshold, degenerate: false })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn two_pass_sse(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Labels the `k` highest scores; ties at the boundary go to the earlier index.
pub fn topk_threshold(scores: &[f64], k: usize) -> Result<AnomalyPrediction> {
    if k == 0 || k > scores.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", scores.len())));
    }
    check_finite(scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut labels = vec![0; scores.len()];
    for &i in &order[..k] {
        labels[i] = 1;
    }
    Ok(AnomalyPrediction {
        labels,
        rule: ThresholdRule::TopK(k),
        threshold_value: scores[order[k - 1]],
        degenerate: false,
    })
}

fn check_labels(labels: &[u8]) -> Result<()> {
    if let Some(t) = labels.iter().position(|l| *l > 1) {
        return Err(Error::InvalidArgument(format!("label at {t} is not 0/1")));
    }
    Ok(())
}

/// Rank-based AUC: the probability that a random positive outscores a random
/// negative, ties counting one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    check_labels(labels)?;
    check_finite(scores)?;
    let positives = labels.iter().filter(|l| **l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::AucUndefined);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of (doubled) mid-ranks of positives keeps everything integral.
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1; doubled mid-rank = i + j + 2.
        let doubled_mid = (i + j + 2) as u128;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        doubled_rank_sum += doubled_mid * pos_in_tie;
        i = j + 1;
    }
    let p = positives as u128;
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// Confusion counts and point-wise precision / recall / F1.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MetricReport {
    pub auc: Option<f64>,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Point-wise F1 of a prediction against ground truth (no point adjustment).
pub fn f1(prediction: &[u8], labels: &[u8]) -> Result<MetricReport> {
    if prediction.len() != labels.len() {
        return Err(Error::LengthMismatch { left: prediction.len(), right: labels.len() });
    }
    check_labels(prediction)?;
    check_labels(labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, l) in prediction.iter().zip(labels) {
        match (p, l) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            _ => fn_ += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(MetricReport { auc: None, f1, precision, recall, tp, fp, tn, fn_ })
}

/// Which prediction the F1 part of an evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalRule {
    KMeans,
    /// Top-k with `k` = true anomaly count.
    TopK,
    /// The better of the two by F1.
    Best,
}

impl std::str::FromStr for EvalRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(EvalRule::KMeans),
            "topk" => Ok(EvalRule::TopK),
            "best" => Ok(EvalRule::Best),
            other => Err(Error::InvalidArgument(format!("unknown rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricReport,
    pub prediction: AnomalyPrediction,
}

/// AUC (None for single-class labels) and F1 under the chosen rule.
pub fn evaluate(scores: &[f64], labels: &[u8], rule: EvalRule) -> Result<Evaluation> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let auc_value = match auc(scores, labels) {
        Ok(v) => Some(v),
        Err(Error::AucUndefined) => None,
        Err(e) => return Err(e),
    };
    let true_count = labels.iter().filter(|l| **l == 1).count();
    let mut candidates = Vec::new();
    if matches!(rule, EvalRule::KMeans | EvalRule::Best) || true_count == 0 {
        candidates.push(kmeans_threshold(scores)?);
    }
    if matches!(rule, EvalRule::TopK | EvalRule::Best) && true_count > 0 {
        candidates.push(topk_threshold(scores, true_count)?);
    }
    let mut best: Option<Evaluation> = None;
    for prediction in candidates {
        let mut report = f1(&prediction.labels, labels)?;
        report.auc = auc_value;
        if best.as_ref().is_none_or(|b| report.f1 > b.report.f1) {
            best = Some(Evaluation { report, prediction });
        }
    }
    Ok(best.expect("at least one candidate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sep_inf_univariate_and_constant_column() {
        let raw = vec![vec![-2.0, 0.0, 1.0, 4.0]];
        let cov = vec![vec![1; 4]];
        let s = sep_inf(&raw, &cov).unwrap();
        assert_eq!(s.scores, vec![0.5, 0.0, 0.25, 1.0]);
        assert_eq!(s.scores, s.per_dim[0]);

        let raw2 = vec![raw[0].clone(), vec![3.0; 4]];
        let s2 = sep_inf(&raw2, &[vec![1; 4], vec![1; 4]]).unwrap();
        for (a, b) in s2.scores.iter().zip(&s.scores) {
            assert_eq!(*a, 0.5 * b);
        }
        assert_eq!(sep_inf(&[], &[]).unwrap_err(), Error::EmptyInput);
    }

    #[test]
    fn sep_inf_imputes_uncovered() {
        let raw = vec![vec![f64::NAN, -1.0, 3.0, 5.0]];
        let s = sep_inf(&raw, &[vec![0, 1, 1, 1]]).unwrap();
        assert_eq!(s.scores, vec![0.0, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn sep_inf_matches_direct_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw: Vec<Vec<f64>> = (0..3).map(|_| (0..50).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let cov = vec![vec![1; 50]; 3];
        let s = sep_inf(&raw, &cov).unwrap();
        for t in 0..50 {
            let mut acc = 0.0;
            for col in &raw {
                let mags: Vec<f64> = col.iter().map(|v| v.abs()).collect();
                let lo = mags.iter().cloned().fold(f64::MAX, f64::min);
                let hi = mags.iter().cloned().fold(f64::MIN, f64::max);
                acc += (mags[t] - lo) / (hi - lo);
            }
            assert!((s.scores[t] - acc / 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn kmeans_examples() {
        let p = kmeans_threshold(&[0.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.labels, vec![0, 0, 0, 1, 1]);
        assert_eq!(p.threshold_value, 0.5);
        let d = kmeans_threshold(&[0.3; 6]).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.anomaly_count(), 0);
        assert_eq!(d.threshold_value, f64::INFINITY);
        assert!(kmeans_threshold(&[1.0]).is_err());
    }

    #[test]
    fn topk_examples() {
        let s = [0.1, 0.9, 0.5, 0.9, 0.2];
        assert_eq!(topk_threshold(&s, 5).unwrap().labels, vec![1; 5]);
        assert_eq!(topk_threshold(&[0.1, 0.7, 0.3], 1).unwrap().labels, vec![0, 1, 0]);
        // Two tied maxima, k = 1 → earlier index wins.
        assert_eq!(topk_threshold(&s, 1).unwrap().labels, vec![0, 1, 0, 0, 0]);
        assert!(topk_threshold(&s, 0).is_err());
        assert!(topk_threshold(&s, 6).is_err());
    }

    #[test]
    fn topk_matches_stable_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
            let k = rng.random_range(1..=n);
            let mut keyed: Vec<(f64, usize)> = s.iter().enumerate().map(|(i, v)| (-v, i)).collect();
            keyed.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut expect = vec![0u8; n];
            for (_, i) in &keyed[..k] {
                expect[*i] = 1;
            }
            assert_eq!(topk_threshold(&s, k).unwrap().labels, expect);
        }
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.4; 5], &[0, 1, 0, 1, 0]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.2], &[1, 1]).unwrap_err(), Error::AucUndefined);
        assert!(auc(&[0.1], &[1, 0]).is_err());
    }

    #[test]
    fn f1_examples() {
        let r = f1(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap();
        assert_eq!(r.f1, 1.0);
        let r = f1(&[0, 0, 0, 0], &[0, 1, 1, 0]).unwrap();
        assert_eq!((r.f1, r.precision, r.recall), (0.0, 0.0, 0.0));
        // tp=1, fp=2, fn=1 → p=1/3, r=1/2, f1=0.4.
        let r = f1(&[1, 1, 1, 0, 0], &[1, 0, 0, 1, 0]).unwrap();
        assert_eq!((r.tp, r.fp, r.tn, r.fn_), (1, 2, 1, 1));
        assert!((r.f1 - 0.4).abs() < 1e-15);
        assert!(f1(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn evaluate_best_takes_max() {
        let scores = [0.0, 0.1, 0.2, 0.3, 0.95, 1.0, 0.5];
        let labels = [0, 0, 0, 0, 1, 1, 1];
        let km = evaluate(&scores, &labels, EvalRule::KMeans).unwrap();
        let tk = evaluate(&scores, &labels, EvalRule::TopK).unwrap();
        let best = evaluate(&scores, &labels, EvalRule::Best).unwrap();
        assert_eq!(best.report.f1, km.report.f1.max(tk.report.f1));
        assert_eq!(best.report.auc, Some(1.0));
        let single = evaluate(&scores, &[0; 7], EvalRule::Best).unwrap();
        assert_eq!(single.report.auc, None);
    }

    proptest! {
        #[test]
        fn auc_monotone_invariance(pairs in proptest::collection::vec((0.0f64..3.0, 0u8..2), 2..40)) {
            let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let labels: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let base = auc(&scores, &labels).unwrap();
            let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            let cube: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
            prop_assert_eq!(base, auc(&exp, &labels).unwrap());
            prop_assert_eq!(base, auc(&cube, &labels).unwrap());
        }

        #[test]
        fn kmeans_is_threshold_rule(scores in proptest::collection::vec(0.0f64..1.0, 2..100)) {
            let p = kmeans_threshold(&scores).unwrap();
            let max_normal = scores.iter().zip(&p.labels).filter(|(_, l)| **l == 0).map(|(s, _)| *s).fold(f64::MIN, f64::max);
            let min_anom = scores.iter().zip(&p.labels).filter(|(_, l)| **l == 1).map(|(s, _)| *s).fold(f64::MAX, f64::min);
            prop_assert!(max_normal < min_anom);
        }

        #[test]
        fn sep_inf_bounds(raw in proptest::collection::vec(-1e6f64..1e6, 1..60)) {
            let n = raw.len();
            let s = sep_inf(&[raw.clone(), raw.iter().map(|v| -v * 0.5).collect()], &[vec![1; n], vec![1; n]]).unwrap();
            prop_assert!(s.scores.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
