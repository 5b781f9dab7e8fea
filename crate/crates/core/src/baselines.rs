// SPDX-License-Identifier: MIT OR Apache-2.0

//! Attribution baselines sharing the AR model: block leave-out refits,
//! conditional influence, and subsampling-based nonparametric influence.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ar::{fit, ArConfig, NormalEquations};
use crate::error::{Error, Result};
use crate::influence::{InfluenceContext, ScoreMeta, ScoreSeries};
use crate::series::{make_instances, neighborhood, ArInstance, TimeSeries, WindowSpec};
use crate::solvers::SolverChoice;

/// For every point: drop all instances covering it, refit, and report the
/// mean loss of the refit on the dropped instances minus the full fit's mean
/// loss on the same instances. Points whose removal leaves fewer instances
/// than parameters (or an unsolvable design) get coverage 0.
pub fn block_loocv_series(series: &TimeSeries, dim: usize, spec: WindowSpec, cfg: ArConfig) -> Result<ScoreSeries> {
    check_block_len(spec, cfg)?;
    let len = series.column(dim)?.len();
    if len <= 2 * spec.block_len {
        return Err(Error::SeriesTooShort { len, block_len: 2 * spec.block_len });
    }
    let set = make_instances(series, dim, spec)?;
    let full = fit(&set, cfg)?;
    let full_eq = NormalEquations::from_instances(cfg, set.instances())?;
    let params = cfg.num_params();

    let per_point: Vec<Option<(f64, usize)>> = (0..len)
        .into_par_iter()
        .map(|t| {
            let nb = neighborhood(t, &set).ok()?;
            let held = &set.instances()[nb.members.clone()];
            if set.len() - held.len() < params {
                return None;
            }
            let mut eq = full_eq.clone();
            for inst in held {
                eq.remove(inst).ok()?;
            }
            let refit = eq.solve().ok()?;
            let count = held.len() as f64;
            let mut refit_loss = 0.0;
            let mut full_loss = 0.0;
            for inst in held {
                refit_loss += refit.loss(inst).ok()?;
                full_loss += full.loss(inst).ok()?;
            }
            Some((refit_loss / count - full_loss / count, held.len()))
        })
        .collect();

    let (scores, coverage) = per_point
        .into_iter()
        .map(|p| p.map_or((f64::NAN, 0), |(s, c)| (s, c)))
        .unzip();
    Ok(ScoreSeries {
        scores,
        coverage,
        meta: ScoreMeta {
            method: "block-loocv".into(),
            block_len: spec.block_len,
            stride: spec.stride,
            solver: None,
            note: Some("refit loss minus full-fit loss on the held-out neighborhood".into()),
        },
    })
}

fn check_block_len(spec: WindowSpec, cfg: ArConfig) -> Result<()> {
    if spec.block_len != cfg.block_len {
        return Err(Error::BlockLenMismatch { expected: spec.block_len, got: cfg.block_len });
    }
    Ok(())
}

/// Self block influence of the instance whose target is each point. Points
/// that are not a target (the first `m`, or skipped by the stride) get
/// coverage 0.
pub fn conditional_influence_series(
    series: &TimeSeries,
    dim: usize,
    spec: WindowSpec,
    cfg: ArConfig,
    solver: SolverChoice,
) -> Result<ScoreSeries> {
    check_block_len(spec, cfg)?;
    let set = make_instances(series, dim, spec)?;
    let model = fit(&set, cfg)?;
    let ctx = InfluenceContext::new(model, set, solver)?.with_cache()?;
    conditional_influence_from_context(&ctx)
}

pub fn conditional_influence_from_context(ctx: &InfluenceContext) -> Result<ScoreSeries> {
    let set = ctx.instances();
    let per_instance = ctx.self_block_influences()?;
    let mut scores = vec![f64::NAN; set.series_len()];
    let mut coverage = vec![0; set.series_len()];
    for (inst, value) in set.instances().iter().zip(per_instance) {
        scores[inst.target_index] = value;
        coverage[inst.target_index] = 1;
    }
    Ok(ScoreSeries {
        scores,
        coverage,
        meta: ScoreMeta {
            method: "conditional".into(),
            block_len: set.block_len(),
            stride: set.stride(),
            solver: Some(ctx.solver_kind()),
            note: None,
        },
    })
}

/// Random subsets for the nonparametric estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SubsampleSpec {
    pub num_subsets: usize,
    pub subset_size: usize,
    pub seed: u64,
}

const MAX_REDRAWS: u64 = 10;

impl SubsampleSpec {
    fn validate(&self, n: usize) -> Result<()> {
        if self.num_subsets < 2 {
            return Err(Error::InvalidArgument("need at least two subsets".into()));
        }
        if self.subset_size == 0 || self.subset_size >= n {
            return Err(Error::InvalidArgument(format!(
                "subset size {} must lie in 1..{n}",
                self.subset_size
            )));
        }
        Ok(())
    }

    /// Draws the subsets of one attempt. Subset `k` has its own ChaCha stream,
    /// so the draw does not depend on evaluation order.
    pub fn draw(&self, n: usize, attempt: u64) -> Vec<Vec<usize>> {
        (0..self.num_subsets)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream((attempt << 32) | k as u64);
                let mut subset = sample(&mut rng, n, self.subset_size).into_vec();
                subset.sort_unstable();
                subset
            })
            .collect()
    }
}

/// Every `size`-element subset of `0..n` in lexicographic order.
pub fn exhaustive_subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < size - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::with_capacity(size), &mut out);
    out
}

/// Mean test loss over subsets containing every instance of `target_block`
/// minus the mean over subsets containing none of them. Subsets that split
/// the block count toward neither side.
///
/// `trainer` fits a predictor on an instance list; `scorer` returns the loss
/// of a predictor on one instance.
pub fn nonparametric_influence_from_subsets<P, T, S>(
    trainer: T,
    scorer: S,
    instances: &[ArInstance],
    target_block: &[usize],
    test: &ArInstance,
    subsets: &[Vec<usize>],
) -> Result<f64>
where
    P: Send,
    T: Fn(&[ArInstance]) -> Result<P> + Sync,
    S: Fn(&P, &ArInstance) -> f64 + Sync,
{
    if target_block.is_empty() {
        return Err(Error::InvalidArgument("target block is empty".into()));
    }
    if let Some(&bad) = target_block.iter().chain(subsets.iter().flatten()).find(|&&i| i >= instances.len()) {
        return Err(Error::InvalidArgument(format!("instance index {bad} out of range")));
    }
    let mut ordered: Vec<&Vec<usize>> = subsets.iter().collect();
    ordered.sort();

    let sides: Vec<Option<bool>> = ordered
        .iter()
        .map(|s| {
            let present = target_block.iter().filter(|i| s.binary_search(i).is_ok()).count();
            match present {
                0 => Some(false),
                p if p == target_block.len() => Some(true),
                _ => None,
            }
        })
        .collect();
    if !sides.contains(&Some(true)) || !sides.contains(&Some(false)) {
        return Err(Error::DegenerateSubsampling);
    }

    let losses: Vec<Option<(bool, f64)>> = ordered
        .par_iter()
        .zip(sides.par_iter())
        .map(|(subset, side)| -> Result<Option<(bool, f64)>> {
            let Some(side) = *side else { return Ok(None) };
            let train: Vec<ArInstance> = subset.iter().map(|&i| instances[i].clone()).collect();
            let predictor = trainer(&train)?;
            Ok(Some((side, scorer(&predictor, test))))
        })
        .collect::<Result<_>>()?;

    let (mut inc_sum, mut inc_n, mut exc_sum, mut exc_n) = (0.0, 0usize, 0.0, 0usize);
    for (side, loss) in losses.into_iter().flatten() {
        if side {
            inc_sum += loss;
            inc_n += 1;
        } else {
            exc_sum += loss;
            exc_n += 1;
        }
    }
    Ok(inc_sum / inc_n as f64 - exc_sum / exc_n as f64)
}

/// Nonparametric influence with `spec.num_subsets` random subsets, redrawing
/// up to ten times when no draw both includes and excludes the block.
pub fn nonparametric_influence<P, T, S>(
    trainer: T,
    scorer: S,
    instances: &[ArInstance],
    target_block: &[usize],
    test: &ArInstance,
    spec: SubsampleSpec,
) -> Result<f64>
where
    P: Send,
    T: Fn(&[ArInstance]) -> Result<P> + Sync,
    S: Fn(&P, &ArInstance) -> f64 + Sync,
{
    spec.validate(instances.len())?;
    for attempt in 0..MAX_REDRAWS {
        let subsets = spec.draw(instances.len(), attempt);
        match nonparametric_influence_from_subsets(&trainer, &scorer, instances, target_block, test, &subsets) {
            Err(Error::DegenerateSubsampling) => continue,
            other => return other,
        }
    }
    Err(Error::DegenerateSubsampling)
}
