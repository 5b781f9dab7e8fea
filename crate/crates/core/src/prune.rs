// SPDX-License-Identifier: MIT OR Apache-2.0

//! Block-wise data pruning: rank contiguous training segments by their
//! influence on validation loss, remove them one at a time, refit, and track
//! test R² / RMSE.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ar::{fit, fit_instances, ArConfig, FittedAr};
use crate::error::{Error, Result};
use crate::influence::InfluenceContext;
use crate::series::{make_instances_in_range, ArInstance, InstanceSet, TimeSeries, WindowSpec};
use crate::solvers::SolverChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalOrder {
    /// Most helpful (most negative score) first.
    DescendingHelpful,
    /// Least helpful (most positive score) first.
    AscendingHelpful,
    Random(u64),
}

impl std::str::FromStr for RemovalOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "descending" => Ok(RemovalOrder::DescendingHelpful),
            "ascending" => Ok(RemovalOrder::AscendingHelpful),
            _ => match s.strip_prefix("random:") {
                Some(seed) => seed
                    .parse()
                    .map(RemovalOrder::Random)
                    .map_err(|_| Error::InvalidArgument(format!("bad random seed in '{s}'"))),
                None => Err(Error::InvalidArgument(format!("unknown removal order '{s}'"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PruneConfig {
    pub train_len: usize,
    pub val_len: usize,
    pub test_len: usize,
    pub block_len: usize,
    /// Length of each removal unit; defaults to `block_len`.
    pub prune_block_size: usize,
    pub num_steps: usize,
    pub order: RemovalOrder,
    pub ridge: f64,
    pub include_intercept: bool,
    pub solver: SolverChoice,
}

impl PruneConfig {
    pub fn new(train_len: usize, val_len: usize, test_len: usize, block_len: usize, num_steps: usize) -> Self {
        Self {
            train_len,
            val_len,
            test_len,
            block_len,
            prune_block_size: block_len,
            num_steps,
            order: RemovalOrder::DescendingHelpful,
            ridge: 1e-8,
            include_intercept: false,
            solver: SolverChoice::direct(),
        }
    }

    pub fn ar_config(&self) -> ArConfig {
        ArConfig::new(self.block_len).with_ridge(self.ridge).with_intercept(self.include_intercept)
    }

    fn validate(&self, series_len: usize) -> Result<()> {
        if self.prune_block_size < self.block_len {
            return Err(Error::InvalidArgument(format!(
                "prune block size {} is shorter than block length {}",
                self.prune_block_size, self.block_len
            )));
        }
        if self.train_len <= self.block_len || self.val_len == 0 || self.test_len == 0 {
            return Err(Error::InvalidArgument("train must exceed the block length; val and test must be non-empty".into()));
        }
        let total = self.train_len + self.val_len + self.test_len;
        if total > series_len {
            return Err(Error::SeriesTooShort { len: series_len, block_len: total });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PruneRecord {
    pub step: usize,
    pub fraction_removed: f64,
    pub r2: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneCurve {
    pub records: Vec<PruneRecord>,
    /// Set when a step could not refit and the curve stopped early.
    pub truncated: bool,
    /// Score of each prune block, computed once before any removal.
    pub block_scores: Vec<f64>,
    /// Prune block indices in removal order.
    pub removal_order: Vec<usize>,
}

/// Sequential train / validation / test partition with the prune blocks of
/// the training part.
#[derive(Debug, Clone)]
pub struct PrunePlan {
    pub train: InstanceSet,
    pub val: InstanceSet,
    pub test: InstanceSet,
    /// Time ranges of the prune blocks.
    pub blocks: Vec<Range<usize>>,
    /// Training-instance indices whose span touches each block.
    pub members: Vec<Vec<usize>>,
}

/// Splits the first `train + val + test` points of column `dim`. Validation
/// and test instances borrow their lags from the preceding partition.
pub fn plan(series: &TimeSeries, dim: usize, cfg: &PruneConfig) -> Result<PrunePlan> {
    cfg.validate(series.len())?;
    let spec = WindowSpec::new(cfg.block_len, 1)?;
    let val_start = cfg.train_len;
    let test_start = val_start + cfg.val_len;
    let end = test_start + cfg.test_len;
    let train = make_instances_in_range(series, dim, spec, cfg.block_len..val_start)?;
    let val = make_instances_in_range(series, dim, spec, val_start..test_start)?;
    let test = make_instances_in_range(series, dim, spec, test_start..end)?;

    let blocks: Vec<Range<usize>> = (0..cfg.train_len)
        .step_by(cfg.prune_block_size)
        .map(|start| start..(start + cfg.prune_block_size).min(cfg.train_len))
        .collect();
    if blocks.len() < 2 {
        return Err(Error::InvalidArgument("training partition yields fewer than two prune blocks".into()));
    }
    let members = blocks
        .iter()
        .map(|b| {
            train
                .instances()
                .iter()
                .enumerate()
                .filter(|(_, inst)| touches(inst, b))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    Ok(PrunePlan { train, val, test, blocks, members })
}

fn touches(inst: &ArInstance, block: &Range<usize>) -> bool {
    inst.span_start() < block.end && inst.target_index >= block.start
}

/// Mean block influence of each prune block over (member × validation) pairs.
/// Negative means upweighting the block lowers validation loss.
pub fn score_blocks(ctx: &InfluenceContext, plan: &PrunePlan) -> Result<Vec<f64>> {
    ctx.block_influence_matrix(&plan.members, &plan.val)
}

/// `(R², RMSE)` of predictions against targets.
pub fn r2_rmse(predictions: &[f64], targets: &[f64]) -> Result<(f64, f64)> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: targets.len() });
    }
    if targets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let sst: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    let sse: f64 = predictions.iter().zip(targets).map(|(p, y)| (y - p) * (y - p)).sum();
    if sst == 0.0 {
        return Err(Error::R2Undefined);
    }
    Ok((1.0 - sse / sst, (sse / n).sqrt()))
}

/// One-step-ahead test metrics of a fitted model.
pub fn evaluate_model(model: &FittedAr, test: &InstanceSet) -> Result<(f64, f64)> {
    let predictions = test.instances().iter().map(|i| model.predict(i)).collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = test.instances().iter().map(|i| i.target).collect();
    r2_rmse(&predictions, &targets)
}

fn removal_sequence(scores: &[f64], order: RemovalOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    match order {
        RemovalOrder::DescendingHelpful => idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b))),
        RemovalOrder::AscendingHelpful => idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b))),
        RemovalOrder::Random(seed) => idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
    }
    idx
}

/// Scores the blocks once, then removes them one per step in the configured
/// order, refitting from scratch on the surviving instances each time.
pub fn run_prune(series: &TimeSeries, dim: usize, cfg: &PruneConfig) -> Result<PruneCurve> {
    let plan = plan(series, dim, cfg)?;
    let ar_cfg = cfg.ar_config();
    let base = fit(&plan.train, ar_cfg)?;
    let (r2, rmse) = evaluate_model(&base, &plan.test)?;
    let ctx = InfluenceContext::new(base, plan.train.clone(), cfg.solver)?.with_cache()?;
    let block_scores = score_blocks(&ctx, &plan)?;
    let order = removal_sequence(&block_scores, cfg.order);

    let total_blocks = plan.blocks.len() as f64;
    let mut records = vec![PruneRecord { step: 0, fraction_removed: 0.0, r2, rmse }];
    let mut removed = vec![false; plan.train.len()];
    let mut truncated = false;
    let min_instances = ar_cfg.num_params() + 1;
    for (step, &block) in order.iter().enumerate().take(cfg.num_steps) {
        for &j in &plan.members[block] {
            removed[j] = true;
        }
        let survivors: Vec<ArInstance> = plan
            .train
            .instances()
            .iter()
            .zip(&removed)
            .filter(|(_, r)| !**r)
            .map(|(inst, _)| inst.clone())
            .collect();
        if survivors.len() < min_instances {
            truncated = true;
            break;
        }
        let model = match fit_instances(&survivors, ar_cfg) {
            Ok(m) => m,
            Err(e) if e.is_numerical() => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let (r2, rmse) = evaluate_model(&model, &plan.test)?;
        records.push(PruneRecord { step: step + 1, fraction_removed: (step + 1) as f64 / total_blocks, r2, rmse });
    }
    Ok(PruneCurve { records, truncated, block_scores, removal_order: order })
}
