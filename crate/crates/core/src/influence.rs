// SPDX-License-Identifier: MIT OR Apache-2.0

//! Parameter, block, and per-time-point influence scores.
//!
//! Every score is built from two per-instance vectors: the loss gradient `ψ`
//! and its inverse-Hessian image `H⁻¹ψ`. The block influence of a training
//! instance on a test instance is `−ψ_testᵀ H⁻¹ ψ_train`; a time point's score
//! is the unweighted mean of block influences over the instances whose span
//! contains it.

use rayon::prelude::*;

use crate::ar::FittedAr;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::series::{neighborhood, ArInstance, InstanceSet};
use crate::solvers::{PreparedSolver, SolverChoice, SolverKind};

/// A model that exposes per-instance loss, gradient and Hessian.
pub trait GradientModel: Sync {
    fn num_params(&self) -> usize;
    fn loss(&self, inst: &ArInstance) -> Result<f64>;
    fn gradient(&self, inst: &ArInstance) -> Result<Vec<f64>>;
    /// Mean Hessian of the training loss at the fitted parameters.
    fn hessian(&self) -> Matrix;
}

impl GradientModel for FittedAr {
    fn num_params(&self) -> usize {
        FittedAr::num_params(self)
    }

    fn loss(&self, inst: &ArInstance) -> Result<f64> {
        FittedAr::loss(self, inst)
    }

    fn gradient(&self, inst: &ArInstance) -> Result<Vec<f64>> {
        Ok(self.psi(inst)?.gradient)
    }

    fn hessian(&self) -> Matrix {
        FittedAr::hessian(self)
    }
}

/// How a [`ScoreSeries`] was produced.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScoreMeta {
    pub method: String,
    pub block_len: usize,
    pub stride: usize,
    pub solver: Option<SolverKind>,
    pub note: Option<String>,
}

/// Per-time-point scores. `coverage[t] == 0` marks an unscored point whose
/// score is NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub scores: Vec<f64>,
    pub coverage: Vec<usize>,
    pub meta: ScoreMeta,
}

impl ScoreSeries {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Index of the largest `|score|` among covered points.
    pub fn argmax_abs(&self) -> Option<usize> {
        self.scores
            .iter()
            .zip(&self.coverage)
            .enumerate()
            .filter(|(_, (_, c))| **c > 0)
            .max_by(|(_, (a, _)), (_, (b, _))| a.abs().total_cmp(&b.abs()))
            .map(|(t, _)| t)
    }
}

#[derive(Debug, Clone)]
struct CachedGradient {
    psi: Vec<f64>,
    ihvp: Vec<f64>,
}

/// Fitted model, its training instances and a prepared Hessian solver.
#[derive(Debug, Clone)]
pub struct InfluenceContext<M: GradientModel = FittedAr> {
    model: M,
    instances: InstanceSet,
    solver: PreparedSolver,
    cache: Option<Vec<CachedGradient>>,
}

impl<M: GradientModel> InfluenceContext<M> {
    pub fn new(model: M, instances: InstanceSet, choice: SolverChoice) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::EmptyInput);
        }
        let solver = PreparedSolver::new(model.hessian(), choice)?;
        Ok(Self { model, instances, solver, cache: None })
    }

    /// Solves `H⁻¹ψ` once per training instance and keeps the results.
    pub fn with_cache(mut self) -> Result<Self> {
        let cache = self
            .instances
            .instances()
            .par_iter()
            .map(|inst| {
                let psi = self.model.gradient(inst)?;
                let ihvp = self.solver.solve(&psi)?;
                Ok(CachedGradient { psi, ihvp })
            })
            .collect::<Result<Vec<_>>>()?;
        self.cache = Some(cache);
        Ok(self)
    }

    pub fn is_cached(&self) -> bool {
        self.cache.is_some()
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn instances(&self) -> &InstanceSet {
        &self.instances
    }

    pub fn solver_kind(&self) -> SolverKind {
        self.solver.choice().kind
    }

    fn meta(&self, method: &str, note: Option<String>) -> ScoreMeta {
        ScoreMeta {
            method: method.to_string(),
            block_len: self.instances.block_len(),
            stride: self.instances.stride(),
            solver: Some(self.solver_kind()),
            note,
        }
    }

    fn check(&self, inst: &ArInstance) -> Result<()> {
        if inst.block_len() != self.instances.block_len() {
            return Err(Error::BlockLenMismatch { expected: self.instances.block_len(), got: inst.block_len() });
        }
        Ok(())
    }

    /// `H⁻¹ψ` of training instance `j`, from the cache when populated.
    fn train_ihvp(&self, j: usize) -> Result<Vec<f64>> {
        match &self.cache {
            Some(cache) => Ok(cache[j].ihvp.clone()),
            None => self.solver.solve(&self.model.gradient(&self.instances.instances()[j])?),
        }
    }

    fn train_psi(&self, j: usize) -> Result<Vec<f64>> {
        match &self.cache {
            Some(cache) => Ok(cache[j].psi.clone()),
            None => self.model.gradient(&self.instances.instances()[j]),
        }
    }

    /// `−H⁻¹ψ(inst)`: first-order change of the parameters when `inst` is upweighted.
    pub fn influence_param(&self, inst: &ArInstance) -> Result<Vec<f64>> {
        self.check(inst)?;
        let v = self.solver.solve(&self.model.gradient(inst)?)?;
        Ok(v.into_iter().map(|x| -x).collect())
    }

    /// `−ψ(test)ᵀ H⁻¹ ψ(train)`: first-order change of the test loss when
    /// `train` is upweighted.
    pub fn influence_block(&self, train: &ArInstance, test: &ArInstance) -> Result<f64> {
        self.check(train)?;
        self.check(test)?;
        let ihvp = self.solver.solve(&self.model.gradient(train)?)?;
        Ok(-dot(&self.model.gradient(test)?, &ihvp))
    }

    /// Mean block influence on `test` over the instances covering `point`.
    pub fn timeinf_point(&self, point: usize, test: &ArInstance) -> Result<f64> {
        self.check(test)?;
        let nb = neighborhood(point, &self.instances)?;
        let test_grad = self.model.gradient(test)?;
        let count = nb.len() as f64;
        let mut acc = 0.0;
        for j in nb.members {
            acc += -dot(&test_grad, &self.train_ihvp(j)?);
        }
        Ok(acc / count)
    }

    /// Averages a per-instance value over every point's neighborhood.
    fn average_over_neighborhoods(&self, per_instance: &[f64], meta: ScoreMeta) -> ScoreSeries {
        let len = self.instances.series_len();
        let mut scores = vec![f64::NAN; len];
        let mut coverage = vec![0; len];
        for t in 0..len {
            if let Ok(nb) = neighborhood(t, &self.instances) {
                coverage[t] = nb.len();
                let sum: f64 = per_instance[nb.members.clone()].iter().sum();
                scores[t] = sum / nb.len() as f64;
            }
        }
        ScoreSeries { scores, coverage, meta }
    }

    /// `−ψᵀH⁻¹ψ` for every training instance.
    pub fn self_block_influences(&self) -> Result<Vec<f64>> {
        (0..self.instances.len())
            .into_par_iter()
            .map(|j| Ok(-dot(&self.train_psi(j)?, &self.train_ihvp(j)?)))
            .collect()
    }

    /// Self-influence of every time point: the mean over its covering
    /// instances of each instance's influence on its own loss.
    pub fn self_influence_series(&self) -> Result<ScoreSeries> {
        let per_instance = self.self_block_influences()?;
        Ok(self.average_over_neighborhoods(&per_instance, self.meta("timeinf-self", None)))
    }

    /// Per-point influence on the mean loss over `test_set`. Negative means
    /// upweighting the point lowers the test loss.
    pub fn test_influence_series(&self, test_set: &InstanceSet) -> Result<ScoreSeries> {
        let mean_grad = self.mean_gradient(test_set)?;
        let per_instance = (0..self.instances.len())
            .into_par_iter()
            .map(|j| Ok(-dot(&mean_grad, &self.train_ihvp(j)?)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(self.average_over_neighborhoods(&per_instance, self.meta("timeinf-test", None)))
    }

    fn mean_gradient(&self, set: &InstanceSet) -> Result<Vec<f64>> {
        if set.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut acc = vec![0.0; self.model.num_params()];
        for inst in set.instances() {
            self.check(inst)?;
            for (a, g) in acc.iter_mut().zip(self.model.gradient(inst)?) {
                *a += g;
            }
        }
        let n = set.len() as f64;
        Ok(acc.into_iter().map(|a| a / n).collect())
    }

    /// For each group of training-instance indices, the mean block influence
    /// over (member × validation instance) pairs.
    pub fn block_influence_matrix(&self, blocks: &[Vec<usize>], val_set: &InstanceSet) -> Result<Vec<f64>> {
        let mean_grad = self.mean_gradient(val_set)?;
        blocks
            .par_iter()
            .map(|members| {
                if members.is_empty() {
                    return Err(Error::InvalidArgument("training block has no member instances".into()));
                }
                let mut acc = 0.0;
                for &j in members {
                    if j >= self.instances.len() {
                        return Err(Error::InvalidArgument(format!("instance index {j} out of range")));
                    }
                    acc += -dot(&mean_grad, &self.train_ihvp(j)?);
                }
                Ok(acc / members.len() as f64)
            })
            .collect()
    }
}
