// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-time-point influence scores for autoregressive models.
//!
//! A linear AR(m) model is fitted by least squares on sliding-window
//! instances. Each time point is scored by averaging, over every instance
//! whose window contains it, the first-order effect that upweighting the
//! instance has on a loss of interest. Self-influence drives anomaly
//! detection; influence on a validation set drives block-wise data pruning.

#![forbid(unsafe_code)]

pub mod anomaly;
pub mod ar;
pub mod baselines;
pub mod datagen;
pub mod error;
pub mod influence;
pub mod linalg;
pub mod prune;
pub mod series;
pub mod solvers;

pub use ar::{fit, fit_instances, ArConfig, FittedAr, NormalEquations, PsiValue};
pub use error::{Error, Result};
pub use influence::{GradientModel, InfluenceContext, ScoreMeta, ScoreSeries};
pub use linalg::Matrix;
pub use series::{make_instances, make_instances_in_range, neighborhood, ArInstance, BlockNeighborhood, InstanceSet, TimeSeries, WindowSpec};
pub use solvers::{ihvp, SolverChoice, SolverKind};
