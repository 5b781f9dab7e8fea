// SPDX-License-Identifier: MIT OR Apache-2.0

//! Time-series storage, sliding-window instances and per-point block
//! neighborhoods.
//!
//! Time indices are 0-based. An instance with target index `t` spans the
//! `m + 1` observations `t - m ..= t`: the target plus `m` lagged covariates
//! stored most-recent-first.

use std::ops::Range;

use crate::error::{Error, Result};

/// A `T × p` matrix of finite observations, stored one column per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    columns: Vec<Vec<f64>>,
    dim_names: Vec<String>,
}

impl TimeSeries {
    /// Builds a series from per-dimension columns.
    pub fn from_columns(columns: Vec<Vec<f64>>, dim_names: Vec<String>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidSeries("series has no dimensions".into()));
        }
        if dim_names.len() != columns.len() {
            return Err(Error::InvalidSeries(format!(
                "{} dimension names for {} columns",
                dim_names.len(),
                columns.len()
            )));
        }
        let len = columns[0].len();
        if len == 0 {
            return Err(Error::InvalidSeries("series has no observations".into()));
        }
        for (d, col) in columns.iter().enumerate() {
            if col.len() != len {
                return Err(Error::InvalidSeries(format!(
                    "column {d} has {} rows, expected {len}",
                    col.len()
                )));
            }
            if let Some(t) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidSeries(format!(
                    "non-finite value at row {t}, column {d}"
                )));
            }
        }
        Ok(Self { columns, dim_names })
    }

    /// Single-dimension series named `x0`.
    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::from_columns(vec![values], vec!["x0".to_string()])
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dims(&self) -> usize {
        self.columns.len()
    }

    pub fn dim_names(&self) -> &[String] {
        &self.dim_names
    }

    pub fn column(&self, dim: usize) -> Result<&[f64]> {
        self.columns
            .get(dim)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownDimension { dim, dims: self.dims() })
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }
}

/// Block length and stride of the sliding window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct WindowSpec {
    pub block_len: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(block_len: usize, stride: usize) -> Result<Self> {
        if block_len == 0 {
            return Err(Error::InvalidArgument("block length must be positive".into()));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        Ok(Self { block_len, stride })
    }

    /// Stride-1 window of the given block length.
    pub fn with_block_len(block_len: usize) -> Result<Self> {
        Self::new(block_len, 1)
    }
}

/// One `(covariates, target)` training pair of the AR model.
#[derive(Debug, Clone, PartialEq)]
pub struct ArInstance {
    pub target_index: usize,
    /// Lags `x[t-1], x[t-2], …, x[t-m]`.
    pub covariates: Vec<f64>,
    pub target: f64,
}

impl ArInstance {
    pub fn block_len(&self) -> usize {
        self.covariates.len()
    }

    /// First time index covered by this instance.
    pub fn span_start(&self) -> usize {
        self.target_index - self.covariates.len()
    }

    /// Whether `point` lies in `target - m ..= target`.
    pub fn contains(&self, point: usize) -> bool {
        self.span_start() <= point && point <= self.target_index
    }
}

/// Instances drawn from one column of a series, sorted by target index.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    instances: Vec<ArInstance>,
    dimension: usize,
    block_len: usize,
    stride: usize,
    series_len: usize,
}

fn instance_at(values: &[f64], target: usize, block_len: usize) -> ArInstance {
    ArInstance {
        target_index: target,
        covariates: (1..=block_len).map(|lag| values[target - lag]).collect(),
        target: values[target],
    }
}

/// Builds instances at targets `m, m + s, m + 2s, …` of column `dim`.
pub fn make_instances(series: &TimeSeries, dim: usize, spec: WindowSpec) -> Result<InstanceSet> {
    let values = series.column(dim)?;
    let len = values.len();
    if len <= spec.block_len {
        return Err(Error::SeriesTooShort { len, block_len: spec.block_len });
    }
    make_instances_in_range(series, dim, spec, spec.block_len..len)
}

/// Builds instances whose targets start at `targets.start` and advance by the
/// stride while staying below `targets.end`. Covariates may reach back before
/// `targets.start`, so a held-out range can borrow lags from the data before it.
pub fn make_instances_in_range(
    series: &TimeSeries,
    dim: usize,
    spec: WindowSpec,
    targets: Range<usize>,
) -> Result<InstanceSet> {
    let values = series.column(dim)?;
    let len = values.len();
    if len <= spec.block_len {
        return Err(Error::SeriesTooShort { len, block_len: spec.block_len });
    }
    if targets.start < spec.block_len || targets.end > len || targets.start >= targets.end {
        return Err(Error::InvalidArgument(format!(
            "target range {}..{} invalid for length {len} and block length {}",
            targets.start, targets.end, spec.block_len
        )));
    }
    let instances = targets
        .step_by(spec.stride)
        .map(|t| instance_at(values, t, spec.block_len))
        .collect();
    Ok(InstanceSet {
        instances,
        dimension: dim,
        block_len: spec.block_len,
        stride: spec.stride,
        series_len: len,
    })
}

impl InstanceSet {
    /// Wraps an arbitrary instance list (e.g. the survivors of a removal).
    /// Targets must be strictly increasing and share one block length.
    pub fn from_instances(
        instances: Vec<ArInstance>,
        dimension: usize,
        block_len: usize,
        stride: usize,
        series_len: usize,
    ) -> Result<Self> {
        for inst in &instances {
            if inst.block_len() != block_len {
                return Err(Error::BlockLenMismatch { expected: block_len, got: inst.block_len() });
            }
            if inst.target_index >= series_len || inst.target_index < block_len {
                return Err(Error::InvalidArgument(format!(
                    "target index {} outside {}..{series_len}",
                    inst.target_index, block_len
                )));
            }
        }
        if instances.windows(2).any(|w| w[0].target_index >= w[1].target_index) {
            return Err(Error::InvalidArgument("instances must be sorted by target index".into()));
        }
        Ok(Self { instances, dimension, block_len, stride, series_len })
    }

    pub fn instances(&self) -> &[ArInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Length of the series the instances were cut from.
    pub fn series_len(&self) -> usize {
        self.series_len
    }

    /// Keeps the instances for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(&ArInstance) -> bool) -> InstanceSet {
        InstanceSet {
            instances: self.instances.iter().filter(|i| keep(i)).cloned().collect(),
            ..self.clone_empty()
        }
    }

    fn clone_empty(&self) -> InstanceSet {
        InstanceSet {
            instances: Vec::new(),
            dimension: self.dimension,
            block_len: self.block_len,
            stride: self.stride,
            series_len: self.series_len,
        }
    }

    /// Index range of the instances whose target lies in `targets`.
    fn target_range(&self, targets: Range<usize>) -> Range<usize> {
        let lo = self.instances.partition_point(|i| i.target_index < targets.start);
        let hi = self.instances.partition_point(|i| i.target_index < targets.end);
        lo..hi.max(lo)
    }
}

/// The instances whose span contains a given time point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockNeighborhood {
    pub point_index: usize,
    /// Contiguous index range into the instance set.
    pub members: Range<usize>,
}

impl BlockNeighborhood {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Instances covering `point`: those with target in `point ..= point + m`.
pub fn neighborhood(point: usize, set: &InstanceSet) -> Result<BlockNeighborhood> {
    if point >= set.series_len {
        return Err(Error::InvalidArgument(format!(
            "point {point} outside series of length {}",
            set.series_len
        )));
    }
    let members = set.target_range(point..point + set.block_len + 1);
    if members.is_empty() {
        return Err(Error::PointNotCovered { point });
    }
    Ok(BlockNeighborhood { point_index: point, members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(len: usize) -> TimeSeries {
        TimeSeries::univariate((0..len).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn instances_stride_one() {
        let set = make_instances(&ramp(5), 0, WindowSpec::new(2, 1).unwrap()).unwrap();
        let targets: Vec<_> = set.instances().iter().map(|i| i.target_index).collect();
        assert_eq!(targets, vec![2, 3, 4]);
        assert_eq!(set.instances()[0].covariates, vec![1.0, 0.0]);
        assert_eq!(set.instances()[0].target, 2.0);
    }

    #[test]
    fn instances_stride_two() {
        let set = make_instances(&ramp(5), 0, WindowSpec::new(2, 2).unwrap()).unwrap();
        let targets: Vec<_> = set.instances().iter().map(|i| i.target_index).collect();
        assert_eq!(targets, vec![2, 4]);
    }

    #[test]
    fn instance_count_matches_enumeration() {
        for (len, m, s) in [(201, 100, 1), (57, 4, 3), (10, 9, 1), (10, 3, 7)] {
            let brute = (0..len).filter(|t| *t >= m && (t - m) % s == 0).count();
            let set = make_instances(&ramp(len), 0, WindowSpec::new(m, s).unwrap()).unwrap();
            assert_eq!(set.len(), brute);
            assert_eq!(set.len(), (len - 1 - m) / s + 1);
        }
        let set = make_instances(&ramp(201), 0, WindowSpec::new(100, 1).unwrap()).unwrap();
        assert_eq!(set.len(), 101);
    }

    #[test]
    fn short_series_and_bad_dimension() {
        let err = make_instances(&ramp(3), 0, WindowSpec::new(3, 1).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SeriesTooShort { len: 3, block_len: 3 }));
        let err = make_instances(&ramp(10), 1, WindowSpec::new(3, 1).unwrap()).unwrap_err();
        assert!(matches!(err, Error::UnknownDimension { dim: 1, dims: 1 }));
    }

    #[test]
    fn rejects_non_finite_and_ragged() {
        assert!(TimeSeries::univariate(vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::univariate(vec![]).is_err());
        assert!(TimeSeries::from_columns(vec![vec![1.0], vec![1.0, 2.0]], vec!["a".into(), "b".into()]).is_err());
        assert!(TimeSeries::from_columns(vec![vec![1.0]], vec![]).is_err());
    }

    #[test]
    fn neighborhood_examples() {
        let set = make_instances(&ramp(300), 0, WindowSpec::new(100, 1).unwrap()).unwrap();
        let nb = neighborhood(150, &set).unwrap();
        assert_eq!(nb.len(), 101);
        assert_eq!(set.instances()[nb.members.start].target_index, 150);
        assert_eq!(set.instances()[nb.members.end - 1].target_index, 250);
        // The first point is only reached by the span of the first instance.
        let nb = neighborhood(0, &set).unwrap();
        assert_eq!(nb.len(), 1);
        assert_eq!(set.instances()[nb.members.start].target_index, 100);

        let strided = make_instances(&ramp(300), 0, WindowSpec::new(100, 50).unwrap()).unwrap();
        let nb = neighborhood(150, &strided).unwrap();
        let brute: Vec<usize> = strided
            .instances()
            .iter()
            .enumerate()
            .filter(|(_, i)| i.target_index >= 100 && i.target_index - 100 <= 150 && 150 <= i.target_index)
            .map(|(j, _)| j)
            .collect();
        assert_eq!(nb.members.clone().collect::<Vec<_>>(), brute);
    }

    #[test]
    fn uncovered_point_is_an_error() {
        let set = make_instances(&ramp(20), 0, WindowSpec::new(2, 10).unwrap()).unwrap();
        // Targets 2 and 12 cover 0..=2 and 10..=12.
        assert!(matches!(neighborhood(5, &set), Err(Error::PointNotCovered { point: 5 })));
        assert!(neighborhood(11, &set).is_ok());
    }

    #[test]
    fn interior_coverage_is_block_len_plus_one() {
        for m in 1..=20 {
            let len = 3 * m;
            let set = make_instances(&ramp(len), 0, WindowSpec::new(m, 1).unwrap()).unwrap();
            for t in 0..len {
                let count = neighborhood(t, &set).unwrap().len();
                if t >= m && t + m < len {
                    assert_eq!(count, m + 1, "m={m} t={t}");
                } else {
                    assert!((1..=m).contains(&count), "m={m} t={t} count={count}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn span_containment_exhaustive(len in 2usize..500, m in 1usize..30, s in 1usize..40) {
            prop_assume!(m < len);
            let series = ramp(len);
            let set = make_instances(&series, 0, WindowSpec::new(m, s).unwrap()).unwrap();
            for t in 0..len {
                let members: Vec<usize> = match neighborhood(t, &set) {
                    Ok(nb) => nb.members.collect(),
                    Err(Error::PointNotCovered { .. }) => Vec::new(),
                    Err(e) => panic!("{e}"),
                };
                for (j, inst) in set.instances().iter().enumerate() {
                    let inside = inst.target_index - m <= t && t <= inst.target_index;
                    prop_assert_eq!(inside, members.contains(&j));
                }
            }
        }

        #[test]
        fn reconstruction(values in proptest::collection::vec(-1e3f64..1e3, 2..200), m in 1usize..20) {
            prop_assume!(m < values.len());
            let series = TimeSeries::univariate(values.clone()).unwrap();
            let set = make_instances(&series, 0, WindowSpec::new(m, 1).unwrap()).unwrap();
            for inst in set.instances() {
                let mut block: Vec<f64> = inst.covariates.iter().rev().copied().collect();
                block.push(inst.target);
                prop_assert_eq!(&block[..], &values[inst.target_index - m..=inst.target_index]);
            }
        }
    }
}
