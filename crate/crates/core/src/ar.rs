// SPDX-License-Identifier: MIT OR Apache-2.0

//! Least-squares AR(m) model with squared-error loss.
//!
//! Conventions: `ψ = −2·x·r` with `r = y − xᵀθ`, and the Hessian is
//! `2·(M + λ_eff·I)`, so `−H⁻¹ψ = (M + λ_eff·I)⁻¹·x·r`.

use crate::error::{Error, Result};
use crate::linalg::{diagonal_condition, dot, Cholesky, Matrix};
use crate::series::{ArInstance, InstanceSet};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ArConfig {
    pub block_len: usize,
    /// Relative ridge; the applied value is `ridge · trace(M)/q`.
    pub ridge: f64,
    pub include_intercept: bool,
}

impl ArConfig {
    pub fn new(block_len: usize) -> Self {
        Self { block_len, ridge: 1e-8, include_intercept: false }
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn with_intercept(mut self, include: bool) -> Self {
        self.include_intercept = include;
        self
    }

    /// Parameter count `q`: one per lag, plus the intercept if enabled.
    pub fn num_params(&self) -> usize {
        self.block_len + usize::from(self.include_intercept)
    }

    fn validate(&self) -> Result<()> {
        if self.block_len == 0 {
            return Err(Error::InvalidArgument("block length must be positive".into()));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(Error::InvalidArgument(format!("ridge must be finite and >= 0, got {}", self.ridge)));
        }
        Ok(())
    }

    /// Design vector of an instance: covariates, then `1` for the intercept.
    pub fn features(&self, inst: &ArInstance) -> Result<Vec<f64>> {
        if inst.block_len() != self.block_len {
            return Err(Error::BlockLenMismatch { expected: self.block_len, got: inst.block_len() });
        }
        let mut f = Vec::with_capacity(self.num_params());
        f.extend_from_slice(&inst.covariates);
        if self.include_intercept {
            f.push(1.0);
        }
        Ok(f)
    }
}

/// Running sums `Σ x xᵀ`, `Σ x y`, `Σ y²` over a set of instances. Supports
/// removal so leave-out refits can downdate a full fit.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    cfg: ArConfig,
    sum_xx: Matrix,
    sum_xy: Vec<f64>,
    sum_yy: f64,
    count: usize,
}

impl NormalEquations {
    pub fn new(cfg: ArConfig) -> Result<Self> {
        cfg.validate()?;
        let q = cfg.num_params();
        Ok(Self { cfg, sum_xx: Matrix::zeros(q), sum_xy: vec![0.0; q], sum_yy: 0.0, count: 0 })
    }

    pub fn from_instances<'a>(cfg: ArConfig, instances: impl IntoIterator<Item = &'a ArInstance>) -> Result<Self> {
        let mut eq = Self::new(cfg)?;
        for inst in instances {
            eq.add(inst)?;
        }
        Ok(eq)
    }

    fn accumulate(&mut self, inst: &ArInstance, sign: f64) -> Result<()> {
        let f = self.cfg.features(inst)?;
        let q = f.len();
        for i in 0..q {
            let fi = sign * f[i];
            if fi == 0.0 {
                continue;
            }
            for j in i..q {
                self.sum_xx[(i, j)] += fi * f[j];
            }
            self.sum_xy[i] += fi * inst.target;
        }
        self.sum_yy += sign * inst.target * inst.target;
        Ok(())
    }

    pub fn add(&mut self, inst: &ArInstance) -> Result<()> {
        self.accumulate(inst, 1.0)?;
        self.count += 1;
        Ok(())
    }

    pub fn remove(&mut self, inst: &ArInstance) -> Result<()> {
        if self.count == 0 {
            return Err(Error::EmptyInput);
        }
        self.accumulate(inst, -1.0)?;
        self.count -= 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Solves the ridge-regularized normal equations. The in-sample MSE is
    /// computed from the running sums; [`fit`] recomputes it from residuals.
    pub fn solve(&self) -> Result<FittedAr> {
        if self.count == 0 {
            return Err(Error::EmptyInput);
        }
        let n = self.count as f64;
        let q = self.cfg.num_params();
        let mut gram = self.sum_xx.scaled(1.0 / n);
        gram.symmetrize_from_upper();
        let rhs: Vec<f64> = self.sum_xy.iter().map(|v| v / n).collect();
        let ridge = effective_ridge(self.cfg.ridge, &gram);
        let mut system = gram.clone();
        system.add_diagonal(ridge);
        let factor = Cholesky::factor(&system)
            .map_err(|_| Error::DegenerateDesign { condition: diagonal_condition(&system) })?;
        let theta = factor.solve(&rhs);
        let quad = dot(&theta, &gram.mul_vec(&theta));
        let residual_sq_mean = (self.sum_yy / n - 2.0 * dot(&theta, &rhs) + quad).max(0.0);
        debug_assert_eq!(theta.len(), q);
        Ok(FittedAr { cfg: self.cfg, theta, gram, ridge, n_instances: self.count, residual_sq_mean })
    }
}

/// Ridge scaled to the mean Gram eigenvalue; falls back to unit scale for an
/// all-zero design.
fn effective_ridge(relative: f64, gram: &Matrix) -> f64 {
    let scale = gram.trace() / gram.dim() as f64;
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    relative * scale
}

/// A fitted AR(m) model.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedAr {
    cfg: ArConfig,
    theta: Vec<f64>,
    gram: Matrix,
    ridge: f64,
    n_instances: usize,
    residual_sq_mean: f64,
}

/// Gradient of the squared-error loss plus the residual it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiValue {
    pub gradient: Vec<f64>,
    pub residual: f64,
}

/// Fits by least squares on every instance of the set.
pub fn fit(set: &InstanceSet, cfg: ArConfig) -> Result<FittedAr> {
    fit_instances(set.instances(), cfg)
}

pub fn fit_instances(instances: &[ArInstance], cfg: ArConfig) -> Result<FittedAr> {
    if instances.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut model = NormalEquations::from_instances(cfg, instances)?.solve()?;
    let sse: f64 = instances
        .iter()
        .map(|inst| model.residual(inst).map(|r| r * r))
        .sum::<Result<f64>>()?;
    model.residual_sq_mean = sse / instances.len() as f64;
    Ok(model)
}

impl FittedAr {
    pub fn config(&self) -> ArConfig {
        self.cfg
    }

    /// All parameters (lags, then intercept when enabled).
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.theta[..self.cfg.block_len]
    }

    pub fn intercept(&self) -> Option<f64> {
        self.cfg.include_intercept.then(|| self.theta[self.cfg.block_len])
    }

    /// `M = (1/n) Σ x xᵀ`, without ridge.
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    /// Absolute ridge added to the Gram diagonal.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn n_instances(&self) -> usize {
        self.n_instances
    }

    pub fn residual_sq_mean(&self) -> f64 {
        self.residual_sq_mean
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    pub fn predict(&self, inst: &ArInstance) -> Result<f64> {
        Ok(dot(&self.cfg.features(inst)?, &self.theta))
    }

    pub fn residual(&self, inst: &ArInstance) -> Result<f64> {
        Ok(inst.target - self.predict(inst)?)
    }

    pub fn loss(&self, inst: &ArInstance) -> Result<f64> {
        let r = self.residual(inst)?;
        Ok(r * r)
    }

    pub fn psi(&self, inst: &ArInstance) -> Result<PsiValue> {
        let features = self.cfg.features(inst)?;
        let residual = inst.target - dot(&features, &self.theta);
        let gradient = features.iter().map(|x| -2.0 * x * residual).collect();
        Ok(PsiValue { gradient, residual })
    }

    /// `2·(M + λ_eff·I)`, symmetric by construction.
    pub fn hessian(&self) -> Matrix {
        let mut h = self.gram.clone();
        h.add_diagonal(self.ridge);
        h.scaled(2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{make_instances, TimeSeries, WindowSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set_of(values: Vec<f64>, m: usize) -> InstanceSet {
        make_instances(&TimeSeries::univariate(values).unwrap(), 0, WindowSpec::new(m, 1).unwrap()).unwrap()
    }

    fn random_series(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; len];
        for t in 1..len {
            x[t] = 0.6 * x[t - 1] + rng.random_range(-1.0..1.0);
        }
        x
    }

    #[test]
    fn exact_recurrence() {
        let mut x = vec![1.0];
        for _ in 0..50 {
            x.push(0.5 * x.last().unwrap());
        }
        let model = fit(&set_of(x, 1), ArConfig::new(1).with_ridge(0.0)).unwrap();
        assert!((model.theta()[0] - 0.5).abs() < 1e-14);
        assert!(model.residual_sq_mean() <= 1e-18);
    }

    #[test]
    fn zero_series() {
        let model = fit(&set_of(vec![0.0; 20], 3), ArConfig::new(3)).unwrap();
        assert_eq!(model.theta(), &[0.0; 3]);
        assert_eq!(model.residual_sq_mean(), 0.0);
        let h = model.hessian();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 2.0 * 1e-8 } else { 0.0 };
                assert_eq!(h[(i, j)], expect);
            }
        }
    }

    #[test]
    fn degenerate_without_ridge() {
        let err = fit(&set_of(vec![0.0; 20], 3), ArConfig::new(3).with_ridge(0.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateDesign { .. }));
    }

    #[test]
    fn loss_and_psi_examples() {
        let set = set_of(vec![2.0, 5.0], 1);
        let inst = &set.instances()[0];
        let model = fit(&set, ArConfig::new(1).with_ridge(0.0)).unwrap();
        // Single instance: θ = 5/2, zero residual.
        assert_eq!(model.loss(inst).unwrap(), 0.0);
        assert!(model.psi(inst).unwrap().gradient.iter().all(|g| *g == 0.0));

        let mut fixed = model.clone();
        fixed.theta = vec![1.0];
        let psi = fixed.psi(inst).unwrap();
        assert_eq!(psi.residual, 3.0);
        assert_eq!(psi.gradient, vec![-12.0]);
        fixed.theta = vec![0.0];
        let target3 = ArInstance { target_index: 1, covariates: vec![7.0], target: 3.0 };
        assert_eq!(fixed.loss(&target3).unwrap(), 9.0);
    }

    #[test]
    fn block_len_mismatch() {
        let model = fit(&set_of(random_series(30, 1), 2), ArConfig::new(2)).unwrap();
        let inst = ArInstance { target_index: 3, covariates: vec![1.0, 2.0, 3.0], target: 0.0 };
        assert!(matches!(model.loss(&inst), Err(Error::BlockLenMismatch { expected: 2, got: 3 })));
        assert!(model.psi(&inst).is_err());
    }

    #[test]
    fn hessian_single_instance() {
        let set = set_of(vec![3.0, 1.0], 1);
        let model = fit(&set, ArConfig::new(1).with_ridge(0.0)).unwrap();
        assert_eq!(model.hessian()[(0, 0)], 18.0);
    }

    #[test]
    fn hessian_matches_double_loop() {
        let set = set_of(random_series(200, 4), 6);
        let model = fit(&set, ArConfig::new(6).with_ridge(0.0)).unwrap();
        let h = model.hessian();
        let n = set.len() as f64;
        for i in 0..6 {
            for j in 0..6 {
                let mut s = 0.0;
                for inst in set.instances() {
                    s += inst.covariates[i] * inst.covariates[j];
                }
                let expect = 2.0 * s / n;
                assert!((h[(i, j)] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
                assert_eq!(h[(i, j)].to_bits(), h[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn loss_matches_scalar_loop() {
        let set = set_of(random_series(100, 8), 4);
        let model = fit(&set, ArConfig::new(4)).unwrap();
        for inst in set.instances().iter().take(20) {
            let mut pred = 0.0;
            for j in 0..4 {
                pred += model.theta()[j] * inst.covariates[j];
            }
            let expect = (inst.target - pred).powi(2);
            assert!((model.loss(inst).unwrap() - expect).abs() <= 1e-12 * expect.max(1e-12));
        }
    }

    #[test]
    fn psi_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..100 {
            let m = 1 + case % 5;
            let set = set_of(random_series(40, case as u64), m);
            let mut model = fit(&set, ArConfig::new(m)).unwrap();
            model.theta = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let inst = &set.instances()[rng.random_range(0..set.len())];
            let psi = model.psi(inst).unwrap();
            let h = 1e-6;
            for k in 0..m {
                let mut plus = model.clone();
                plus.theta[k] += h;
                let mut minus = model.clone();
                minus.theta[k] -= h;
                let fd = (plus.loss(inst).unwrap() - minus.loss(inst).unwrap()) / (2.0 * h);
                let g = psi.gradient[k];
                assert!((fd - g).abs() <= 1e-5 * g.abs().max(1e-3), "case {case} k {k}: fd {fd} vs {g}");
            }
        }
    }

    #[test]
    fn normal_equation_residual() {
        for seed in 0..10 {
            let m = 1 + seed as usize;
            let set = set_of(random_series(150, seed), m);
            let model = fit(&set, ArConfig::new(m)).unwrap();
            let half_h = model.hessian().scaled(0.5);
            let lhs = half_h.mul_vec(model.theta());
            let n = set.len() as f64;
            let inf_theta = model.theta().iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            for k in 0..m {
                let rhs: f64 = set.instances().iter().map(|i| i.covariates[k] * i.target).sum::<f64>() / n;
                assert!((lhs[k] - rhs).abs() <= 1e-9 * (1.0 + inf_theta));
            }
        }
    }

    #[test]
    fn intercept_recovers_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut x = vec![5.0];
        for _ in 0..2000 {
            let prev = *x.last().unwrap();
            x.push(2.0 + 0.6 * prev + rng.random_range(-1.0..1.0));
        }
        let model = fit(&set_of(x, 1), ArConfig::new(1).with_intercept(true)).unwrap();
        assert_eq!(model.num_params(), 2);
        assert!((model.coefficients()[0] - 0.6).abs() < 0.06);
        assert!((model.intercept().unwrap() - 2.0).abs() < 0.3);
    }

    #[test]
    fn downdate_matches_refit() {
        let set = set_of(random_series(120, 2), 3);
        let cfg = ArConfig::new(3);
        let mut eq = NormalEquations::from_instances(cfg, set.instances()).unwrap();
        for inst in &set.instances()[10..20] {
            eq.remove(inst).unwrap();
        }
        let downdated = eq.solve().unwrap();
        let kept: Vec<ArInstance> = set.instances().iter().enumerate().filter(|(i, _)| !(10..20).contains(i)).map(|(_, x)| x.clone()).collect();
        let refit = fit_instances(&kept, cfg).unwrap();
        for (a, b) in downdated.theta().iter().zip(refit.theta()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
