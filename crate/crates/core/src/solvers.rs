// SPDX-License-Identifier: MIT OR Apache-2.0

//! Inverse-Hessian-vector products: exact Cholesky solve, conjugate
//! gradient, and the identity ("Hessian-free") substitution.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Cholesky, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Direct,
    ConjugateGradient,
    HessianFree,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Direct => "direct",
            SolverKind::ConjugateGradient => "cg",
            SolverKind::HessianFree => "hessian-free",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolverKind::Direct),
            "cg" | "conjugate_gradient" | "conjugate-gradient" => Ok(SolverKind::ConjugateGradient),
            "hessian-free" | "hessian_free" => Ok(SolverKind::HessianFree),
            other => Err(Error::InvalidArgument(format!("unknown solver '{other}'"))),
        }
    }
}

/// Solver selection plus CG stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SolverChoice {
    pub kind: SolverKind,
    /// Relative residual target `‖Hx − v‖ ≤ tol·‖v‖`.
    pub cg_tol: f64,
    /// Iteration cap; `None` means the system dimension.
    pub cg_max_iter: Option<usize>,
}

impl SolverChoice {
    pub fn new(kind: SolverKind) -> Self {
        Self { kind, cg_tol: 1e-10, cg_max_iter: None }
    }

    pub fn direct() -> Self {
        Self::new(SolverKind::Direct)
    }

    pub fn conjugate_gradient() -> Self {
        Self::new(SolverKind::ConjugateGradient)
    }

    pub fn hessian_free() -> Self {
        Self::new(SolverKind::HessianFree)
    }

    fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0) {
            return Err(Error::InvalidArgument("cg_tol must be positive".into()));
        }
        if self.cg_max_iter == Some(0) {
            return Err(Error::InvalidArgument("cg_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for SolverChoice {
    fn default() -> Self {
        Self::direct()
    }
}

/// Result of a conjugate-gradient run.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final `‖Hx − v‖₂ / ‖v‖₂` (0 when `v = 0`).
    pub relative_residual: f64,
}

/// Conjugate gradient on `H x = v`, with `H` given as a product callback
/// `apply(x, out)` writing `H·x` into `out`.
pub fn conjugate_gradient<F>(apply: F, v: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = v.len();
    let v_norm = norm2(v);
    let mut x = vec![0.0; n];
    if v_norm == 0.0 {
        return Ok(CgOutcome { solution: x, iterations: 0, relative_residual: 0.0 });
    }
    let target = tol * v_norm;
    let mut r = v.to_vec();
    let mut p = r.clone();
    let mut hp = vec![0.0; n];
    let mut rs = dot(&r, &r);
    let mut iterations = 0;
    while iterations < max_iter {
        apply(&p, &mut hp);
        let curvature = dot(&p, &hp);
        if !(curvature > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let alpha = rs / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        iterations += 1;
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= target {
            break;
        }
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    // Recurrence residuals drift; report the true one.
    apply(&x, &mut hp);
    let true_res: f64 = v.iter().zip(&hp).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let relative_residual = true_res / v_norm;
    if true_res > target {
        return Err(Error::CgNotConverged { iterations, residual: relative_residual });
    }
    Ok(CgOutcome { solution: x, iterations, relative_residual })
}

/// One-shot `H⁻¹ v` with the chosen strategy.
pub fn ihvp(h: &Matrix, v: &[f64], choice: SolverChoice) -> Result<Vec<f64>> {
    PreparedSolver::new(h.clone(), choice)?.solve(v)
}

/// A Hessian prepared for repeated solves (factored once for the direct path).
#[derive(Debug, Clone)]
pub struct PreparedSolver {
    choice: SolverChoice,
    hessian: Matrix,
    factor: Option<Cholesky>,
}

impl PreparedSolver {
    pub fn new(hessian: Matrix, choice: SolverChoice) -> Result<Self> {
        choice.validate()?;
        let factor = match choice.kind {
            SolverKind::Direct => Some(Cholesky::factor(&hessian)?),
            _ => None,
        };
        Ok(Self { choice, hessian, factor })
    }

    pub fn choice(&self) -> SolverChoice {
        self.choice
    }

    pub fn dim(&self) -> usize {
        self.hessian.dim()
    }

    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.hessian.dim() {
            return Err(Error::LengthMismatch { left: v.len(), right: self.hessian.dim() });
        }
        match self.choice.kind {
            SolverKind::Direct => Ok(self.factor.as_ref().expect("factored").solve(v)),
            SolverKind::ConjugateGradient => {
                let max_iter = self.choice.cg_max_iter.unwrap_or(self.hessian.dim()).max(1);
                let out = conjugate_gradient(
                    |x, out| self.hessian.mul_vec_into(x, out),
                    v,
                    self.choice.cg_tol,
                    max_iter,
                )?;
                Ok(out.solution)
            }
            SolverKind::HessianFree => Ok(v.to_vec()),
        }
    }
}
