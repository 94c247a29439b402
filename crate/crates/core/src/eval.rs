//! Evaluators of `λ ↦ (Δ₁(λ), Δ₂(λ))` behind one interface, so root finding
//! and the `𝓛, 𝓜` combinations do not care which engine produced the values.

use crate::domain::{DelayConfig, PotentialPair};
use crate::error::{Error, Result};
use crate::linalg::{free_solution, C64};
use crate::quadrature::QuadratureRule;
use crate::series::{series_charfn, DEFAULT_POINTS};
use crate::solver::{Solver, SolverOptions};

pub trait CharEvaluator: Sync {
    fn eval(&self, lambda: C64) -> Result<(C64, C64)>;

    /// A cheaper, less accurate variant used for contour sweeps.
    fn eval_fast(&self, lambda: C64) -> Result<(C64, C64)> {
        self.eval(lambda)
    }

    /// `Δ_j(λ)` for `j ∈ {1, 2}`.
    fn component(&self, j: u8, lambda: C64) -> Result<C64> {
        let (d1, d2) = self.eval(lambda)?;
        Ok(if j == 1 { d1 } else { d2 })
    }

    fn component_fast(&self, j: u8, lambda: C64) -> Result<C64> {
        let (d1, d2) = self.eval_fast(lambda)?;
        Ok(if j == 1 { d1 } else { d2 })
    }
}

impl<F> CharEvaluator for F
where
    F: Fn(C64) -> Result<(C64, C64)> + Sync,
{
    fn eval(&self, lambda: C64) -> Result<(C64, C64)> {
        self(lambda)
    }
}

/// `Δ̃₁ = sin λπ`, `Δ̃₂ = −cos λπ`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FreeEvaluator;

impl CharEvaluator for FreeEvaluator {
    fn eval(&self, lambda: C64) -> Result<(C64, C64)> {
        Ok(free_solution(lambda, std::f64::consts::PI).as_tuple())
    }
}

/// Solver-backed evaluator: refined values for `eval`, a single coarse grid
/// for `eval_fast`.
#[derive(Clone, Debug)]
pub struct SolverEvaluator {
    accurate: Solver,
    fast: Solver,
}

/// Steps per delay of the coarse grid used for contour sweeps.
pub const FAST_M: usize = 64;

impl SolverEvaluator {
    pub fn new(pp: &PotentialPair, cfg: &DelayConfig, opts: SolverOptions) -> Result<Self> {
        Ok(Self {
            accurate: Solver::new(pp, cfg, opts)?,
            fast: Solver::new(pp, cfg, SolverOptions::fixed(FAST_M.min(opts.m.max(8))))?,
        })
    }

    pub fn solver(&self) -> &Solver {
        &self.accurate
    }
}

impl CharEvaluator for SolverEvaluator {
    fn eval(&self, lambda: C64) -> Result<(C64, C64)> {
        self.accurate.charfn(lambda)
    }

    fn eval_fast(&self, lambda: C64) -> Result<(C64, C64)> {
        self.fast.charfn(lambda)
    }
}

/// Series-backed evaluator. Refuses potentials for which the truncated
/// series is not the whole series.
#[derive(Clone, Debug)]
pub struct SeriesEvaluator {
    pp: PotentialPair,
    cfg: DelayConfig,
    depth: usize,
    rule: QuadratureRule,
}

impl SeriesEvaluator {
    pub fn new(pp: &PotentialPair, cfg: &DelayConfig, depth: usize, points: usize) -> Result<Self> {
        let rule = QuadratureRule::gauss_legendre(points)?;
        let probe = series_charfn(pp, cfg, C64::new(0.0, 0.0), depth, &rule)?;
        if !probe.exact {
            return Err(Error::Precondition(format!(
                "series truncated at depth {depth} is not exact for this potential"
            )));
        }
        Ok(Self {
            pp: pp.clone(),
            cfg: *cfg,
            depth,
            rule,
        })
    }

    pub fn with_defaults(pp: &PotentialPair, cfg: &DelayConfig) -> Result<Self> {
        Self::new(pp, cfg, 2, DEFAULT_POINTS)
    }
}

impl CharEvaluator for SeriesEvaluator {
    fn eval(&self, lambda: C64) -> Result<(C64, C64)> {
        let r = series_charfn(&self.pp, &self.cfg, lambda, self.depth, &self.rule)?;
        Ok((r.delta1, r.delta2))
    }
}
