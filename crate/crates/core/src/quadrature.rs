//! Gauss–Legendre rules and composite integration over piecewise-smooth
//! integrands.

use std::ops::{AddAssign, Mul};

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_legendre(points: usize) -> Result<Self> {
        let rule = GaussLegendre::new(points).map_err(|_| {
            Error::InvalidOption(format!(
                "Gauss–Legendre order must be at least 2, got {points}"
            ))
        })?;
        let (nodes, weights) = rule.into_node_weight_pairs().into_iter().unzip();
        Ok(Self { nodes, weights })
    }

    /// Points per dimension.
    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mapped `(node, weight)` pairs for `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<T, F>(&self, lo: f64, hi: f64, mut f: F) -> T
    where
        T: Default + AddAssign + Mul<f64, Output = T>,
        F: FnMut(f64) -> T,
    {
        let mut acc = T::default();
        for (x, w) in self.mapped(lo, hi) {
            acc += f(x) * w;
        }
        acc
    }

    /// Composite rule on `[lo, hi]` split at every breakpoint inside the
    /// interval, with each piece further split so that no panel is longer
    /// than `max_panel`.
    pub fn integrate_pieces<T, F>(
        &self,
        lo: f64,
        hi: f64,
        breakpoints: &[f64],
        max_panel: f64,
        mut f: F,
    ) -> T
    where
        T: Default + AddAssign + Mul<f64, Output = T>,
        F: FnMut(f64) -> T,
    {
        let mut acc = T::default();
        for (u, v) in pieces(lo, hi, breakpoints) {
            let panels = ((v - u) / max_panel).ceil().max(1.0) as usize;
            let h = (v - u) / panels as f64;
            for k in 0..panels {
                let pu = u + k as f64 * h;
                let pv = if k + 1 == panels { v } else { pu + h };
                acc += self.integrate(pu, pv, &mut f);
            }
        }
        acc
    }
}

/// Splits `[lo, hi]` at the breakpoints strictly inside it. Pieces shorter
/// than a few ulps are dropped.
pub fn pieces(lo: f64, hi: f64, breakpoints: &[f64]) -> Vec<(f64, f64)> {
    if hi <= lo {
        return Vec::new();
    }
    let tiny = 1e-13 * (1.0 + hi.abs());
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > lo + tiny && b < hi - tiny)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= tiny);
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = lo;
    for c in cuts {
        out.push((start, c));
        start = c;
    }
    out.push((start, hi));
    out
}

/// Panel length keeping `exp(±2iλt)`-type integrands under about 40 radians
/// per panel, where a 48-point rule is still at full precision.
pub fn oscillation_panel(lambda_abs: f64) -> f64 {
    40.0 / (2.0 * lambda_abs).max(1.0)
}
