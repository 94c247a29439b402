//! Potential families whose two spectra do not depend on their parameters.
//!
//! With `h` real on `(5a/2, 3a)` the operator
//! `M_h f(x) = ∫_{3a/2}^{7a/2−x} f(t) h(t + x − a/2) dt` acts on
//! `L₂(3a/2, 2a)`. Given eigenfunctions `e₀` (eigenvalue `+1`) and `e₁`
//! (eigenvalue `−1`), the pair
//! `p = α e₁` on `(3a/2, 2a)`, `q = β e₀` on `(3a/2, 2a)` plus `h` on
//! `(5a/2, 3a)` has characteristic functions that do not involve `α, β`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chebyshev;
use crate::domain::{
    function_to_specs, ChebyshevShape, DelayConfig, PiecewiseFunction, PotentialPair, Segment,
    SegmentSpec, Shape,
};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::quadrature::{pieces, QuadratureRule};
use crate::series::{series_charfn, DEFAULT_POINTS};
use crate::solver::{Solver, SolverOptions};

const TOL_SUPPORT: f64 = 1e-12;

fn rule48() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| QuadratureRule::gauss_legendre(DEFAULT_POINTS).expect("48 ≥ 2"))
}

/// The Nyström discretization of `M_h` on the midpoint grid of
/// `(3a/2, 2a)`.
#[derive(Clone, Debug)]
pub struct HankelKernelOp {
    cfg: DelayConfig,
    h: PiecewiseFunction,
    nodes: Vec<f64>,
    matrix: DMatrix<f64>,
}

fn check_h(h: &PiecewiseFunction, cfg: &DelayConfig) -> Result<()> {
    let a = cfg.a();
    if 3.0 * a > PI {
        return Err(Error::Precondition(format!(
            "the family needs 3a ≤ π, got a = {a}"
        )));
    }
    if let Some((lo, hi)) = h.support() {
        if lo < 2.5 * a - TOL_SUPPORT || hi > 3.0 * a + TOL_SUPPORT {
            return Err(Error::InvalidPotential(format!(
                "h must be supported in (5a/2, 3a) = ({}, {}), found ({lo}, {hi})",
                2.5 * a,
                3.0 * a
            )));
        }
    }
    Ok(())
}

impl HankelKernelOp {
    pub fn new(cfg: &DelayConfig, h: &PiecewiseFunction, m: usize) -> Result<Self> {
        check_h(h, cfg)?;
        if !h.is_real() {
            return Err(Error::InvalidPotential("h must be real".into()));
        }
        if m < 64 {
            return Err(Error::InvalidOption(format!(
                "Nyström grid needs M ≥ 64, got {m}"
            )));
        }
        let a = cfg.a();
        let delta = 0.5 * a / m as f64;
        let nodes: Vec<f64> = (0..m).map(|p| 1.5 * a + (p as f64 + 0.5) * delta).collect();
        // Entry (p, q) depends on p + q only: h at 5a/2 + (p+q+1)δ. On the
        // anti-diagonal only half of the t-cell lies below 7a/2 − x.
        let hankel: Vec<f64> = (0..m)
            .map(|s| {
                if s + 1 < m {
                    delta * h.value(2.5 * a + (s + 1) as f64 * delta).re
                } else {
                    0.5 * delta * h.value_left(3.0 * a - 0.25 * delta).re
                }
            })
            .collect();
        let matrix = DMatrix::from_fn(m, m, |p, q| if p + q < m { hankel[p + q] } else { 0.0 });
        Ok(Self {
            cfg: *cfg,
            h: h.clone(),
            nodes,
            matrix,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn h(&self) -> &PiecewiseFunction {
        &self.h
    }

    pub fn config(&self) -> &DelayConfig {
        &self.cfg
    }

    fn domain(&self) -> (f64, f64) {
        (1.5 * self.cfg.a(), 2.0 * self.cfg.a())
    }

    /// `(M_h f)(x)` by composite Gauss–Legendre quadrature.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(x > lo - TOL_SUPPORT && x < hi + TOL_SUPPORT) {
            return Err(Error::Precondition(format!("x = {x} is outside ({lo}, {hi})")));
        }
        let a = self.cfg.a();
        let upper = 3.5 * a - x;
        let shifted: Vec<f64> = self.h.breakpoints().iter().map(|b| b - x + 0.5 * a).collect();
        let rule = rule48();
        Ok(rule.integrate_pieces(lo, upper, &shifted, 0.125 * a, |t| {
            f(t) * self.h.value(t + x - 0.5 * a).re
        }))
    }
}

/// `(M_h f)(x)` for `x ∈ (3a/2, 2a)`.
pub fn apply_mh<F: Fn(f64) -> f64>(op: &HankelKernelOp, f: F, x: f64) -> Result<f64> {
    op.apply(f, x)
}

/// An eigenpair of `M_h`, stored as a Chebyshev interpolant on
/// `[3a/2, 2a]` and sampled on the Nyström grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub mu: f64,
    /// Values at the Chebyshev–Lobatto points of `[3a/2, 2a]`.
    pub cheb_values: Vec<f64>,
    /// Values on the Nyström grid.
    pub samples: Vec<f64>,
    /// `‖M_h e − μe‖₂ / ‖e‖₂` on a grid twice as fine as the Nyström grid.
    pub residual: f64,
    lo: f64,
    hi: f64,
}

impl EigenPair {
    pub fn value(&self, x: f64) -> f64 {
        chebyshev::interpolate(self.lo, self.hi, &self.cheb_values, x.clamp(self.lo, self.hi))
    }

    /// `scale · e` as a shape on `[3a/2, 2a]`.
    pub fn to_shape(&self, scale: C64) -> Shape {
        let values = self.cheb_values.iter().map(|&v| scale * v).collect();
        Shape::Chebyshev(ChebyshevShape::new(self.lo, self.hi, values).expect("≥ 2 nodes"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigOptions {
    /// Nyström grid size `M`.
    pub m: usize,
    /// Chebyshev collocation nodes used to refine each pair.
    pub cheb_nodes: usize,
    /// How many of the largest-|μ| pairs to compute.
    pub count: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            m: 200,
            cheb_nodes: 64,
            count: 8,
        }
    }
}

/// Collocation matrix of `M_h` on the Lobatto points of `[3a/2, 2a]`.
fn collocation_matrix(op: &HankelKernelOp, n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let (lo, hi) = op.domain();
    let a = op.cfg.a();
    let nodes = chebyshev::lobatto_nodes(lo, hi, n);
    let rule = QuadratureRule::gauss_legendre(n.max(DEFAULT_POINTS)).expect("≥ 2");
    let hb = op.h.breakpoints();
    let mut m = DMatrix::zeros(n, n);
    for (i, &x) in nodes.iter().enumerate() {
        let upper = 3.5 * a - x;
        let shifted: Vec<f64> = hb.iter().map(|b| b - x + 0.5 * a).collect();
        for (u, v) in pieces(lo, upper, &shifted) {
            for (t, w) in rule.mapped(u, v) {
                let kernel = w * op.h.value(t + x - 0.5 * a).re;
                if kernel == 0.0 {
                    continue;
                }
                for (k, l) in chebyshev::basis(&nodes, t).into_iter().enumerate() {
                    m[(i, k)] += kernel * l;
                }
            }
        }
    }
    (nodes, m)
}

/// Inverse iteration on the collocation matrix, shifted at `sigma`.
fn refine_pair(colloc: &DMatrix<f64>, sigma: f64, start: DVector<f64>) -> Option<(f64, DVector<f64>)> {
    let n = colloc.nrows();
    let shifted = colloc - DMatrix::identity(n, n) * sigma;
    let lu = shifted.lu();
    let mut g = start.normalize();
    let mut mu = sigma;
    for _ in 0..50 {
        let next = lu.solve(&g)?;
        let norm = next.norm();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        let mut next = next / norm;
        if next.dot(&g) < 0.0 {
            next = -next;
        }
        let ag = colloc * &next;
        let new_mu = next.dot(&ag);
        let res = (&ag - &next * new_mu).norm();
        let moved = (&next - &g).norm();
        g = next;
        mu = new_mu;
        if res < 1e-14 * mu.abs().max(1e-300) || moved < 1e-15 {
            break;
        }
    }
    Some((mu, g))
}

fn finish_pair(op: &HankelKernelOp, mu: f64, cheb: Vec<f64>) -> Result<EigenPair> {
    let (lo, hi) = op.domain();
    let n = cheb.len();
    let w = chebyshev::clenshaw_curtis_weights(lo, hi, n);
    let nodes = chebyshev::lobatto_nodes(lo, hi, n);
    let norm2: f64 = cheb.iter().zip(&w).map(|(v, w)| v * v * w).sum();
    let mut values: Vec<f64> = cheb.iter().map(|v| v / norm2.sqrt()).collect();
    let first = op
        .nodes
        .iter()
        .map(|&x| chebyshev::interpolate_with_nodes(&nodes, &values, x))
        .find(|v| v.abs() > 1e-12)
        .unwrap_or(1.0);
    if first < 0.0 {
        values.iter_mut().for_each(|v| *v = -*v);
    }
    let mut pair = EigenPair {
        mu,
        samples: Vec::new(),
        cheb_values: values,
        residual: f64::NAN,
        lo,
        hi,
    };
    pair.samples = op.nodes.iter().map(|&x| pair.value(x)).collect();

    let fine = 2 * op.grid_size();
    let d = (hi - lo) / fine as f64;
    let mut r2 = 0.0;
    let mut e2 = 0.0;
    for k in 0..fine {
        let x = lo + (k as f64 + 0.5) * d;
        let e = pair.value(x);
        let me = op.apply(|t| pair.value(t), x)?;
        r2 += (me - mu * e).powi(2) * d;
        e2 += e * e * d;
    }
    pair.residual = (r2 / e2).sqrt();
    Ok(pair)
}

/// Threshold below which the kernel counts as zero.
pub const DEGENERATE_EIGENVALUE: f64 = 1e-12;

/// The `count` largest-|μ| eigenpairs of `M_h`, each located on the
/// Nyström matrix and then refined by Chebyshev collocation.
pub fn nystrom_eigs(op: &HankelKernelOp, count: usize) -> Result<Vec<EigenPair>> {
    nystrom_eigs_with(op, count, EigOptions::default().cheb_nodes)
}

pub fn nystrom_eigs_with(op: &HankelKernelOp, count: usize, cheb_nodes: usize) -> Result<Vec<EigenPair>> {
    let rough = rough_eigenvalues(op);
    let largest = rough.iter().map(|(mu, _)| mu.abs()).fold(0.0, f64::max);
    if largest < DEGENERATE_EIGENVALUE {
        return Err(Error::DegenerateKernel {
            threshold: DEGENERATE_EIGENVALUE,
        });
    }
    let mut by_size = rough;
    by_size.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
    let (cnodes, colloc) = collocation_matrix(op, cheb_nodes);
    by_size
        .into_iter()
        .take(count)
        .filter(|(mu, _)| mu.abs() >= DEGENERATE_EIGENVALUE)
        .map(|(mu, vec)| refine_from_rough(op, &cnodes, &colloc, mu, &vec))
        .collect()
}

fn rough_eigenvalues(op: &HankelKernelOp) -> Vec<(f64, Vec<f64>)> {
    let eig = SymmetricEigen::new(op.matrix.clone());
    (0..eig.eigenvalues.len())
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect()))
        .collect()
}

fn refine_from_rough(
    op: &HankelKernelOp,
    cnodes: &[f64],
    colloc: &DMatrix<f64>,
    mu: f64,
    vec: &[f64],
) -> Result<EigenPair> {
    // start vector: the Nyström eigenvector, linearly interpolated
    let start = DVector::from_iterator(
        cnodes.len(),
        cnodes.iter().map(|&x| interp_linear(&op.nodes, vec, x)),
    );
    let (mu_ref, g) = refine_pair(colloc, mu, start).ok_or_else(|| {
        Error::NotFound(format!("collocation refinement failed near μ = {mu}"))
    })?;
    finish_pair(op, mu_ref, g.iter().copied().collect())
}

fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&t| t <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let s = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
    ys[i - 1] * (1.0 - s) + ys[i] * s
}

/// Signed eigenvalues in descending order with their refined pairs for the
/// two requested ranks (`i`-th largest, `j`-th smallest, 0-based).
fn ranked_pair(op: &HankelKernelOp, i: usize, j: usize, cheb: usize) -> Result<(EigenPair, EigenPair)> {
    let mut rough = rough_eigenvalues(op);
    rough.sort_by(|a, b| b.0.total_cmp(&a.0));
    let n = rough.len();
    if i >= n || j >= n {
        return Err(Error::InvalidOption(format!("index pair ({i}, {j}) exceeds M = {n}")));
    }
    let (cnodes, colloc) = collocation_matrix(op, cheb);
    let top = refine_from_rough(op, &cnodes, &colloc, rough[i].0, &rough[i].1)?;
    let bottom = refine_from_rough(op, &cnodes, &colloc, rough[n - 1 - j].0, &rough[n - 1 - j].1)?;
    Ok((top, bottom))
}

#[derive(Clone, Debug)]
pub struct TunedKernel {
    pub theta: f64,
    pub scale: f64,
    /// `scale · (h₀ + θh₁)`.
    pub h: PiecewiseFunction,
    pub mu_plus: f64,
    pub mu_minus: f64,
}

/// Finds `θ` with `μ_i(θ) + μ_j(θ) = 0`, where `μ_i` is the `i`-th largest and
/// `μ_j` the `j`-th smallest eigenvalue of `M_{h₀+θh₁}`, and rescales so
/// that the pair becomes `{+1, −1}`.
pub fn tune_h_for_pair(
    cfg: &DelayConfig,
    h0: &PiecewiseFunction,
    h1: &PiecewiseFunction,
    theta_range: (f64, f64),
    ranks: (usize, usize),
    opts: &EigOptions,
) -> Result<TunedKernel> {
    let kernel = |theta: f64| h0.sum(&h1.scaled(C64::new(theta, 0.0)));
    let g = |theta: f64| -> Result<(f64, f64, f64)> {
        let op = HankelKernelOp::new(cfg, &kernel(theta), opts.m)?;
        let (top, bottom) = ranked_pair(&op, ranks.0, ranks.1, opts.cheb_nodes)?;
        Ok((top.mu + bottom.mu, top.mu, bottom.mu))
    };
    let (mut lo, mut hi) = theta_range;
    let (mut glo, mut ghi) = (g(lo)?.0, g(hi)?.0);
    if glo.signum() == ghi.signum() {
        return Err(Error::NotFound(format!(
            "μ_{} + μ_{} does not change sign on θ ∈ [{lo}, {hi}] ({glo:e}, {ghi:e}); \
             try another index pair or range",
            ranks.0, ranks.1
        )));
    }
    // Illinois variant of regula falsi
    let mut theta = lo;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut side = 0i8;
    for _ in 0..100 {
        theta = (lo * ghi - hi * glo) / (ghi - glo);
        let (gv, top, bottom) = g(theta)?;
        best = (gv, top, bottom);
        if gv.abs() <= 1e-13 * top.abs() || (hi - lo).abs() < 1e-14 {
            break;
        }
        if gv.signum() == ghi.signum() {
            hi = theta;
            ghi = gv;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        } else {
            lo = theta;
            glo = gv;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        }
    }
    let (_, top, bottom) = best;
    let scale = 1.0 / top;
    Ok(TunedKernel {
        theta,
        scale,
        h: kernel(theta).scaled(C64::new(scale, 0.0)),
        mu_plus: top * scale,
        mu_minus: bottom * scale,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyMode {
    /// Only `p` carries a parameter (needs the `−1` eigenpair).
    POnly,
    /// Only `q` carries a parameter (needs the `+1` eigenpair).
    QOnly,
    /// Both, from a single `h` with eigenvalues `+1` and `−1`.
    Both,
}

/// Largest deviation from `±1` accepted when picking eigenpairs.
pub const EIGENVALUE_MATCH_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct IsoFamilySpec {
    pub cfg: DelayConfig,
    pub h: PiecewiseFunction,
    pub mode: FamilyMode,
    /// Eigenpair with `μ = −1`, carried by `p`.
    pub pair_minus: Option<EigenPair>,
    /// Eigenpair with `μ = +1`, carried by `q`.
    pub pair_plus: Option<EigenPair>,
    pub alpha: C64,
    pub beta: C64,
}

/// The potentials for parameters `(α, β)` built from the same eigenpairs.
impl IsoFamilySpec {
    pub fn potential(&self, alpha: C64, beta: C64) -> Result<PotentialPair> {
        let a = self.cfg.a();
        let (lo, hi) = (1.5 * a, 2.0 * a);
        let zero = C64::new(0.0, 0.0);
        let part = |pair: &Option<EigenPair>, scale: C64| -> Result<PiecewiseFunction> {
            match pair {
                Some(e) if scale != zero => {
                    PiecewiseFunction::from_sparse(vec![Segment::new(lo, hi, e.to_shape(scale))])
                }
                _ => Ok(PiecewiseFunction::zero()),
            }
        };
        let p = part(&self.pair_minus, alpha)?;
        let q = part(&self.pair_plus, beta)?.sum(&self.h);
        PotentialPair::new(p, q, &self.cfg)
    }

    /// A copy with different parameters.
    pub fn with_params(&self, alpha: C64, beta: C64) -> Result<IsoFamilySpec> {
        check_params(self.mode, alpha, beta)?;
        Ok(IsoFamilySpec {
            alpha,
            beta,
            ..self.clone()
        })
    }

    pub fn to_document(&self) -> FamilyDocument {
        FamilyDocument {
            a: self.cfg.a(),
            mode: self.mode,
            h: function_to_specs(&self.h),
            alpha: [self.alpha.re, self.alpha.im],
            beta: [self.beta.re, self.beta.im],
            mu_minus: self.pair_minus.as_ref().map(|e| e.mu),
            mu_plus: self.pair_plus.as_ref().map(|e| e.mu),
            residual_minus: self.pair_minus.as_ref().map(|e| e.residual),
            residual_plus: self.pair_plus.as_ref().map(|e| e.residual),
        }
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.to_document())?;
        Ok(())
    }
}

/// JSON form of a family.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FamilyDocument {
    pub a: f64,
    pub mode: FamilyMode,
    pub h: Option<Vec<SegmentSpec>>,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub mu_minus: Option<f64>,
    pub mu_plus: Option<f64>,
    pub residual_minus: Option<f64>,
    pub residual_plus: Option<f64>,
}

fn check_params(mode: FamilyMode, alpha: C64, beta: C64) -> Result<()> {
    let zero = C64::new(0.0, 0.0);
    match mode {
        FamilyMode::POnly if beta != zero => Err(Error::InvalidOption(
            "p_only families have β = 0".into(),
        )),
        FamilyMode::QOnly if alpha != zero => Err(Error::InvalidOption(
            "q_only families have α = 0".into(),
        )),
        _ => Ok(()),
    }
}

fn pick(pairs: &[EigenPair], target: f64) -> Option<EigenPair> {
    pairs
        .iter()
        .filter(|e| (e.mu - target).abs() <= EIGENVALUE_MATCH_TOL)
        .min_by(|x, y| (x.mu - target).abs().total_cmp(&(y.mu - target).abs()))
        .cloned()
}

/// Builds the family member for `(α, β)` from `h`.
pub fn build_family(
    cfg: &DelayConfig,
    h: &PiecewiseFunction,
    mode: FamilyMode,
    alpha: C64,
    beta: C64,
    opts: &EigOptions,
) -> Result<(IsoFamilySpec, PotentialPair)> {
    check_params(mode, alpha, beta)?;
    let op = HankelKernelOp::new(cfg, h, opts.m)?;
    let pairs = nystrom_eigs_with(&op, opts.count, opts.cheb_nodes)?;
    let listing = || {
        pairs
            .iter()
            .map(|e| format!("{:.6}", e.mu))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let need_minus = matches!(mode, FamilyMode::POnly | FamilyMode::Both);
    let need_plus = matches!(mode, FamilyMode::QOnly | FamilyMode::Both);
    let pair_minus = if need_minus {
        Some(pick(&pairs, -1.0).ok_or_else(|| Error::MissingEigenpair {
            sign: '−',
            detail: format!("largest eigenvalues of M_h: {}", listing()),
        })?)
    } else {
        None
    };
    let pair_plus = if need_plus {
        Some(pick(&pairs, 1.0).ok_or_else(|| Error::MissingEigenpair {
            sign: '+',
            detail: format!("largest eigenvalues of M_h: {}", listing()),
        })?)
    } else {
        None
    };
    let spec = IsoFamilySpec {
        cfg: *cfg,
        h: h.clone(),
        mode,
        pair_minus,
        pair_plus,
        alpha,
        beta,
    };
    let pp = spec.potential(alpha, beta)?;
    Ok((spec, pp))
}

/// The constant kernel `c` on `(5a/2, 3a)`.
pub fn constant_h(cfg: &DelayConfig, c: f64) -> Result<PiecewiseFunction> {
    let a = cfg.a();
    PiecewiseFunction::single(2.5 * a, 3.0 * a, Shape::Constant(C64::new(c, 0.0)))
}

/// `cos(2kπ(x − 5a/2)/a)` on `(5a/2, 3a)`.
pub fn cosine_mode_h(cfg: &DelayConfig, k: usize) -> Result<PiecewiseFunction> {
    let a = cfg.a();
    let w = 2.0 * PI * k as f64 / a;
    PiecewiseFunction::single(
        2.5 * a,
        3.0 * a,
        Shape::Cosine {
            amplitude: C64::new(1.0, 0.0),
            frequency: w,
            phase: -w * 2.5 * a,
        },
    )
}

/// `(K₁(x), K₂(x))` for `x ∈ (a/2, 5a/2)`; the pair must be supported in
/// `(a, 3a)`.
pub fn k_kernels(pp: &PotentialPair, cfg: &DelayConfig, x: f64) -> Result<(C64, C64)> {
    let a = cfg.a();
    if let Some((lo, hi)) = pp.support() {
        if lo < a - TOL_SUPPORT || hi > 3.0 * a + TOL_SUPPORT {
            return Err(Error::Precondition(format!(
                "kernels need a potential supported in (a, 3a), found ({lo}, {hi})"
            )));
        }
    }
    if !(x > 0.5 * a - TOL_SUPPORT && x < 2.5 * a + TOL_SUPPORT) {
        return Err(Error::Precondition(format!(
            "x = {x} is outside (a/2, 5a/2)"
        )));
    }
    let (p, q) = (pp.p(), pp.q());
    let (px, qx) = (p.value(x + 0.5 * a), q.value(x + 0.5 * a));
    if !(x > a && x < 2.0 * a) {
        return Ok((px, qx));
    }
    let mut cuts = pp.breakpoints();
    cuts.extend(pp.breakpoints().iter().map(|b| b + x));
    let rule = rule48();
    let lo = x + a;
    let hi = 3.0 * a;
    let mut k1 = px;
    let mut k2 = qx;
    for (u, v) in pieces(lo, hi, &cuts) {
        k1 += rule.integrate(u, v, |t| q.value(t) * p.value(t - x) - p.value(t) * q.value(t - x));
        k2 -= rule.integrate(u, v, |t| p.value(t) * p.value(t - x) + q.value(t) * q.value(t - x));
    }
    Ok((k1, k2))
}

/// `Δ₁ = sin λπ − ∫ h(x) sin λ(π−2x+a) dx`,
/// `Δ₂ = −cos λπ + ∫ h(x) cos λ(π−2x+a) dx` over `(5a/2, 3a)`.
pub fn family_charfn_closed(h: &PiecewiseFunction, cfg: &DelayConfig, lambda: C64) -> Result<(C64, C64)> {
    family_charfn_closed_with(h, cfg, lambda, rule48())
}

pub fn family_charfn_closed_with(
    h: &PiecewiseFunction,
    cfg: &DelayConfig,
    lambda: C64,
    rule: &QuadratureRule,
) -> Result<(C64, C64)> {
    check_h(h, cfg)?;
    let a = cfg.a();
    let panel = crate::quadrature::oscillation_panel(lambda.norm());
    let Pair(s, c) = rule.integrate_pieces(2.5 * a, 3.0 * a, &h.breakpoints(), panel, |x| {
        let arg = lambda * (PI - 2.0 * x + a);
        let hv = h.value(x);
        Pair(hv * arg.sin(), hv * arg.cos())
    });
    Ok(((lambda * PI).sin() - s, -(lambda * PI).cos() + c))
}

/// Two complex accumulators for one quadrature pass.
#[derive(Clone, Copy, Default)]
struct Pair(C64, C64);

impl std::ops::AddAssign for Pair {
    fn add_assign(&mut self, o: Pair) {
        self.0 += o.0;
        self.1 += o.1;
    }
}

impl std::ops::Mul<f64> for Pair {
    type Output = Pair;
    fn mul(self, k: f64) -> Pair {
        Pair(self.0 * k, self.1 * k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    /// Largest relative deviation of the solver `Δ_j` from the closed form.
    pub solver_deviation: f64,
    /// Same for the two-term series.
    pub series_deviation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoReport {
    pub mode: FamilyMode,
    pub tol: f64,
    pub samples: Vec<SampleReport>,
    pub pass: bool,
}

/// Compares solver and series characteristic functions of every family
/// member against the closed form on `lambda_grid`.
pub fn verify_isospectrality(
    family: &IsoFamilySpec,
    params: &[(C64, C64)],
    lambda_grid: &[C64],
    tol: f64,
    solver_opts: SolverOptions,
) -> Result<IsoReport> {
    let cfg = family.cfg;
    let rule = rule48();
    let closed: Vec<(C64, C64)> = lambda_grid
        .iter()
        .map(|&l| family_charfn_closed(&family.h, &cfg, l))
        .collect::<Result<_>>()?;
    let rel = |x: (C64, C64), y: (C64, C64)| {
        let d1 = (x.0 - y.0).norm() / y.0.norm().max(1.0);
        let d2 = (x.1 - y.1).norm() / y.1.norm().max(1.0);
        d1.max(d2)
    };
    let mut samples = Vec::with_capacity(params.len());
    for &(alpha, beta) in params {
        let member = family.with_params(alpha, beta)?;
        let pp = member.potential(alpha, beta)?;
        let solver = Solver::new(&pp, &cfg, solver_opts)?;
        let devs: Vec<(f64, f64)> = lambda_grid
            .par_iter()
            .zip(&closed)
            .map(|(&l, &want)| {
                let s = solver.charfn(l)?;
                let r = series_charfn(&pp, &cfg, l, 2, rule)?;
                Ok((rel(s, want), rel((r.delta1, r.delta2), want)))
            })
            .collect::<Result<_>>()?;
        let solver_deviation = devs.iter().map(|d| d.0).fold(0.0, f64::max);
        let series_deviation = devs.iter().map(|d| d.1).fold(0.0, f64::max);
        samples.push(SampleReport {
            alpha: [alpha.re, alpha.im],
            beta: [beta.re, beta.im],
            solver_deviation,
            series_deviation,
            pass: solver_deviation < tol && series_deviation < tol,
        });
    }
    let pass = samples.iter().all(|s| s.pass);
    Ok(IsoReport {
        mode: family.mode,
        tol,
        samples,
        pass,
    })
}
