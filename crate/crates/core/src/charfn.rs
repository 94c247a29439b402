//! The combinations `𝓛, 𝓜` of the characteristic functions, their
//! first-order parts, and a growth diagnostic for the remainder beyond first
//! order.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::domain::{DelayConfig, PiecewiseFunction, PotentialPair};
use crate::error::{Error, Result};
use crate::eval::CharEvaluator;
use crate::linalg::C64;
use crate::quadrature::{oscillation_panel, pieces, QuadratureRule};
use crate::solver::{Solver, SolverOptions};

const I: C64 = C64::new(0.0, 1.0);

/// `𝓛(λ) = ½(Δ₁(λ) + Δ₁(−λ) + i(Δ₂(λ) − Δ₂(−λ)))` and
/// `𝓜(λ) = e^{iλπ} + ½(Δ₂(λ) + Δ₂(−λ) + i(Δ₁(−λ) − Δ₁(λ)))`.
pub fn lm_at<E: CharEvaluator + ?Sized>(delta: &E, lambda: C64) -> Result<(C64, C64)> {
    let (p1, p2) = delta.eval(lambda)?;
    let (m1, m2) = delta.eval(-lambda)?;
    let l = 0.5 * (p1 + m1 + I * (p2 - m2));
    let m = (I * lambda * PI).exp() + 0.5 * (p2 + m2 + I * (m1 - p1));
    Ok((l, m))
}

/// `∫_a^π f(t) e^{iλ(π−2t+a)} dt`, skipping pieces where `f` is zero.
fn first_order_integral(
    f: &PiecewiseFunction,
    cfg: &DelayConfig,
    lambda: C64,
    rule: &QuadratureRule,
) -> C64 {
    let a = cfg.a();
    let panel = oscillation_panel(lambda.norm());
    let mut acc = C64::new(0.0, 0.0);
    for (u, v) in pieces(a, PI, &f.breakpoints()) {
        if f.is_zero_on(u, v) {
            continue;
        }
        acc += rule.integrate_pieces(u, v, &[], panel, |t| {
            f.value(t) * (I * lambda * (PI - 2.0 * t + a)).exp()
        });
    }
    acc
}

/// `(L₁, M₁)`: the first-order integrals of `p` and `q` against
/// `e^{iλ(π−2t+a)}` over `(a, π)`.
pub fn l1_m1(
    pp: &PotentialPair,
    cfg: &DelayConfig,
    lambda: C64,
    rule: &QuadratureRule,
) -> (C64, C64) {
    (
        first_order_integral(pp.p(), cfg, lambda, rule),
        first_order_integral(pp.q(), cfg, lambda, rule),
    )
}

/// First-order parts of `(Δ₁, Δ₂)`, assembled from `L₁, M₁` at `±λ`:
/// `Δ₁⁽¹⁾ = ∫ p cos Φ − q sin Φ`, `Δ₂⁽¹⁾ = ∫ q cos Φ + p sin Φ`,
/// `Φ = λ(π−2t+a)`.
pub fn first_order_charfn(
    pp: &PotentialPair,
    cfg: &DelayConfig,
    lambda: C64,
    rule: &QuadratureRule,
) -> (C64, C64) {
    let (lp, mp) = l1_m1(pp, cfg, lambda, rule);
    let (lm, mm) = l1_m1(pp, cfg, -lambda, rule);
    let cos = |x: C64, y: C64| 0.5 * (x + y);
    let sin = |x: C64, y: C64| (x - y) / (2.0 * I);
    (
        cos(lp, lm) - sin(mp, mm),
        cos(mp, mm) + sin(lp, lm),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticOptions {
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    pub solver: SolverOptions,
}

impl Default for AsymptoticOptions {
    fn default() -> Self {
        Self {
            t_min: 2.0,
            t_max: 12.0,
            samples: 41,
            solver: SolverOptions::default(),
        }
    }
}

/// Minimum number of usable ray samples for a slope fit.
pub const MIN_SAMPLES: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticFit {
    /// `(t, log|R(it)|)` for every sample with `R ≠ 0`.
    pub samples: Vec<(f64, f64)>,
    /// Least-squares slope over the last half of the samples; `None` when
    /// the remainder vanishes identically along the ray.
    pub fitted_slope: Option<f64>,
    /// `π − 2a`.
    pub target_slope: f64,
    /// Slope of the first-order part alone, for comparison.
    pub first_order_slope: Option<f64>,
    /// First `t` at which the solver overflowed, if any.
    pub truncated_at: Option<f64>,
}

impl AsymptoticFit {
    pub fn is_degenerate(&self) -> bool {
        self.fitted_slope.is_none()
    }

    /// Whether the remainder grows no faster than `exp(t(π − 2a))` up to
    /// `slack`. An identically vanishing remainder satisfies the bound.
    pub fn within_bound(&self, slack: f64) -> bool {
        self.fitted_slope
            .is_none_or(|s| s <= self.target_slope + slack)
    }

    /// CSV with columns `t, log_abs_r`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "log_abs_r"])?;
        for (t, v) in &self.samples {
            w.write_record(&[t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares slope of `y` against `x` over the last half of the points.
pub fn tail_slope(points: &[(f64, f64)]) -> Option<f64> {
    let tail = &points[points.len() / 2..];
    if tail.len() < 2 {
        return None;
    }
    let n = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Samples `R(λ) = Δ₁(λ) − sin λπ − Δ₁⁽¹⁾(λ)` on `λ = it` and fits the growth
/// rate of `log|R|`.
///
/// `R` is taken as the sum of the solver's second and higher order terms,
/// each propagated from the previous order. Forming it by subtracting from
/// `Δ₁` would leave only rounding noise of size `ε·e^{tπ}` once `R` is small.
pub fn asymptotic_remainder_fit(
    pp: &PotentialPair,
    cfg: &DelayConfig,
    opts: &AsymptoticOptions,
) -> Result<AsymptoticFit> {
    if opts.samples < MIN_SAMPLES || !(opts.t_max > opts.t_min) {
        return Err(Error::InvalidOption(format!(
            "need at least {MIN_SAMPLES} samples on a non-empty t range"
        )));
    }
    let solver = Solver::new(pp, cfg, opts.solver)?;
    let ts: Vec<f64> = (0..opts.samples)
        .map(|i| opts.t_min + (opts.t_max - opts.t_min) * i as f64 / (opts.samples - 1) as f64)
        .collect();
    let terms: Vec<Result<(C64, C64)>> = ts
        .par_iter()
        .map(|&t| {
            let orders = solver.order_terms(C64::new(0.0, t))?;
            let first = orders.get(1).map_or(C64::new(0.0, 0.0), |v| v.s1);
            let rest: C64 = orders.iter().skip(2).map(|v| v.s1).sum();
            Ok((first, rest))
        })
        .collect();

    let mut remainder = Vec::new();
    let mut first_order = Vec::new();
    let mut truncated_at = None;
    for (&t, r) in ts.iter().zip(terms) {
        match r {
            Ok((first, rest)) => {
                if rest.norm() > 0.0 {
                    remainder.push((t, rest.norm().ln()));
                }
                if first.norm() > 0.0 {
                    first_order.push((t, first.norm().ln()));
                }
            }
            Err(Error::NonFinite { .. }) => {
                truncated_at = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let usable = ts.iter().take_while(|&&t| truncated_at.is_none_or(|s| t < s)).count();
    if usable < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "only {usable} ray samples before overflow; need {MIN_SAMPLES}"
        )));
    }
    let fit = |pts: &[(f64, f64)]| {
        if pts.len() >= MIN_SAMPLES {
            tail_slope(pts)
        } else {
            None
        }
    };
    Ok(AsymptoticFit {
        fitted_slope: fit(&remainder),
        first_order_slope: fit(&first_order),
        samples: remainder,
        target_slope: PI - 2.0 * cfg.a(),
        truncated_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_delay_config, Shape};
    use crate::eval::FreeEvaluator;
    use crate::series::series_term;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn rule() -> QuadratureRule {
        QuadratureRule::gauss_legendre(48).unwrap()
    }

    #[test]
    fn free_problem_has_vanishing_l_and_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let l = C64::new(rng.random_range(-5.0..5.0), rng.random_range(-2.0..2.0));
            let (lv, mv) = lm_at(&FreeEvaluator, l).unwrap();
            assert!(lv.norm() < 1e-12 && mv.norm() < 1e-12 * (1.0 + (l.im * PI).exp()));
        }
    }

    #[test]
    fn lm_at_zero_follows_the_formula() {
        let f = |l: C64| Ok((c(2.0) + l, c(-0.5) + l * l));
        let (lv, mv) = lm_at(&f, c(0.0)).unwrap();
        assert_eq!(lv, c(2.0));
        assert_eq!(mv, c(1.0) + c(-0.5));
    }

    #[test]
    fn l1_m1_cases() {
        let a = 0.6;
        let cfg = make_delay_config(a).unwrap();
        assert_eq!(
            l1_m1(&PotentialPair::zero(), &cfg, c(3.0), &rule()),
            (c(0.0), c(0.0))
        );
        let q = PiecewiseFunction::single(2.5 * a, 3.0 * a, Shape::Constant(c(1.7))).unwrap();
        let pp = PotentialPair::new(PiecewiseFunction::zero(), q, &cfg).unwrap();
        let (_, m1) = l1_m1(&pp, &cfg, c(0.0), &rule());
        assert!((m1 - 1.7 * a / 2.0).norm() < 1e-14);

        // cosine p against the exact antiderivative
        let (amp, w, ph) = (0.8, 3.0, 0.4);
        let (lo, hi) = (a, 2.2);
        let p = PiecewiseFunction::single(
            lo,
            hi,
            Shape::Cosine {
                amplitude: c(amp),
                frequency: w,
                phase: ph,
            },
        )
        .unwrap();
        let pp = PotentialPair::new(p, PiecewiseFunction::zero(), &cfg).unwrap();
        for l in [C64::new(2.3, 0.0), C64::new(-1.1, 0.5)] {
            // cos(wt+φ) e^{iλ(π+a)} e^{−2iλt} = ½ Σ± e^{±iφ} e^{i(±w−2λ)t} e^{iλ(π+a)}
            let prim = |t: f64| {
                let mut s = C64::new(0.0, 0.0);
                for sg in [1.0, -1.0] {
                    let k = I * (sg * w - 2.0 * l);
                    s += (I * sg * ph).exp() * (k * t).exp() / k;
                }
                0.5 * amp * s * (I * l * (PI + a)).exp()
            };
            let want = prim(hi) - prim(lo);
            let (l1, _) = l1_m1(&pp, &cfg, l, &rule());
            assert!((l1 - want).norm() < 1e-10, "{l1} vs {want}");
        }
    }

    #[test]
    fn first_order_matches_series_term() {
        let a = 0.7;
        let cfg = make_delay_config(a).unwrap();
        let p = PiecewiseFunction::single(
            1.0,
            2.6,
            Shape::Cosine {
                amplitude: C64::new(0.5, 0.2),
                frequency: 2.0,
                phase: 0.0,
            },
        )
        .unwrap();
        let q = PiecewiseFunction::single(0.9, 3.0, Shape::Constant(c(-0.4))).unwrap();
        let pp = PotentialPair::new(p, q, &cfg).unwrap();
        let l = C64::new(4.2, -0.3);
        let got = first_order_charfn(&pp, &cfg, l, &rule());
        let want = series_term(&pp, &cfg, 1, l, &rule()).unwrap();
        assert!((got.0 - want.0).norm() < 1e-12 && (got.1 - want.1).norm() < 1e-12);
    }

    #[test]
    fn zero_potential_fit_is_degenerate() {
        let cfg = make_delay_config(1.0).unwrap();
        let fit =
            asymptotic_remainder_fit(&PotentialPair::zero(), &cfg, &AsymptoticOptions::default())
                .unwrap();
        assert!(fit.is_degenerate());
        assert!(fit.within_bound(0.05));
        assert!(fit.samples.is_empty());
    }

    #[test]
    fn tail_slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        assert!((tail_slope(&pts).unwrap() + 0.5).abs() < 1e-14);
    }

    fn constant_on(lo: f64, hi: f64, v: C64) -> PiecewiseFunction {
        PiecewiseFunction::single(lo, hi, Shape::Constant(v)).unwrap()
    }

    proptest::proptest! {
        #[test]
        fn potentials_vanish_below_the_delay(
            a in 0.2f64..1.5,
            lo_frac in 0.0f64..1.0,
            v in -2.0f64..2.0,
            x_frac in 0.0f64..1.0,
        ) {
            let cfg = make_delay_config(a).unwrap();
            let lo = a + lo_frac * (PI - a) * 0.9;
            let pp = PotentialPair::new(constant_on(lo, PI, c(v)), constant_on(lo, PI, c(-v)), &cfg)
                .unwrap();
            let x = x_frac * a * (1.0 - 1e-12);
            let (p, q) = crate::domain::eval_potential(&pp, x).unwrap();
            proptest::prop_assert_eq!(p, c(0.0));
            proptest::prop_assert_eq!(q, c(0.0));
        }

        #[test]
        fn l1_m1_is_additive(
            a in 0.3f64..1.2,
            u in 1.0f64..2.0,
            v in 2.0f64..3.0,
            x in -1.5f64..1.5,
            y in -1.5f64..1.5,
            lre in -8.0f64..8.0,
            lim in -1.0f64..1.0,
        ) {
            let cfg = make_delay_config(a).unwrap();
            let f = PotentialPair::new(
                constant_on(a * u, PI, c(x)),
                constant_on(a, (a * v).min(PI), C64::new(0.0, y)),
                &cfg,
            ).unwrap();
            let g = PotentialPair::new(
                constant_on(a, (a * v).min(PI), c(y)),
                constant_on(a * u, PI, c(x - y)),
                &cfg,
            ).unwrap();
            let l = C64::new(lre, lim);
            let (lf, mf) = l1_m1(&f, &cfg, l, &rule());
            let (lg, mg) = l1_m1(&g, &cfg, l, &rule());
            let (ls, ms) = l1_m1(&f.sum(&g), &cfg, l, &rule());
            let scale = 1.0 + (2.0 * lim.abs() * PI).exp();
            proptest::prop_assert!((ls - lf - lg).norm() < 1e-12 * scale);
            proptest::prop_assert!((ms - mf - mg).norm() < 1e-12 * scale);
        }
    }
}
