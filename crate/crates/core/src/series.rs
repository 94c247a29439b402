//! Successive approximations `S = Σ S_k` evaluated at `x = π` by nested
//! Gauss–Legendre quadrature. Each `S_k` vanishes for `x ≤ ka`, so the sum
//! is finite; for potentials with short support it terminates after one or
//! two terms and the result is exact up to quadrature error.

use std::f64::consts::PI;

use crate::domain::{DelayConfig, PotentialPair};
use crate::error::{Error, Result};
use crate::linalg::{free_solution, CVec2, Mat2, C64};
use crate::quadrature::{oscillation_panel, pieces, QuadratureRule};

/// Deepest implemented term.
pub const MAX_DEPTH: usize = 3;

/// Largest `|λ|` the fixed-order rule is trusted at.
pub const OSCILLATION_LIMIT: f64 = 40.0;

/// Default points per dimension.
pub const DEFAULT_POINTS: usize = 48;

/// Partial sum of the series together with whether it is the whole series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesCharfn {
    pub delta1: C64,
    pub delta2: C64,
    /// True when every omitted term is structurally zero.
    pub exact: bool,
}

/// Entry `(row, col)` (1-based) of `Q(t₁)Q(t₂)…Q(t_k)`.
pub fn qk_entry(pp: &PotentialPair, points: &[f64], row: usize, col: usize) -> Result<C64> {
    if !(1..=2).contains(&row) || !(1..=2).contains(&col) {
        return Err(Error::IndexOutOfRange { row, col });
    }
    if points.is_empty() || points.len() > MAX_DEPTH {
        return Err(Error::UnsupportedDepth { k: points.len() });
    }
    let mut m = Mat2::identity();
    for &t in points {
        if !(t > 0.0 && t < PI) {
            return Err(Error::OutOfDomain { x: t });
        }
        m = m * pp.matrix(t);
    }
    Ok(m.entry(row - 1, col - 1))
}

/// True when the nesting region of `S_k` carries no potential mass: it needs
/// `t₁ > t₂ + a > … > t_k + (k−1)a` with every `t_i` in the support and
/// `t_k > a`, `t₁ > ka`.
pub fn term_is_structurally_zero(pp: &PotentialPair, cfg: &DelayConfig, k: usize) -> bool {
    if k == 0 {
        return false;
    }
    let a = cfg.a();
    if PI <= k as f64 * a {
        return true;
    }
    match pp.support() {
        None => true,
        Some((lo, hi)) => hi <= k as f64 * a || hi - lo.max(a) <= (k - 1) as f64 * a,
    }
}

struct Nest<'a> {
    pp: &'a PotentialPair,
    a: f64,
    k: usize,
    lambda: C64,
    rule: &'a QuadratureRule,
    breakpoints: Vec<f64>,
    panel: f64,
}

impl Nest<'_> {
    /// Integrates over `t_i` given the partial product `Q(t₁)…Q(t_{i−1})`
    /// and the partial phase `Σ_{l<i} (−1)^l 2t_l`.
    fn level(&self, i: usize, prev: f64, product: Mat2, phase: f64) -> CVec2 {
        let lo = (self.k - i + 1) as f64 * self.a;
        let hi = if i == 1 { PI } else { prev - self.a };
        let mut acc = CVec2::ZERO;
        if hi <= lo {
            return acc;
        }
        let sign = if i.is_multiple_of(2) { 2.0 } else { -2.0 };
        for (u, v) in pieces(lo, hi, &self.breakpoints) {
            if self.pp.is_zero_on(u, v) {
                continue;
            }
            let panels = ((v - u) / self.panel).ceil().max(1.0) as usize;
            let h = (v - u) / panels as f64;
            for p in 0..panels {
                let pu = u + p as f64 * h;
                let pv = if p + 1 == panels { v } else { pu + h };
                acc += self.rule.integrate(pu, pv, |t| {
                    let m = product * self.pp.matrix(t);
                    let ph = phase + sign * t;
                    if i == self.k {
                        self.leaf(m, ph)
                    } else {
                        self.level(i + 1, t, m, ph)
                    }
                });
            }
        }
        acc
    }

    fn leaf(&self, m: Mat2, phase: f64) -> CVec2 {
        let odd = self.k % 2 == 1;
        let arg = self.lambda * (PI + if odd { self.a } else { 0.0 } + phase);
        let (s, c) = (arg.sin(), arg.cos());
        let v = if odd { (c, -s) } else { (s, -c) };
        CVec2::new(
            m.entry(0, 0) * v.0 + m.entry(0, 1) * v.1,
            m.entry(1, 0) * v.0 + m.entry(1, 1) * v.1,
        )
    }
}

/// `S_k(π, λ)` for `0 ≤ k ≤ 3`.
pub fn series_term(
    pp: &PotentialPair,
    cfg: &DelayConfig,
    k: usize,
    lambda: C64,
    rule: &QuadratureRule,
) -> Result<(C64, C64)> {
    if k > MAX_DEPTH {
        return Err(Error::UnsupportedDepth { k });
    }
    if k == 0 {
        return Ok(free_solution(lambda, PI).as_tuple());
    }
    if lambda.norm() > OSCILLATION_LIMIT {
        return Err(Error::OscillationLimit {
            abs: lambda.norm(),
            limit: OSCILLATION_LIMIT,
        });
    }
    if term_is_structurally_zero(pp, cfg, k) {
        return Ok((C64::new(0.0, 0.0), C64::new(0.0, 0.0)));
    }
    let a = cfg.a();
    let base = pp.breakpoints();
    let mut breakpoints: Vec<f64> = (0..=k)
        .flat_map(|j| base.iter().map(move |b| b + j as f64 * a))
        .filter(|&b| b > 0.0 && b < PI)
        .collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    let nest = Nest {
        pp,
        a,
        k,
        lambda,
        rule,
        breakpoints,
        panel: oscillation_panel(lambda.norm()),
    };
    Ok(nest.level(1, PI, Mat2::identity(), 0.0).as_tuple())
}

/// `Σ_{k=0..K} S_k(π, λ)`.
pub fn series_charfn(
    pp: &PotentialPair,
    cfg: &DelayConfig,
    lambda: C64,
    depth: usize,
    rule: &QuadratureRule,
) -> Result<SeriesCharfn> {
    if depth > MAX_DEPTH {
        return Err(Error::UnsupportedDepth { k: depth });
    }
    let mut d1 = C64::new(0.0, 0.0);
    let mut d2 = C64::new(0.0, 0.0);
    for k in 0..=depth {
        let (s1, s2) = series_term(pp, cfg, k, lambda, rule)?;
        d1 += s1;
        d2 += s2;
    }
    let a = cfg.a();
    let exact = (depth + 1..)
        .take_while(|&k| (k as f64) * a < PI)
        .all(|k| term_is_structurally_zero(pp, cfg, k));
    Ok(SeriesCharfn {
        delta1: d1,
        delta2: d2,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_delay_config, PiecewiseFunction, Shape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn rule() -> QuadratureRule {
        QuadratureRule::gauss_legendre(DEFAULT_POINTS).unwrap()
    }

    fn pair(
        cfg: &DelayConfig,
        p: Option<(f64, f64, Shape)>,
        q: Option<(f64, f64, Shape)>,
    ) -> PotentialPair {
        let mk = |s: Option<(f64, f64, Shape)>| match s {
            None => PiecewiseFunction::zero(),
            Some((lo, hi, sh)) => PiecewiseFunction::single(lo, hi, sh).unwrap(),
        };
        PotentialPair::new(mk(p), mk(q), cfg).unwrap()
    }

    #[test]
    fn order_zero_is_free_solution() {
        let cfg = make_delay_config(1.0).unwrap();
        let l = C64::new(1.3, -0.2);
        let (s1, s2) = series_term(&PotentialPair::zero(), &cfg, 0, l, &rule()).unwrap();
        assert_eq!(s1, (l * PI).sin());
        assert_eq!(s2, -(l * PI).cos());
    }

    #[test]
    fn first_order_constant_q_matches_antiderivative() {
        let a = 0.8;
        let cfg = make_delay_config(a).unwrap();
        let cq = 0.6;
        let pp = pair(&cfg, None, Some((a, PI, Shape::Constant(c(cq)))));
        for l in [0.7, 3.3, 11.0] {
            let (s11, s21) = series_term(&pp, &cfg, 1, c(l), &rule()).unwrap();
            // −c ∫_a^π sin λ(π−2t+a) dt = −c [cos λ(π−2t+a)/(2λ)]_a^π
            let want1 = -cq * ((l * (a - PI)).cos() - (l * (PI - a)).cos()) / (2.0 * l);
            // c ∫_a^π cos λ(π−2t+a) dt
            let want2 = -cq * ((l * (a - PI)).sin() - (l * (PI - a)).sin()) / (2.0 * l);
            assert!((s11 - want1).norm() < 1e-13, "{s11} vs {want1}");
            assert!((s21 - want2).norm() < 1e-13, "{s21} vs {want2}");
            assert!(s11.norm() < 1e-13);
        }
    }

    #[test]
    fn empty_regions_give_exact_zero() {
        let a = 1.0;
        let cfg = make_delay_config(a).unwrap();
        let pp = pair(
            &cfg,
            Some((a, 3.0 * a, Shape::Constant(c(0.4)))),
            Some((1.5, 2.5, Shape::Constant(c(-0.3)))),
        );
        assert_eq!(
            series_term(&pp, &cfg, 3, c(2.0), &rule()).unwrap(),
            (c(0.0), c(0.0))
        );
        let short = make_delay_config(1.2).unwrap();
        let pp2 = pair(&short, None, Some((1.2, PI, Shape::Constant(c(1.0)))));
        assert_eq!(
            series_term(&pp2, &short, 3, c(2.0), &rule()).unwrap(),
            (c(0.0), c(0.0))
        );
    }

    #[test]
    fn depth_three_is_identical_to_two_when_third_is_empty() {
        let a = 0.9;
        let cfg = make_delay_config(a).unwrap();
        let pp = pair(&cfg, None, Some((a, 2.0 * a, Shape::Constant(c(0.9)))));
        let two = series_charfn(&pp, &cfg, c(4.1), 2, &rule()).unwrap();
        let three = series_charfn(&pp, &cfg, c(4.1), 3, &rule()).unwrap();
        assert_eq!(two, three);
        assert!(two.exact);
    }

    #[test]
    fn zero_potential_any_depth() {
        let cfg = make_delay_config(0.5).unwrap();
        let l = C64::new(2.2, 0.3);
        for k in 0..=3 {
            let r = series_charfn(&PotentialPair::zero(), &cfg, l, k, &rule()).unwrap();
            assert!(r.exact);
            assert!((r.delta1 - (l * PI).sin()).norm() < 1e-14);
        }
    }

    #[test]
    fn inexact_flag_when_terms_are_dropped() {
        let a = 0.5;
        let cfg = make_delay_config(a).unwrap();
        let pp = pair(&cfg, Some((a, PI, Shape::Constant(c(0.2)))), None);
        let r = series_charfn(&pp, &cfg, c(1.0), 3, &rule()).unwrap();
        assert!(!r.exact);
    }

    #[test]
    fn limits_are_enforced() {
        let cfg = make_delay_config(1.0).unwrap();
        let pp = pair(&cfg, None, Some((1.0, 2.0, Shape::Constant(c(1.0)))));
        assert!(matches!(
            series_term(&pp, &cfg, 4, c(1.0), &rule()),
            Err(Error::UnsupportedDepth { k: 4 })
        ));
        assert!(matches!(
            series_term(&pp, &cfg, 1, c(41.0), &rule()),
            Err(Error::OscillationLimit { .. })
        ));
    }

    #[test]
    fn qk_entries() {
        let cfg = make_delay_config(0.6).unwrap();
        let pp = pair(
            &cfg,
            Some((
                0.6,
                PI,
                Shape::Cosine {
                    amplitude: C64::new(1.0, 0.5),
                    frequency: 2.0,
                    phase: 0.3,
                },
            )),
            Some((0.6, 2.9, Shape::Constant(c(-0.8)))),
        );
        let (p, q) = pp.eval(1.7).unwrap();
        assert_eq!(qk_entry(&pp, &[1.7], 1, 1).unwrap(), p);
        assert_eq!(qk_entry(&pp, &[1.7], 1, 2).unwrap(), q);
        assert_eq!(qk_entry(&pp, &[1.7], 2, 1).unwrap(), q);
        assert_eq!(qk_entry(&pp, &[1.7], 2, 2).unwrap(), -p);
        assert!(matches!(
            qk_entry(&pp, &[1.7], 3, 1),
            Err(Error::IndexOutOfRange { .. })
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            for k in 1..=3usize {
                let pts: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..PI - 0.01)).collect();
                let e = |r, c| qk_entry(&pp, &pts, r, c).unwrap();
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                assert!((e(1, 1) - e(2, 2) * sign).norm() < 1e-12);
                assert!((e(2, 1) + e(1, 2) * sign).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn doubling_points_changes_little() {
        let a = 0.8;
        let cfg = make_delay_config(a).unwrap();
        let cos = |amp: f64, w: f64| Shape::Cosine {
            amplitude: c(amp),
            frequency: w,
            phase: 0.1,
        };
        let pp = pair(&cfg, Some((a, 2.9, cos(0.7, 3.0))), Some((1.0, 2.6, cos(-0.5, 5.0))));
        let coarse = rule();
        let fine = QuadratureRule::gauss_legendre(2 * DEFAULT_POINTS).unwrap();
        for l in [0.3, 7.5, 19.9] {
            for k in 1..=3 {
                let x = series_term(&pp, &cfg, k, c(l), &coarse).unwrap();
                let y = series_term(&pp, &cfg, k, c(l), &fine).unwrap();
                assert!((x.0 - y.0).norm() < 1e-10 && (x.1 - y.1).norm() < 1e-10);
            }
        }
    }
}
