//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dirac_delay::charfn::{asymptotic_remainder_fit, AsymptoticOptions};
use dirac_delay::domain::SampledShape;
use dirac_delay::eval::SolverEvaluator;
use dirac_delay::isofamily::{
    build_family, constant_h, cosine_mode_h, family_charfn_closed, k_kernels, nystrom_eigs,
    tune_h_for_pair, verify_isospectrality, EigOptions, FamilyMode, HankelKernelOp,
};
use dirac_delay::quadrature::QuadratureRule;
use dirac_delay::series::{series_charfn, DEFAULT_POINTS};
use dirac_delay::solver::{Solver, SolverOptions};
use dirac_delay::spectrum::{
    ambarzumian_residual, hadamard_delta, locate_eigenvalues, locate_with_fallback,
    HadamardOptions, RootSearchOptions, Spectrum,
};
use dirac_delay::{
    make_delay_config, DelayConfig, PiecewiseFunction, PotentialPair, Segment, Shape, C64,
};

// tolerances, as stated by each criterion
const TOL_UNPERTURBED: f64 = 1e-9;
const TOL_ENGINES: f64 = 1e-6;
const TOL_ISO_SPECTRA: f64 = 1e-7;
const TOL_ORACLE_MATCH: f64 = 1e-7;
const TOL_TUNED_PAIR: f64 = 1e-7;
const TOL_TWO_PARAM: f64 = 1e-5;
const TOL_KERNELS: f64 = 1e-8;
const TOL_NYSTROM_REL: f64 = 1e-6;
const TOL_RESIDUAL: f64 = 1e-8;
const TOL_HADAMARD: f64 = 1e-2;
const SLOPE_SLACK: f64 = 0.05;
const TOL_AMBARZUMIAN_ZERO: f64 = 1e-9;
const MIN_AMBARZUMIAN_NONZERO: f64 = 1e-3;

const SEED: u64 = 0x5eed_d1ac;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Piecewise function on `[lo, hi]` with 2–3 random pieces, each bounded by
/// `amp` in modulus.
fn random_function(rng: &mut ChaCha8Rng, lo: f64, hi: f64, amp: f64) -> PiecewiseFunction {
    let pieces = rng.random_range(2..=3);
    let mut cuts: Vec<f64> = (0..pieces - 1).map(|_| rng.random_range(lo..hi)).collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    let mut segs = Vec::new();
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        let unit = |rng: &mut ChaCha8Rng| {
            let r = amp * rng.random_range(0.0..1.0f64).sqrt();
            C64::from_polar(r, rng.random_range(0.0..2.0 * PI))
        };
        let shape = match rng.random_range(0..3) {
            0 => Shape::Constant(unit(rng)),
            1 => Shape::Cosine {
                amplitude: unit(rng),
                frequency: rng.random_range(0.5..6.0),
                phase: rng.random_range(0.0..2.0 * PI),
            },
            _ => {
                let n = rng.random_range(3..7);
                let vals = (0..n).map(|_| unit(rng)).collect();
                Shape::Samples(SampledShape::new(u, v, vals).unwrap())
            }
        };
        segs.push(Segment::new(u, v, shape));
    }
    PiecewiseFunction::from_sparse(segs).unwrap()
}

fn random_pair(rng: &mut ChaCha8Rng, cfg: &DelayConfig, lo: f64, hi: f64, amp: f64) -> PotentialPair {
    let p = random_function(rng, lo, hi, amp);
    let q = random_function(rng, lo, hi, amp);
    PotentialPair::new(p, q, cfg).unwrap()
}

fn sup_norm(f: &PiecewiseFunction) -> f64 {
    (0..=2000)
        .map(|i| f.value(PI * i as f64 / 2000.0).norm())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let cfg = make_delay_config(1.0).unwrap();
    let ev = SolverEvaluator::new(&PotentialPair::zero(), &cfg, SolverOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    let mut flagged = 0;
    for j in [1u8, 2] {
        let spec = locate_eigenvalues(&ev, j, 20, &RootSearchOptions::default()).unwrap();
        flagged += spec.flagged().len();
        for e in &spec.entries {
            let want = e.n as f64 - if j == 2 { 0.5 } else { 0.0 };
            worst = worst.max((e.lambda() - want).norm());
        }
    }
    outcome(
        flagged == 0 && worst <= TOL_UNPERTURBED,
        format!("max |λ − closed form| = {worst:.2e} over j = 1, 2, |n| ≤ 20 (tol {TOL_UNPERTURBED:.0e}), flagged {flagged}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let rule = QuadratureRule::gauss_legendre(DEFAULT_POINTS).unwrap();
    let mut worst: f64 = 0.0;
    let mut inexact = 0;
    for a in [0.5, 0.8, 1.0] {
        let cfg = make_delay_config(a).unwrap();
        for _ in 0..5 {
            let pp = random_pair(&mut rng, &cfg, a, 3.0 * a, 1.0);
            let solver = Solver::new(&pp, &cfg, SolverOptions::default()).unwrap();
            for i in 0..50 {
                let l = c(-20.0 + 40.0 * i as f64 / 49.0);
                let s = series_charfn(&pp, &cfg, l, 2, &rule).unwrap();
                inexact += usize::from(!s.exact);
                let (d1, d2) = solver.charfn(l).unwrap();
                let e1 = (d1 - s.delta1).norm() / s.delta1.norm().max(1.0);
                let e2 = (d2 - s.delta2).norm() / s.delta2.norm().max(1.0);
                worst = worst.max(e1).max(e2);
            }
        }
    }
    outcome(
        inexact == 0 && worst <= TOL_ENGINES,
        format!("15 random potentials, 50 λ each: max relative |Δ_series − Δ_solver| = {worst:.2e} (tol {TOL_ENGINES:.0e})"),
    )
}

/// Zeros of `f` on `[lo, hi] × [−h, h]`, found without the contour
/// machinery: sign changes plus bisection on the real line, and Newton from a
/// grid of starting points off it.
fn oracle_zeros<F: Fn(C64) -> C64>(f: F, lo: f64, hi: f64, h: f64) -> Vec<C64> {
    let mut zeros: Vec<C64> = Vec::new();
    let push = |z: C64, zeros: &mut Vec<C64>| {
        if zeros.iter().all(|w| (w - z).norm() > 1e-7) {
            zeros.push(z);
        }
    };
    let re = |x: f64| f(c(x)).re;
    let steps = ((hi - lo) / 1e-3).ceil() as usize;
    let mut x0 = lo;
    let mut f0 = re(x0);
    for i in 1..=steps {
        let x1 = lo + (hi - lo) * i as f64 / steps as f64;
        let f1 = re(x1);
        if f0 == 0.0 {
            push(c(x0), &mut zeros);
        } else if f0.signum() != f1.signum() {
            let (mut u, mut v, mut fu) = (x0, x1, f0);
            for _ in 0..80 {
                let m = 0.5 * (u + v);
                let fm = re(m);
                if fm.signum() == fu.signum() {
                    u = m;
                    fu = fm;
                } else {
                    v = m;
                }
            }
            push(c(0.5 * (u + v)), &mut zeros);
        }
        x0 = x1;
        f0 = f1;
    }
    let newton = |mut z: C64| -> Option<C64> {
        for _ in 0..80 {
            let fz = f(z);
            let d = (f(z + 1e-7) - f(z - 1e-7)) / 2e-7;
            let step = fz / d;
            z -= step;
            if !z.is_finite() {
                return None;
            }
            if step.norm() < 1e-14 * z.norm().max(1.0) {
                return Some(z);
            }
        }
        None
    };
    let nx = ((hi - lo) / 0.1).ceil() as usize;
    for i in 0..=nx {
        for k in 1..=12 {
            for sign in [-1.0, 1.0] {
                let z0 = C64::new(lo + (hi - lo) * i as f64 / nx as f64, sign * h * k as f64 / 12.0);
                if let Some(z) = newton(z0) {
                    if z.im.abs() > 1e-9 && z.re >= lo && z.re <= hi && z.im.abs() <= h {
                        push(z, &mut zeros);
                    }
                }
            }
        }
    }
    zeros
}

fn criterion_3() -> Outcome {
    let a = 1.0;
    let cfg = make_delay_config(a).unwrap();
    let search = RootSearchOptions::strip();
    let eig = EigOptions::default();
    let mut worst_family: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut problems = Vec::new();
    for (mode, c0) in [(FamilyMode::POnly, 3.0 * PI / a), (FamilyMode::QOnly, PI / a)] {
        let h = constant_h(&cfg, c0).unwrap();
        let closed = |l: C64| family_charfn_closed(&h, &cfg, l);
        for j in [1u8, 2] {
            let reference = locate_eigenvalues(&closed, j, 15, &search).unwrap();
            if !reference.is_clean() {
                problems.push(format!("{mode:?} j={j}: closed-form spectrum flagged"));
                continue;
            }
            // independent oracle over the span of the located zeros
            let lo = reference.entries.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
            let hi = reference.entries.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
            let oracle = oracle_zeros(
                |l| {
                    let (d1, d2) = closed(l).unwrap();
                    if j == 1 {
                        d1
                    } else {
                        d2
                    }
                },
                lo - 1e-6,
                hi + 1e-6,
                search.strip_half_height,
            );
            if oracle.len() != reference.entries.len() {
                problems.push(format!(
                    "{mode:?} j={j}: oracle finds {} zeros, spectrum lists {}",
                    oracle.len(),
                    reference.entries.len()
                ));
            }
            for e in &reference.entries {
                let d = oracle
                    .iter()
                    .map(|z| (z - e.lambda()).norm())
                    .fold(f64::INFINITY, f64::min);
                worst_oracle = worst_oracle.max(d);
            }
            for s in [0.0, 1.0, 5.0] {
                let (alpha, beta) = match mode {
                    FamilyMode::POnly => (c(s), c(0.0)),
                    _ => (c(0.0), c(s)),
                };
                let (_, pp) = build_family(&cfg, &h, mode, alpha, beta, &eig).unwrap();
                let ev = SolverEvaluator::new(&pp, &cfg, SolverOptions::default()).unwrap();
                let spec = locate_eigenvalues(&ev, j, 15, &search).unwrap();
                if !spec.is_clean() {
                    problems.push(format!("{mode:?} j={j} s={s}: flagged"));
                    continue;
                }
                for (x, y) in spec.entries.iter().zip(&reference.entries) {
                    worst_family = worst_family.max((x.lambda() - y.lambda()).norm());
                }
            }
        }
    }
    let pass = problems.is_empty() && worst_family <= TOL_ISO_SPECTRA && worst_oracle <= TOL_ORACLE_MATCH;
    let mut detail = format!(
        "p_only/q_only, j = 1, 2, |n| ≤ 15, samples {{0, 1, 5}}: max deviation from closed-form zeros {worst_family:.2e} (tol {TOL_ISO_SPECTRA:.0e}); closed-form zeros vs independent scan {worst_oracle:.2e} (tol {TOL_ORACLE_MATCH:.0e})"
    );
    if !problems.is_empty() {
        detail.push_str(&format!("; problems: {}", problems.join("; ")));
    }
    outcome(pass, detail)
}

fn tuned_kernel(cfg: &DelayConfig) -> dirac_delay::Result<PiecewiseFunction> {
    let h0 = constant_h(cfg, 1.0)?;
    let h1 = cosine_mode_h(cfg, 3)?;
    Ok(tune_h_for_pair(cfg, &h0, &h1, (2.0, 2.5), (0, 0), &EigOptions::default())?.h)
}

fn criterion_4() -> Outcome {
    let cfg = make_delay_config(1.0).unwrap();
    let h = match tuned_kernel(&cfg) {
        Ok(h) => h,
        Err(e) => return outcome(false, format!("tuning failed: {e}")),
    };
    let op = HankelKernelOp::new(&cfg, &h, EigOptions::default().m).unwrap();
    let mus: Vec<f64> = nystrom_eigs(&op, 6).unwrap().iter().map(|e| e.mu).collect();
    let dist = |t: f64| mus.iter().map(|m| (m - t).abs()).fold(f64::INFINITY, f64::min);
    let (dp, dm) = (dist(1.0), dist(-1.0));
    let tuned = dp <= TOL_TUNED_PAIR && dm <= TOL_TUNED_PAIR;
    let (family, _) =
        build_family(&cfg, &h, FamilyMode::Both, c(0.0), c(0.0), &EigOptions::default()).unwrap();
    let params = [(c(1.0), c(1.0)), (c(2.0), c(-1.0)), (c(0.0), c(0.0))];
    let grid: Vec<C64> = (0..61).map(|i| c(-15.0 + 0.5 * i as f64)).collect();
    let report =
        verify_isospectrality(&family, &params, &grid, TOL_TWO_PARAM, SolverOptions::default())
            .unwrap();
    let worst = report
        .samples
        .iter()
        .map(|s| s.solver_deviation.max(s.series_deviation))
        .fold(0.0, f64::max);
    outcome(
        tuned && report.pass,
        format!(
            "tuned kernel: |μ − 1| = {dp:.1e}, |μ + 1| = {dm:.1e} (tol {TOL_TUNED_PAIR:.0e}); samples (1,1), (2,−1), (0,0): max deviation {worst:.2e} (tol {TOL_TWO_PARAM:.0e})"
        ),
    )
}

fn criterion_5() -> Outcome {
    let a = 1.0;
    let cfg = make_delay_config(a).unwrap();
    let eig = EigOptions::default();
    let mut members = vec![
        (
            "p_only",
            constant_h(&cfg, 3.0 * PI / a).unwrap(),
            FamilyMode::POnly,
            c(5.0),
            c(0.0),
        ),
        ("q_only", constant_h(&cfg, PI / a).unwrap(), FamilyMode::QOnly, c(0.0), c(3.0)),
    ];
    if let Ok(h) = tuned_kernel(&cfg) {
        members.push(("both", h, FamilyMode::Both, c(2.0), c(-1.0)));
    }
    let mut worst_k1: f64 = 0.0;
    let mut worst_k2: f64 = 0.0;
    let mut worst_tail: f64 = 0.0;
    for (_, h, mode, alpha, beta) in &members {
        let (_, pp) = build_family(&cfg, h, *mode, *alpha, *beta, &eig).unwrap();
        for i in 0..400 {
            let x = a + 2.0 * a * (i as f64 + 0.5) / 400.0;
            let (k1, k2) = k_kernels(&pp, &cfg, x - 0.5 * a).unwrap();
            worst_k1 = worst_k1.max(k1.norm());
            if x < 2.5 * a {
                worst_k2 = worst_k2.max(k2.norm());
            } else {
                worst_tail = worst_tail.max((k2 - h.value(x)).norm());
            }
        }
    }
    outcome(
        members.len() == 3 && worst_k1.max(worst_k2).max(worst_tail) <= TOL_KERNELS,
        format!(
            "{} families, 400 points: max |K₁| = {worst_k1:.2e}, max |K₂| on (a, 5a/2) = {worst_k2:.2e}, max |K₂ − h| on (5a/2, 3a) = {worst_tail:.2e} (tol {TOL_KERNELS:.0e})",
            members.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut worst_rel: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for a in [0.6, 0.8, 1.0] {
        let cfg = make_delay_config(a).unwrap();
        for cc in [PI / a, 3.0 * PI / a, 1.7] {
            let op = HankelKernelOp::new(&cfg, &constant_h(&cfg, cc).unwrap(), 200).unwrap();
            let pairs = nystrom_eigs(&op, 4).unwrap();
            for (k, e) in pairs.iter().enumerate() {
                let want = (-1f64).powi(k as i32) * cc * a / ((2 * k + 1) as f64 * PI);
                worst_rel = worst_rel.max(((e.mu - want) / want).abs());
                worst_res = worst_res.max(e.residual);
            }
        }
    }
    outcome(
        worst_rel <= TOL_NYSTROM_REL && worst_res <= TOL_RESIDUAL,
        format!(
            "M = 200, k ≤ 3, three delays and three constants: max relative eigenvalue error {worst_rel:.2e} (tol {TOL_NYSTROM_REL:.0e}), max residual {worst_res:.2e} (tol {TOL_RESIDUAL:.0e})"
        ),
    )
}

fn criterion_7() -> Outcome {
    let cfg = make_delay_config(1.0).unwrap();
    let ev = SolverEvaluator::new(&PotentialPair::zero(), &cfg, SolverOptions::default()).unwrap();
    let full = locate_eigenvalues(&ev, 1, 200, &RootSearchOptions::default()).unwrap();
    if !full.is_clean() {
        return outcome(false, format!("spectrum flagged at n = {:?}", full.flagged()));
    }
    let truncated = Spectrum {
        n_max: 100,
        entries: full.entries.iter().filter(|e| e.n.abs() <= 100).cloned().collect(),
        ..full.clone()
    };
    let grid: Vec<f64> = (0..=240).map(|i| -3.0 + 6.0 * i as f64 / 240.0).collect();
    let err = |spec: &Spectrum, tail: bool| {
        let opts = HadamardOptions {
            tail_correction: tail,
        };
        grid.iter()
            .map(|&l| (hadamard_delta(spec, c(l), &opts).unwrap() - (PI * l).sin()).norm())
            .fold(0.0, f64::max)
    };
    let (e200, e100) = (err(&full, true), err(&truncated, true));
    let (raw200, raw100) = (err(&full, false), err(&truncated, false));
    outcome(
        e200 <= TOL_HADAMARD && e200 < e100,
        format!(
            "λ ∈ [−3, 3]: max error {e200:.2e} at n_max = 200 (tol {TOL_HADAMARD:.0e}), {e100:.2e} at n_max = 100; bare truncated product {raw200:.2e} / {raw100:.2e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 8);
    let opts = AsymptoticOptions::default();
    let mut lines = Vec::new();
    let mut pass = true;
    let mut degenerate = 0;
    let mut total = 0;
    for a in [0.5, 0.8, 1.0] {
        let cfg = make_delay_config(a).unwrap();
        for _ in 0..2 {
            let pp = random_pair(&mut rng, &cfg, a, 2.0 * a, 1.0);
            let fit = asymptotic_remainder_fit(&pp, &cfg, &opts).unwrap();
            total += 1;
            pass &= fit.within_bound(SLOPE_SLACK);
            match fit.fitted_slope {
                Some(s) => lines.push(format!("a = {a}: slope {s:.3} vs {:.3}", fit.target_slope)),
                None => degenerate += 1,
            }
        }
    }
    // same check on supports reaching 3a, where the remainder is non-zero
    let mut extra = Vec::new();
    for a in [0.5, 0.8, 1.0] {
        let cfg = make_delay_config(a).unwrap();
        let q = PiecewiseFunction::single(a, 3.0 * a, Shape::Constant(c(0.7))).unwrap();
        let pp = PotentialPair::new(PiecewiseFunction::zero(), q, &cfg).unwrap();
        let fit = asymptotic_remainder_fit(&pp, &cfg, &opts).unwrap();
        if let Some(s) = fit.fitted_slope {
            extra.push(format!("a = {a}: {s:.3} ≤ {:.3}", fit.target_slope + SLOPE_SLACK));
            pass &= fit.within_bound(SLOPE_SLACK);
        }
    }
    outcome(
        pass,
        format!(
            "{total} random potentials on (a, 2a): {degenerate} with remainder ≡ 0 along λ = it{}{}; supports (a, 3a) slopes: {}",
            if lines.is_empty() { "" } else { ", " },
            lines.join(", "),
            extra.join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 9);
    let search = RootSearchOptions::default();
    let mut zero_worst: f64 = 0.0;
    let mut nonzero_min = f64::INFINITY;
    let mut failures = Vec::new();
    for a in [0.8, 1.0] {
        let cfg = make_delay_config(a).unwrap();
        let ev = SolverEvaluator::new(&PotentialPair::zero(), &cfg, SolverOptions::default()).unwrap();
        for j in [1u8, 2] {
            let spec = locate_with_fallback(&ev, j, 10, &search).unwrap();
            match ambarzumian_residual(&spec) {
                Ok(r) => zero_worst = zero_worst.max(r),
                Err(e) => failures.push(format!("zero potential a = {a} j = {j}: {e}")),
            }
        }
        for k in 0..10 {
            let amp = rng.random_range(0.1..1.0);
            let lo = rng.random_range(a..0.5 * (a + PI));
            let pp = random_pair(&mut rng, &cfg, lo, PI, amp);
            let size = sup_norm(pp.p()) + sup_norm(pp.q());
            if size < 0.1 {
                continue;
            }
            let ev = SolverEvaluator::new(&pp, &cfg, SolverOptions::default()).unwrap();
            let mut best: f64 = 0.0;
            for j in [1u8, 2] {
                let spec = locate_with_fallback(&ev, j, 10, &search).unwrap();
                match ambarzumian_residual(&spec) {
                    Ok(r) => best = best.max(r),
                    Err(e) => failures.push(format!("a = {a} sample {k} j = {j}: {e}")),
                }
            }
            nonzero_min = nonzero_min.min(best);
        }
    }
    let mut detail = format!(
        "n_max = 10, a ∈ {{0.8, 1.0}}: zero potential residual {zero_worst:.2e} (tol {TOL_AMBARZUMIAN_ZERO:.0e}); smallest residual over 20 nonzero samples {nonzero_min:.2e} (need ≥ {MIN_AMBARZUMIAN_NONZERO:.0e})"
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; unresolved: {}", failures.join("; ")));
    }
    outcome(
        failures.is_empty()
            && zero_worst <= TOL_AMBARZUMIAN_ZERO
            && nonzero_min >= MIN_AMBARZUMIAN_NONZERO,
        detail,
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (n, run) in criteria {
        let t = Instant::now();
        let r = run();
        println!(
            "criterion {n}: {} {} [{:.1}s]",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail,
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!r.pass);
    }
    if failed == 0 {
        println!("acceptance: all 9 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 9 criteria fail");
        ExitCode::FAILURE
    }
}
