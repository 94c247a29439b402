//! Eigenvalues as zeros of `Δ_j`, reconstruction of `Δ_j` from its zeros,
//! and the instruments used around the unperturbed-spectrum uniqueness
//! property.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{DelayConfig, PotentialPair};
use crate::error::{Error, Result};
use crate::eval::CharEvaluator;
use crate::linalg::C64;
use crate::quadrature::{oscillation_panel, pieces, QuadratureRule};

const I: C64 = C64::new(0.0, 1.0);

/// How eigenvalues are located.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// One small disk around each asymptotic center; entries whose disk does
    /// not hold exactly one zero are flagged.
    #[default]
    Disk,
    /// Enumerate every zero in the strip `|Im λ| ≤ H` around the centers,
    /// order them by real part and index them counting down from the zero
    /// nearest the center of `n_max`. Handles zeros that drift out of their
    /// disks or form complex pairs.
    Strip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RootSearchOptions {
    pub disk_radius: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub contour_points: usize,
    pub mode: SearchMode,
    /// Half-height `H` of the strip in [`SearchMode::Strip`].
    pub strip_half_height: f64,
}

impl Default for RootSearchOptions {
    fn default() -> Self {
        Self {
            disk_radius: 0.25,
            newton_tol: 1e-11,
            max_newton: 60,
            contour_points: 256,
            mode: SearchMode::Disk,
            strip_half_height: 3.0,
        }
    }
}

impl RootSearchOptions {
    pub fn strip() -> Self {
        Self {
            mode: SearchMode::Strip,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.disk_radius > 0.0 && self.disk_radius < 0.5) {
            return Err(Error::InvalidOption(format!(
                "disk radius must lie in (0, 1/2), got {}",
                self.disk_radius
            )));
        }
        if self.contour_points < 8 || self.max_newton == 0 || !(self.newton_tol > 0.0) {
            return Err(Error::InvalidOption(
                "need ≥ 8 contour points, ≥ 1 Newton step and a positive tolerance".into(),
            ));
        }
        if !(self.strip_half_height > 0.0) {
            return Err(Error::InvalidOption("strip half-height must be positive".into()));
        }
        Ok(())
    }
}

/// Asymptotic center `n + (1 − j)/2`.
pub fn center(j: u8, n: i64) -> f64 {
    n as f64 + if j == 1 { 0.0 } else { -0.5 }
}

fn check_j(j: u8) -> Result<()> {
    if j == 1 || j == 2 {
        Ok(())
    } else {
        Err(Error::InvalidOption(format!("boundary index j must be 1 or 2, got {j}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub n: i64,
    pub re: f64,
    pub im: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl SpectrumEntry {
    pub fn lambda(&self) -> C64 {
        C64::new(self.re, self.im)
    }

    fn new(n: i64, z: C64, flag: Option<String>) -> Self {
        Self {
            n,
            re: z.re,
            im: z.im,
            flag,
        }
    }
}

/// Eigenvalues `λ_{n,j}` for `|n| ≤ n_max`, ordered by `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub j: u8,
    pub n_max: usize,
    pub entries: Vec<SpectrumEntry>,
}

impl Spectrum {
    /// The spectrum of the unperturbed problem, `λ_{n,j} = n + (1 − j)/2`.
    pub fn unperturbed(j: u8, n_max: usize) -> Result<Self> {
        check_j(j)?;
        let n = n_max as i64;
        Ok(Self {
            j,
            n_max,
            entries: (-n..=n)
                .map(|k| SpectrumEntry::new(k, C64::new(center(j, k), 0.0), None))
                .collect(),
        })
    }

    pub fn get(&self, n: i64) -> Option<&SpectrumEntry> {
        self.entries
            .binary_search_by_key(&n, |e| e.n)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn lambda(&self, n: i64) -> Option<C64> {
        self.get(n).map(SpectrumEntry::lambda)
    }

    pub fn flagged(&self) -> Vec<i64> {
        self.entries
            .iter()
            .filter(|e| e.flag.is_some())
            .map(|e| e.n)
            .collect()
    }

    pub fn is_clean(&self) -> bool {
        self.entries.iter().all(|e| e.flag.is_none())
    }

    fn require_clean(&self) -> Result<()> {
        let flagged = self.flagged();
        if flagged.is_empty() {
            Ok(())
        } else {
            Err(Error::FlaggedSpectrum(flagged))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Parses and validates a spectrum document.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut s: Spectrum = serde_json::from_str(text)?;
        check_j(s.j)?;
        s.entries.sort_by_key(|e| e.n);
        if s.entries.windows(2).any(|w| w[0].n == w[1].n) {
            return Err(Error::Config("spectrum lists some n twice".into()));
        }
        if s.entries.iter().any(|e| !(e.re.is_finite() && e.im.is_finite())) {
            return Err(Error::Config("spectrum entries must be finite".into()));
        }
        Ok(s)
    }
}

// ---------------------------------------------------------------------------
// contour machinery

/// Summary of `f` along a closed contour.
#[derive(Clone, Copy, Debug)]
struct Scan {
    /// Total change of `arg f` divided by `2π`.
    winding: f64,
    /// `(1/2πi) ∮ z d log f`, the sum of the enclosed zeros.
    moment: C64,
    min_abs: f64,
}

impl Scan {
    fn count(&self) -> i64 {
        self.winding.round() as i64
    }

    fn well_conditioned(&self) -> bool {
        self.min_abs > 1e-8 && (self.winding - self.winding.round()).abs() < 0.1
    }
}

/// Largest phase jump accepted between neighbouring contour samples.
const MAX_PHASE_STEP: f64 = PI / 3.0;
const MAX_SUBDIVISION: usize = 18;

fn scan_contour<F, Z>(f: &F, z: Z, points: usize) -> Result<Scan>
where
    F: Fn(C64) -> Result<C64>,
    Z: Fn(f64) -> C64,
{
    let mut total = C64::new(0.0, 0.0);
    let mut moment = C64::new(0.0, 0.0);
    let mut min_abs = f64::INFINITY;
    let mut s0 = 0.0;
    let mut z0 = z(0.0);
    let mut f0 = f(z0)?;
    min_abs = min_abs.min(f0.norm());
    for k in 1..=points {
        let s1 = k as f64 / points as f64;
        let z1 = z(s1);
        let f1 = f(z1)?;
        // (s, z, f) stack for adaptive refinement of this step
        let mut stack = vec![(s1, z1, f1, 0usize)];
        while let Some(&(sb, zb, fb, depth)) = stack.last() {
            min_abs = min_abs.min(fb.norm());
            let dlog = (fb / f0).ln();
            if !dlog.is_finite() {
                // a sample sits on a zero: no usable winding number
                return Ok(Scan {
                    winding: f64::NAN,
                    moment: C64::new(0.0, 0.0),
                    min_abs: 0.0,
                });
            }
            if dlog.im.abs() > MAX_PHASE_STEP && depth < MAX_SUBDIVISION {
                let sm = 0.5 * (s0 + sb);
                let zm = z(sm);
                let fm = f(zm)?;
                // both halves of the step are one level deeper
                if let Some(top) = stack.last_mut() {
                    top.3 = depth + 1;
                }
                stack.push((sm, zm, fm, depth + 1));
                continue;
            }
            stack.pop();
            total += dlog;
            moment += 0.5 * (z0 + zb) * dlog;
            s0 = sb;
            z0 = zb;
            f0 = fb;
        }
    }
    Ok(Scan {
        winding: total.im / (2.0 * PI),
        moment: moment / (2.0 * PI * I),
        min_abs,
    })
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    fn point(&self, s: f64) -> C64 {
        let (w, h) = (self.x1 - self.x0, self.y1 - self.y0);
        let per = 2.0 * (w + h);
        let d = s.rem_euclid(1.0) * per;
        if d < w {
            C64::new(self.x0 + d, self.y0)
        } else if d < w + h {
            C64::new(self.x1, self.y0 + (d - w))
        } else if d < 2.0 * w + h {
            C64::new(self.x1 - (d - w - h), self.y1)
        } else {
            C64::new(self.x0, self.y1 - (d - 2.0 * w - h))
        }
    }

    fn contains(&self, z: C64, margin: f64) -> bool {
        z.re >= self.x0 - margin
            && z.re <= self.x1 + margin
            && z.im >= self.y0 - margin
            && z.im <= self.y1 + margin
    }

    /// Cuts across the longer side at fraction `t`.
    fn split(&self, t: f64) -> [Rect; 2] {
        if self.x1 - self.x0 >= self.y1 - self.y0 {
            let xm = self.x0 + t * (self.x1 - self.x0);
            [Rect { x1: xm, ..*self }, Rect { x0: xm, ..*self }]
        } else {
            let ym = self.y0 + t * (self.y1 - self.y0);
            [Rect { y1: ym, ..*self }, Rect { y0: ym, ..*self }]
        }
    }

    fn perimeter(&self) -> f64 {
        2.0 * ((self.x1 - self.x0) + (self.y1 - self.y0))
    }
}

fn rect_points(r: &Rect, per_unit: usize) -> usize {
    ((r.perimeter() * per_unit as f64).ceil() as usize).max(16)
}

/// Number of zeros of `Δ_j` inside `rect` by the argument principle, using
/// the evaluator's fast path.
pub fn count_zeros_in_rect<E: CharEvaluator + ?Sized>(
    eval: &E,
    j: u8,
    rect: Rect,
    opts: &RootSearchOptions,
) -> Result<i64> {
    check_j(j)?;
    let f = |z: C64| eval.component_fast(j, z);
    let scan = scan_contour(&f, |s| rect.point(s), rect_points(&rect, opts.contour_points / 8))?;
    if !scan.well_conditioned() {
        return Err(Error::Precondition(format!(
            "winding number on {rect:?} is ill-conditioned (min |Δ| = {:e})",
            scan.min_abs
        )));
    }
    Ok(scan.count())
}

/// Newton iteration with a central-difference derivative (step `1e−6`).
fn newton<F>(f: F, z0: C64, tol: f64, max_iter: usize) -> Result<Option<C64>>
where
    F: Fn(C64) -> Result<C64>,
{
    const H: f64 = 1e-6;
    let mut z = z0;
    for _ in 0..max_iter {
        let fz = f(z)?;
        if fz == C64::new(0.0, 0.0) {
            return Ok(Some(z));
        }
        let d = (f(z + H)? - f(z - H)?) / (2.0 * H);
        if d.norm() == 0.0 || !d.is_finite() {
            return Ok(None);
        }
        let step = fz / d;
        z -= step;
        if !z.is_finite() {
            return Ok(None);
        }
        if step.norm() <= tol {
            return Ok(Some(z));
        }
    }
    Ok(None)
}

/// Coarse Newton on the fast path, then polishing on the accurate one.
fn refine_root<E: CharEvaluator + ?Sized>(
    eval: &E,
    j: u8,
    z0: C64,
    opts: &RootSearchOptions,
) -> Result<Option<C64>> {
    let fast = |z: C64| eval.component_fast(j, z);
    let accurate = |z: C64| eval.component(j, z);
    let start = newton(fast, z0, 1e-9, opts.max_newton)?.unwrap_or(z0);
    newton(accurate, start, opts.newton_tol, opts.max_newton)
}

const RADIUS_RETRIES: [f64; 4] = [1.0, 1.05, 0.95, 1.10];

fn locate_in_disk<E: CharEvaluator + ?Sized>(
    eval: &E,
    j: u8,
    n: i64,
    opts: &RootSearchOptions,
) -> Result<SpectrumEntry> {
    let c = C64::new(center(j, n), 0.0);
    let f = |z: C64| eval.component_fast(j, z);
    let mut chosen = None;
    for factor in RADIUS_RETRIES {
        let r = opts.disk_radius * factor;
        let scan = scan_contour(
            &f,
            |s| c + r * (2.0 * PI * I * s).exp(),
            opts.contour_points,
        )?;
        if scan.well_conditioned() {
            chosen = Some((r, scan));
            break;
        }
    }
    let Some((r, scan)) = chosen else {
        return Ok(SpectrumEntry::new(
            n,
            c,
            Some("winding ill-conditioned after radius retries".into()),
        ));
    };
    match scan.count() {
        1 => match refine_root(eval, j, scan.moment, opts)? {
            Some(z) if (z - c).norm() < r => Ok(SpectrumEntry::new(n, z, None)),
            Some(z) => Ok(SpectrumEntry::new(
                n,
                z,
                Some(format!("Newton left the disk of radius {r}")),
            )),
            None => Ok(SpectrumEntry::new(
                n,
                scan.moment,
                Some("Newton did not converge".into()),
            )),
        },
        k => Ok(SpectrumEntry::new(
            n,
            c,
            Some(format!("{k} zeros in the disk of radius {r}")),
        )),
    }
}

/// Zeros inside `rect` given that it holds `count` of them.
fn roots_in_rect<E: CharEvaluator + ?Sized>(
    eval: &E,
    j: u8,
    rect: Rect,
    scan: Scan,
    opts: &RootSearchOptions,
    depth: usize,
    out: &mut Vec<C64>,
) -> Result<bool> {
    let count = scan.count();
    if count <= 0 {
        return Ok(count == 0);
    }
    let size = (rect.x1 - rect.x0).max(rect.y1 - rect.y0);
    if count == 1 {
        if let Some(z) = refine_root(eval, j, scan.moment, opts)? {
            if rect.contains(z, 1e-6 * size.max(1e-3)) {
                out.push(z);
                return Ok(true);
            }
        }
    }
    if depth >= 40 || size < 1e-7 {
        return Ok(false);
    }
    let f = |z: C64| eval.component_fast(j, z);
    // nudge the cut if it runs through a zero
    for shift in [0.0, 1e-3, -1e-3, 3e-3, -3e-3] {
        let halves = rect.split(0.5 + shift);
        let scans = [
            scan_contour(&f, |t| halves[0].point(t), rect_points(&halves[0], 64))?,
            scan_contour(&f, |t| halves[1].point(t), rect_points(&halves[1], 64))?,
        ];
        if scans.iter().all(Scan::well_conditioned) {
            let mut ok = true;
            for (h, sc) in halves.into_iter().zip(scans) {
                ok &= roots_in_rect(eval, j, h, sc, opts, depth + 1, out)?;
            }
            return Ok(ok);
        }
    }
    Ok(false)
}

fn locate_in_strip<E: CharEvaluator + ?Sized>(
    eval: &E,
    j: u8,
    n_max: usize,
    opts: &RootSearchOptions,
) -> Result<Spectrum> {
    let n = n_max as i64;
    let f = |z: C64| eval.component_fast(j, z);
    let mut last_problem = String::new();
    for (offset, height) in [(0.0, 1.0), (0.05, 1.0), (-0.05, 1.1), (0.1, 1.2)] {
        let hh = opts.strip_half_height * height;
        // one spare cell at each end so the end zeros can be anchored
        let cells: Vec<Rect> = (-n - 1..=n + 1)
            .map(|k| Rect {
                x0: center(j, k) - 0.5 + offset,
                x1: center(j, k) + 0.5 + offset,
                y0: -hh,
                y1: hh,
            })
            .collect();
        let found: Vec<Result<(bool, Vec<C64>)>> = cells
            .par_iter()
            .map(|rect| {
                let scan = scan_contour(&f, |s| rect.point(s), rect_points(rect, 32))?;
                if !scan.well_conditioned() {
                    return Ok((false, Vec::new()));
                }
                let mut roots = Vec::new();
                let ok = roots_in_rect(eval, j, *rect, scan, opts, 0, &mut roots)?;
                Ok((ok, roots))
            })
            .collect();
        let mut all = Vec::new();
        let mut ok = true;
        for r in found {
            let (good, roots) = r?;
            ok &= good;
            all.extend(roots);
        }
        if !ok {
            last_problem = "a strip cell could not be resolved".into();
            continue;
        }
        all.sort_by(|a, b| a.re.total_cmp(&b.re));
        // conjugate pairs share a real part; order them by imaginary part
        let mut i = 0;
        while i < all.len() {
            let mut k = i + 1;
            while k < all.len() && (all[k].re - all[i].re).abs() < 1e-8 {
                k += 1;
            }
            all[i..k].sort_by(|a, b| a.im.total_cmp(&b.im));
            i = k;
        }
        // the zero closest to the last center carries n_max; count down and
        // accept if the far end lands within one cell of its own center
        let near = |z: C64, k: i64| (z - center(j, k)).norm();
        let Some(top) = (0..all.len()).min_by(|&x, &y| near(all[x], n).total_cmp(&near(all[y], n)))
        else {
            last_problem = "strip holds no zeros".into();
            continue;
        };
        let span = 2 * n_max;
        if top < span || near(all[top], n) > 1.0 || near(all[top - span], -n) > 1.0 {
            last_problem = format!(
                "zeros counted down from n = {n} do not reach the center of n = {}",
                -n
            );
            continue;
        }
        let entries = (-n..=n)
            .zip(&all[top - span..=top])
            .map(|(k, &z)| SpectrumEntry::new(k, z, None))
            .collect();
        return Ok(Spectrum {
            j,
            n_max,
            entries,
        });
    }
    Ok(Spectrum {
        j,
        n_max,
        entries: (-n..=n)
            .map(|k| SpectrumEntry::new(k, C64::new(center(j, k), 0.0), Some(last_problem.clone())))
            .collect(),
    })
}

/// Eigenvalues `λ_{n,j}`, `|n| ≤ n_max`, as zeros of `Δ_j`.
pub fn locate_eigenvalues<E: CharEvaluator + ?Sized>(
    eval: &E,
    j: u8,
    n_max: usize,
    opts: &RootSearchOptions,
) -> Result<Spectrum> {
    check_j(j)?;
    opts.validate()?;
    if n_max == 0 {
        return Err(Error::InvalidOption("n_max must be at least 1".into()));
    }
    match opts.mode {
        SearchMode::Strip => locate_in_strip(eval, j, n_max, opts),
        SearchMode::Disk => {
            let n = n_max as i64;
            let entries = (-n..=n)
                .into_par_iter()
                .map(|k| locate_in_disk(eval, j, k, opts))
                .collect::<Result<Vec<_>>>()?;
            Ok(Spectrum {
                j,
                n_max,
                entries,
            })
        }
    }
}

/// Disk search first; if any entry is flagged, the strip search with the
/// same settings.
pub fn locate_with_fallback<E: CharEvaluator + ?Sized>(
    eval: &E,
    j: u8,
    n_max: usize,
    opts: &RootSearchOptions,
) -> Result<Spectrum> {
    let first = locate_eigenvalues(eval, j, n_max, opts)?;
    if first.is_clean() || opts.mode == SearchMode::Strip {
        return Ok(first);
    }
    let strip = RootSearchOptions {
        mode: SearchMode::Strip,
        ..*opts
    };
    locate_eigenvalues(eval, j, n_max, &strip)
}

// ---------------------------------------------------------------------------
// Hadamard products

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HadamardOptions {
    /// Multiply by `exp(−λ² Σ_{n>n_max} 1/c_n²)`, the leading effect of the
    /// omitted factors `1 − λ²/c_n²`.
    pub tail_correction: bool,
}

impl Default for HadamardOptions {
    fn default() -> Self {
        Self {
            tail_correction: true,
        }
    }
}

/// `Σ_{k≥0} 1/(x₀ + k)²` by Euler–Maclaurin; accurate for `x₀ ≳ 10`.
fn inverse_square_tail(x0: f64) -> f64 {
    1.0 / x0 + 0.5 / x0.powi(2) + 1.0 / (6.0 * x0.powi(3)) - 1.0 / (30.0 * x0.powi(5))
}

/// `Δ_j(λ)` reconstructed from the spectrum by the symmetric truncated
/// product.
///
/// Factors for `n` and its mirror (`−n` for `j = 1`, `1 − n` for `j = 2`)
/// are taken together, which cancels the `exp(λ/c_n)` convergence factors
/// exactly. The result is normalized to `Δ₁ ~ sin λπ`, `Δ₂ ~ −cos λπ`; the
/// raw products have the opposite sign.
pub fn hadamard_delta(spec: &Spectrum, lambda: C64, opts: &HadamardOptions) -> Result<C64> {
    check_j(spec.j)?;
    spec.require_clean()?;
    let nm = spec.n_max as i64;
    let need = |n: i64| {
        spec.lambda(n)
            .ok_or_else(|| Error::Config(format!("spectrum is missing n = {n}")))
    };
    let mut prod = match spec.j {
        1 => -PI * (need(0)? - lambda),
        _ => C64::new(-1.0, 0.0),
    };
    for n in 1..=nm {
        let mirror = if spec.j == 1 { -n } else { 1 - n };
        let (c1, c2) = (center(spec.j, n), center(spec.j, mirror));
        prod *= (need(n)? - lambda) * (need(mirror)? - lambda) / (c1 * c2);
    }
    if opts.tail_correction && prod != C64::new(0.0, 0.0) {
        let shift = if spec.j == 1 { 0.0 } else { 0.5 };
        prod *= (-lambda * lambda * inverse_square_tail(nm as f64 + 1.0 - shift)).exp();
    }
    Ok(prod)
}

/// `max_n |λ_{n,j} − (n + (1 − j)/2)|`.
pub fn ambarzumian_residual(spec: &Spectrum) -> Result<f64> {
    check_j(spec.j)?;
    spec.require_clean()?;
    Ok(spec
        .entries
        .iter()
        .map(|e| (e.lambda() - center(spec.j, e.n)).norm())
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// window transforms

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowTransforms {
    pub nu: usize,
    #[serde(rename = "F")]
    pub f: C64,
    #[serde(rename = "G")]
    pub g: C64,
    pub lambda: C64,
}

/// `F = e^{iλ(2π − (ν+1)a)} ∫ p(t) e^{−2iλt} dt` over the window
/// `(π − (ν+1)a/2, π − νa/2)`, and `G` likewise with `q`. The potential
/// must vanish on `(π − νa/2, π)` and the window must lie beyond `2a`.
pub fn window_transforms(
    pp: &PotentialPair,
    cfg: &DelayConfig,
    nu: usize,
    lambda: C64,
    rule: &QuadratureRule,
) -> Result<WindowTransforms> {
    let a = cfg.a();
    let big_n = cfg.bracket();
    if 2 * big_n < nu + 3 {
        return Err(Error::Precondition(format!(
            "ν = {nu} exceeds 2N − 3 for N = {big_n}"
        )));
    }
    let upper = PI - nu as f64 * a / 2.0;
    let lower = PI - (nu + 1) as f64 * a / 2.0;
    if upper <= 2.0 * a {
        return Err(Error::Precondition(format!(
            "π − νa/2 = {upper} is not beyond 2a = {}",
            2.0 * a
        )));
    }
    for (name, f) in [("p", pp.p()), ("q", pp.q())] {
        if let Some(seg) = f.offending_segment(upper, PI) {
            return Err(Error::Precondition(format!(
                "{name} must vanish on ({upper}, π) but segment [{}, {}) is non-zero",
                seg.start, seg.end
            )));
        }
    }
    let phase = (I * lambda * (2.0 * PI - (nu + 1) as f64 * a)).exp();
    let panel = oscillation_panel(lambda.norm());
    let integrate = |f: &crate::domain::PiecewiseFunction| {
        let mut acc = C64::new(0.0, 0.0);
        for (u, v) in pieces(lower, upper, &f.breakpoints()) {
            if f.is_zero_on(u, v) {
                continue;
            }
            acc += rule.integrate_pieces(u, v, &[], panel, |t| {
                f.value(t) * (-2.0 * I * lambda * t).exp()
            });
        }
        phase * acc
    };
    Ok(WindowTransforms {
        nu,
        f: integrate(pp.p()),
        g: integrate(pp.q()),
        lambda,
    })
}
