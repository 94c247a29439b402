//! Domain types shared by every other module: the delay, piecewise-defined
//! potentials and their JSON form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chebyshev;
use crate::error::{Error, Result};
use crate::linalg::{Mat2, C64};

/// Length of the interval the system lives on.
pub const INTERVAL_LENGTH: f64 = PI;

const ZERO: C64 = C64::new(0.0, 0.0);

/// The delay `a` together with its bracket index `N`, the unique integer
/// with `π/(N+1) ≤ a < π/N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayConfig {
    a: f64,
    bracket: usize,
}

impl DelayConfig {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && a < PI) {
            return Err(Error::DelayOutOfRange { a });
        }
        let mut n = ((PI / a).floor() as usize).max(1);
        // Float rounding can put π/a on either side of an integer; settle it
        // against the bracket inequalities themselves.
        while a < PI / (n + 1) as f64 {
            n += 1;
        }
        while n > 1 && a >= PI / n as f64 {
            n -= 1;
        }
        Ok(Self { a, bracket: n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// The bracket index `N`.
    pub fn bracket(&self) -> usize {
        self.bracket
    }

    pub fn interval_length(&self) -> f64 {
        INTERVAL_LENGTH
    }
}

pub fn make_delay_config(a: f64) -> Result<DelayConfig> {
    DelayConfig::new(a)
}

/// Values on equally spaced nodes of `[lo, hi]`, linearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledShape {
    lo: f64,
    hi: f64,
    values: Vec<C64>,
}

impl SampledShape {
    pub fn new(lo: f64, hi: f64, values: Vec<C64>) -> Result<Self> {
        if values.len() < 2 || !(hi > lo) {
            return Err(Error::InvalidFunction(
                "samples need at least two values on a non-empty interval".into(),
            ));
        }
        Ok(Self { lo, hi, values })
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = (self.hi - self.lo) / (self.values.len() - 1) as f64;
        (0..self.values.len()).map(move |k| self.lo + k as f64 * h)
    }

    fn eval(&self, x: f64) -> C64 {
        let n = self.values.len();
        let h = (self.hi - self.lo) / (n - 1) as f64;
        let t = ((x - self.lo) / h).clamp(0.0, (n - 1) as f64);
        let k = (t.floor() as usize).min(n - 2);
        let frac = t - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }
}

/// Values on the Chebyshev–Lobatto points of `[lo, hi]`, interpolated by
/// the barycentric formula.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevShape {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    values: Vec<C64>,
}

impl ChebyshevShape {
    pub fn new(lo: f64, hi: f64, values: Vec<C64>) -> Result<Self> {
        if values.len() < 2 || !(hi > lo) {
            return Err(Error::InvalidFunction(
                "Chebyshev data need at least two values on a non-empty interval".into(),
            ));
        }
        let nodes = chebyshev::lobatto_nodes(lo, hi, values.len());
        Ok(Self {
            lo,
            hi,
            nodes,
            values,
        })
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    fn eval(&self, x: f64) -> C64 {
        chebyshev::interpolate_with_nodes(&self.nodes, &self.values, x.clamp(self.lo, self.hi))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Zero,
    Constant(C64),
    /// `amplitude · cos(frequency · x + phase)` in the absolute coordinate x.
    Cosine {
        amplitude: C64,
        frequency: f64,
        phase: f64,
    },
    Samples(SampledShape),
    Chebyshev(ChebyshevShape),
    Sum(Vec<Shape>),
}

impl Shape {
    pub fn eval(&self, x: f64) -> C64 {
        match self {
            Shape::Zero => ZERO,
            Shape::Constant(c) => *c,
            Shape::Cosine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * x + phase).cos(),
            Shape::Samples(s) => s.eval(x),
            Shape::Chebyshev(c) => c.eval(x),
            Shape::Sum(parts) => parts.iter().map(|s| s.eval(x)).sum(),
        }
    }

    /// True when the shape vanishes identically by construction.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            Shape::Zero => true,
            Shape::Constant(c) => *c == ZERO,
            Shape::Cosine { amplitude, .. } => *amplitude == ZERO,
            Shape::Samples(s) => s.values.iter().all(|v| *v == ZERO),
            Shape::Chebyshev(c) => c.values.iter().all(|v| *v == ZERO),
            Shape::Sum(parts) => parts.iter().all(Shape::is_identically_zero),
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            Shape::Zero => true,
            Shape::Constant(c) => c.im == 0.0,
            Shape::Cosine { amplitude, .. } => amplitude.im == 0.0,
            Shape::Samples(s) => s.values.iter().all(|v| v.im == 0.0),
            Shape::Chebyshev(c) => c.values.iter().all(|v| v.im == 0.0),
            Shape::Sum(parts) => parts.iter().all(Shape::is_real),
        }
    }

    fn scaled(&self, k: C64) -> Shape {
        match self {
            Shape::Zero => Shape::Zero,
            Shape::Constant(c) => Shape::Constant(c * k),
            Shape::Cosine {
                amplitude,
                frequency,
                phase,
            } => Shape::Cosine {
                amplitude: amplitude * k,
                frequency: *frequency,
                phase: *phase,
            },
            Shape::Samples(s) => Shape::Samples(SampledShape {
                values: s.values.iter().map(|v| v * k).collect(),
                ..s.clone()
            }),
            Shape::Chebyshev(c) => Shape::Chebyshev(ChebyshevShape {
                values: c.values.iter().map(|v| v * k).collect(),
                ..c.clone()
            }),
            Shape::Sum(parts) => Shape::Sum(parts.iter().map(|s| s.scaled(k)).collect()),
        }
    }

    /// Kinks of the shape itself (sample nodes), for quadrature splitting.
    /// Dense sample sets are left alone.
    fn interior_breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            Shape::Samples(s) if s.values.len() <= 65 => out.extend(s.nodes()),
            Shape::Sum(parts) => parts.iter().for_each(|p| p.interior_breakpoints(out)),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub shape: Shape,
}

impl Segment {
    pub fn new(start: f64, end: f64, shape: Shape) -> Self {
        Self { start, end, shape }
    }
}

/// A function on `[0, π]` given by consecutive segments `[x₀, x₁)`; the last
/// segment also owns `π`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseFunction {
    segments: Vec<Segment>,
}

const COVER_TOL: f64 = 1e-12;

impl PiecewiseFunction {
    /// Requires the segments to tile `[0, π]` exactly.
    pub fn new(mut segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidFunction("no segments".into()));
        }
        segments.sort_by(|a, b| a.start.total_cmp(&b.start));
        for s in &segments {
            if !(s.start.is_finite() && s.end.is_finite() && s.end > s.start) {
                return Err(Error::InvalidFunction(format!(
                    "segment [{}, {}) is empty or not finite",
                    s.start, s.end
                )));
            }
        }
        if segments[0].start.abs() > COVER_TOL {
            return Err(Error::InvalidFunction(format!(
                "segments start at {} instead of 0",
                segments[0].start
            )));
        }
        for w in segments.windows(2) {
            let gap = w[1].start - w[0].end;
            if gap > COVER_TOL {
                return Err(Error::InvalidFunction(format!(
                    "gap between {} and {}",
                    w[0].end, w[1].start
                )));
            }
            if gap < -COVER_TOL {
                return Err(Error::InvalidFunction(format!(
                    "segments overlap on [{}, {})",
                    w[1].start, w[0].end
                )));
            }
        }
        let last = segments.last().expect("non-empty");
        if (last.end - PI).abs() > COVER_TOL {
            return Err(Error::InvalidFunction(format!(
                "segments end at {} instead of π",
                last.end
            )));
        }
        // Snap the joins so the tiling is exact.
        segments[0].start = 0.0;
        for i in 1..segments.len() {
            segments[i].start = segments[i - 1].end;
        }
        segments.last_mut().expect("non-empty").end = PI;
        Ok(Self { segments })
    }

    /// Builds a function from the listed segments, treating uncovered parts
    /// of `[0, π]` as zero. Overlaps are still an error.
    pub fn from_sparse(mut segments: Vec<Segment>) -> Result<Self> {
        segments.sort_by(|a, b| a.start.total_cmp(&b.start));
        let mut filled = Vec::with_capacity(2 * segments.len() + 1);
        let mut cursor = 0.0;
        for s in segments {
            if s.start < -COVER_TOL || s.end > PI + COVER_TOL {
                return Err(Error::InvalidFunction(format!(
                    "segment [{}, {}) leaves [0, π]",
                    s.start, s.end
                )));
            }
            if s.start > cursor + COVER_TOL {
                filled.push(Segment::new(cursor, s.start, Shape::Zero));
            } else if s.start < cursor - COVER_TOL {
                return Err(Error::InvalidFunction(format!(
                    "segments overlap on [{}, {})",
                    s.start, cursor
                )));
            }
            cursor = s.end;
            filled.push(s);
        }
        if cursor < PI - COVER_TOL {
            filled.push(Segment::new(cursor, PI, Shape::Zero));
        }
        Self::new(filled)
    }

    pub fn zero() -> Self {
        Self {
            segments: vec![Segment::new(0.0, PI, Shape::Zero)],
        }
    }

    /// `shape` on `[start, end)` and zero elsewhere.
    pub fn single(start: f64, end: f64, shape: Shape) -> Result<Self> {
        Self::from_sparse(vec![Segment::new(start, end, shape)])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn eval(&self, x: f64) -> Result<C64> {
        if !(0.0..=PI).contains(&x) {
            return Err(Error::OutOfDomain { x });
        }
        Ok(self.value(x))
    }

    /// Value using the right-open convention; no domain check.
    pub fn value(&self, x: f64) -> C64 {
        let i = self.segments.partition_point(|s| s.start <= x).max(1) - 1;
        self.segments[i].shape.eval(x)
    }

    /// Limit from the left at `x`.
    pub fn value_left(&self, x: f64) -> C64 {
        let i = self.segments.partition_point(|s| s.start < x).max(1) - 1;
        self.segments[i].shape.eval(x)
    }

    /// Segment boundaries (and kinks of sparse sample shapes).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for s in &self.segments {
            out.push(s.start);
            s.shape.interior_breakpoints(&mut out);
        }
        out.push(PI);
        out.retain(|&b| (0.0..=PI).contains(&b));
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// True when every segment meeting `(lo, hi)` in a set of positive
    /// length is identically zero.
    pub fn is_zero_on(&self, lo: f64, hi: f64) -> bool {
        self.segments
            .iter()
            .filter(|s| s.end.min(hi) - s.start.max(lo) > 0.0)
            .all(|s| s.shape.is_identically_zero())
    }

    /// Hull of the non-zero segments, `None` for the zero function.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut it = self
            .segments
            .iter()
            .filter(|s| !s.shape.is_identically_zero());
        let first = it.next()?;
        let (lo, mut hi) = (first.start, first.end);
        for s in it {
            hi = s.end;
        }
        Some((lo, hi))
    }

    /// First non-zero segment overlapping `(lo, hi)`, if any.
    pub fn offending_segment(&self, lo: f64, hi: f64) -> Option<&Segment> {
        self.segments
            .iter()
            .filter(|s| s.end.min(hi) - s.start.max(lo) > 0.0)
            .find(|s| !s.shape.is_identically_zero())
    }

    pub fn is_real(&self) -> bool {
        self.segments.iter().all(|s| s.shape.is_real())
    }

    pub fn scaled(&self, k: C64) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| Segment::new(s.start, s.end, s.shape.scaled(k)))
                .collect(),
        }
    }

    /// Pointwise sum on the common refinement of both segmentations.
    pub fn sum(&self, other: &PiecewiseFunction) -> Self {
        let mut cuts: Vec<f64> = self
            .segments
            .iter()
            .chain(&other.segments)
            .map(|s| s.start)
            .collect();
        cuts.push(PI);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let shape_at = |f: &PiecewiseFunction, x: f64| {
            let i = f.segments.partition_point(|s| s.start <= x).max(1) - 1;
            f.segments[i].shape.clone()
        };
        let segments = cuts
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let (a, b) = (shape_at(self, mid), shape_at(other, mid));
                let shape = match (a.is_identically_zero(), b.is_identically_zero()) {
                    (true, true) => Shape::Zero,
                    (false, true) => a,
                    (true, false) => b,
                    (false, false) => Shape::Sum(vec![a, b]),
                };
                Segment::new(w[0], w[1], shape)
            })
            .collect();
        Self { segments }
    }
}

/// The pair `(p, q)` defining `Q(x) = [[p, q], [q, −p]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialPair {
    p: PiecewiseFunction,
    q: PiecewiseFunction,
}

impl PotentialPair {
    /// Validates that both components vanish on `(0, a)`.
    pub fn new(p: PiecewiseFunction, q: PiecewiseFunction, cfg: &DelayConfig) -> Result<Self> {
        for (name, f) in [("p", &p), ("q", &q)] {
            if let Some(seg) = f.offending_segment(0.0, cfg.a()) {
                return Err(Error::InvalidPotential(format!(
                    "{name} must vanish on (0, a) = (0, {}), but segment [{}, {}) is non-zero",
                    cfg.a(),
                    seg.start,
                    seg.end
                )));
            }
        }
        Ok(Self { p, q })
    }

    pub fn zero() -> Self {
        Self {
            p: PiecewiseFunction::zero(),
            q: PiecewiseFunction::zero(),
        }
    }

    pub fn p(&self) -> &PiecewiseFunction {
        &self.p
    }

    pub fn q(&self) -> &PiecewiseFunction {
        &self.q
    }

    pub fn eval(&self, x: f64) -> Result<(C64, C64)> {
        Ok((self.p.eval(x)?, self.q.eval(x)?))
    }

    pub(crate) fn value(&self, x: f64) -> (C64, C64) {
        (self.p.value(x), self.q.value(x))
    }

    pub(crate) fn value_left(&self, x: f64) -> (C64, C64) {
        (self.p.value_left(x), self.q.value_left(x))
    }

    pub fn matrix(&self, x: f64) -> Mat2 {
        let (p, q) = self.value(x);
        Mat2::potential(p, q)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.p.breakpoints();
        b.extend(self.q.breakpoints());
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    pub fn is_zero_on(&self, lo: f64, hi: f64) -> bool {
        self.p.is_zero_on(lo, hi) && self.q.is_zero_on(lo, hi)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.support().is_none()
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        match (self.p.support(), self.q.support()) {
            (None, None) => None,
            (Some(s), None) | (None, Some(s)) => Some(s),
            (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
        }
    }

    pub fn is_real(&self) -> bool {
        self.p.is_real() && self.q.is_real()
    }

    pub fn sum(&self, other: &PotentialPair) -> PotentialPair {
        PotentialPair {
            p: self.p.sum(&other.p),
            q: self.q.sum(&other.q),
        }
    }
}

pub fn eval_potential(pp: &PotentialPair, x: f64) -> Result<(C64, C64)> {
    pp.eval(x)
}

// ---------------------------------------------------------------------------
// JSON form

/// A complex number in JSON: a bare number, `[re, im]` or `{"re":…, "im":…}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Pair([f64; 2]),
    Parts { re: f64, im: f64 },
}

impl From<ComplexSpec> for C64 {
    fn from(c: ComplexSpec) -> C64 {
        match c {
            ComplexSpec::Real(re) => C64::new(re, 0.0),
            ComplexSpec::Pair([re, im]) => C64::new(re, im),
            ComplexSpec::Parts { re, im } => C64::new(re, im),
        }
    }
}

impl From<C64> for ComplexSpec {
    fn from(c: C64) -> ComplexSpec {
        if c.im == 0.0 {
            ComplexSpec::Real(c.re)
        } else {
            ComplexSpec::Pair([c.re, c.im])
        }
    }
}

/// One segment of a piecewise function as it appears in JSON, e.g.
/// `{"from": 1.5, "to": 2.0, "shape": "cosine", "amplitude": 1, "frequency": 3, "phase": 0}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SegmentSpec {
    pub from: f64,
    pub to: f64,
    #[serde(flatten)]
    pub shape: ShapeSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ShapeSpec {
    Zero,
    Constant {
        value: ComplexSpec,
    },
    Cosine {
        amplitude: ComplexSpec,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Equally spaced samples from `from` to `to` inclusive.
    Samples { values: Vec<ComplexSpec> },
    /// Values at the Chebyshev–Lobatto points of `[from, to]`.
    Chebyshev { values: Vec<ComplexSpec> },
    /// Pointwise sum; sampled parts use the segment's interval.
    Sum { parts: Vec<ShapeSpec> },
}

impl ShapeSpec {
    fn to_shape(&self, from: f64, to: f64) -> Result<Shape> {
        let complex = |vals: &[ComplexSpec]| vals.iter().map(|&v| v.into()).collect();
        Ok(match self {
            ShapeSpec::Zero => Shape::Zero,
            ShapeSpec::Constant { value } => Shape::Constant((*value).into()),
            ShapeSpec::Cosine {
                amplitude,
                frequency,
                phase,
            } => Shape::Cosine {
                amplitude: (*amplitude).into(),
                frequency: *frequency,
                phase: *phase,
            },
            ShapeSpec::Samples { values } => {
                Shape::Samples(SampledShape::new(from, to, complex(values))?)
            }
            ShapeSpec::Chebyshev { values } => {
                Shape::Chebyshev(ChebyshevShape::new(from, to, complex(values))?)
            }
            ShapeSpec::Sum { parts } => Shape::Sum(
                parts
                    .iter()
                    .map(|p| p.to_shape(from, to))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    fn from_shape(shape: &Shape, from: f64, to: f64) -> Option<ShapeSpec> {
        let complex = |vals: &[C64]| vals.iter().map(|&v| v.into()).collect();
        Some(match shape {
            Shape::Zero => ShapeSpec::Zero,
            Shape::Constant(c) => ShapeSpec::Constant { value: (*c).into() },
            Shape::Cosine {
                amplitude,
                frequency,
                phase,
            } => ShapeSpec::Cosine {
                amplitude: (*amplitude).into(),
                frequency: *frequency,
                phase: *phase,
            },
            Shape::Samples(s) if s.lo == from && s.hi == to => ShapeSpec::Samples {
                values: complex(&s.values),
            },
            Shape::Chebyshev(c) if c.lo == from && c.hi == to => ShapeSpec::Chebyshev {
                values: complex(&c.values),
            },
            Shape::Sum(parts) => ShapeSpec::Sum {
                parts: parts
                    .iter()
                    .map(|p| ShapeSpec::from_shape(p, from, to))
                    .collect::<Option<_>>()?,
            },
            Shape::Samples(_) | Shape::Chebyshev(_) => return None,
        })
    }
}

impl SegmentSpec {
    pub fn to_segment(&self) -> Result<Segment> {
        Ok(Segment::new(
            self.from,
            self.to,
            self.shape.to_shape(self.from, self.to)?,
        ))
    }

    /// `None` when a sampled shape's node interval differs from the
    /// segment's, which JSON cannot express.
    pub fn from_segment(seg: &Segment) -> Option<SegmentSpec> {
        Some(SegmentSpec {
            from: seg.start,
            to: seg.end,
            shape: ShapeSpec::from_shape(&seg.shape, seg.start, seg.end)?,
        })
    }
}

pub fn function_from_specs(specs: &[SegmentSpec]) -> Result<PiecewiseFunction> {
    let segs = specs
        .iter()
        .map(SegmentSpec::to_segment)
        .collect::<Result<Vec<_>>>()?;
    PiecewiseFunction::from_sparse(segs)
}

/// Non-zero segments only; `None` if some segment has no JSON form.
pub fn function_to_specs(f: &PiecewiseFunction) -> Option<Vec<SegmentSpec>> {
    f.segments()
        .iter()
        .filter(|s| !matches!(s.shape, Shape::Zero))
        .map(SegmentSpec::from_segment)
        .collect()
}
