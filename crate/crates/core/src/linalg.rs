//! Two-component complex vectors and 2×2 complex matrices.
//!
//! Everything in the Dirac system is 2×2, so a pair of fixed-size types is
//! lighter than pulling a general matrix type through the hot loops.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CVec2 {
    pub s1: C64,
    pub s2: C64,
}

impl CVec2 {
    pub const ZERO: CVec2 = CVec2 {
        s1: C64::new(0.0, 0.0),
        s2: C64::new(0.0, 0.0),
    };

    pub fn new(s1: C64, s2: C64) -> Self {
        Self { s1, s2 }
    }

    pub fn is_finite(&self) -> bool {
        self.s1.is_finite() && self.s2.is_finite()
    }

    /// Max-norm of the two components.
    pub fn norm_inf(&self) -> f64 {
        self.s1.norm().max(self.s2.norm())
    }

    pub fn as_tuple(&self) -> (C64, C64) {
        (self.s1, self.s2)
    }
}

impl Add for CVec2 {
    type Output = CVec2;
    fn add(self, o: CVec2) -> CVec2 {
        CVec2::new(self.s1 + o.s1, self.s2 + o.s2)
    }
}

impl AddAssign for CVec2 {
    fn add_assign(&mut self, o: CVec2) {
        self.s1 += o.s1;
        self.s2 += o.s2;
    }
}

impl Sub for CVec2 {
    type Output = CVec2;
    fn sub(self, o: CVec2) -> CVec2 {
        CVec2::new(self.s1 - o.s1, self.s2 - o.s2)
    }
}

impl Neg for CVec2 {
    type Output = CVec2;
    fn neg(self) -> CVec2 {
        CVec2::new(-self.s1, -self.s2)
    }
}

impl Mul<f64> for CVec2 {
    type Output = CVec2;
    fn mul(self, k: f64) -> CVec2 {
        CVec2::new(self.s1 * k, self.s2 * k)
    }
}

impl Mul<C64> for CVec2 {
    type Output = CVec2;
    fn mul(self, k: C64) -> CVec2 {
        CVec2::new(self.s1 * k, self.s2 * k)
    }
}

/// Row-major 2×2 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Mat2([[one, zero], [zero, one]])
    }

    /// The potential matrix `[[p, q], [q, -p]]`.
    pub fn potential(p: C64, q: C64) -> Self {
        Mat2([[p, q], [q, -p]])
    }

    /// `exp(λ θ J)` with `J = [[0, -1], [1, 0]]`, i.e. the free propagator
    /// over a distance `θ`.
    pub fn rotation(lambda: C64, theta: f64) -> Self {
        let arg = lambda * theta;
        let (s, c) = (arg.sin(), arg.cos());
        Mat2([[c, -s], [s, c]])
    }

    pub fn mul_vec(&self, v: CVec2) -> CVec2 {
        let m = &self.0;
        CVec2::new(
            m[0][0] * v.s1 + m[0][1] * v.s2,
            m[1][0] * v.s1 + m[1][1] * v.s2,
        )
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.0[row][col]
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        let mut r = [[C64::new(0.0, 0.0); 2]; 2];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(r)
    }
}

/// The unperturbed solution `S₀(x, λ) = (sin λx, −cos λx)`.
pub fn free_solution(lambda: C64, x: f64) -> CVec2 {
    let arg = lambda * x;
    CVec2::new(arg.sin(), -arg.cos())
}
