//! Barycentric interpolation on Chebyshev–Lobatto points.

use std::f64::consts::PI;
use std::ops::{AddAssign, Mul};

/// Chebyshev–Lobatto points of `[lo, hi]`, in ascending order.
pub fn lobatto_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two Chebyshev points");
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else {
                mid - half * (PI * k as f64 / (n - 1) as f64).cos()
            }
        })
        .collect()
}

fn weight(k: usize, n: usize) -> f64 {
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    if k == 0 || k == n - 1 {
        0.5 * sign
    } else {
        sign
    }
}

/// Evaluates the interpolant through `values` (given at [`lobatto_nodes`])
/// at `x`.
pub fn interpolate<T>(lo: f64, hi: f64, values: &[T], x: f64) -> T
where
    T: Copy + Default + AddAssign + Mul<f64, Output = T>,
{
    let n = values.len();
    let nodes = lobatto_nodes(lo, hi, n);
    interpolate_with_nodes(&nodes, values, x)
}

pub(crate) fn interpolate_with_nodes<T>(nodes: &[f64], values: &[T], x: f64) -> T
where
    T: Copy + Default + AddAssign + Mul<f64, Output = T>,
{
    let n = values.len();
    let mut num = T::default();
    let mut den = 0.0;
    for k in 0..n {
        let d = x - nodes[k];
        if d == 0.0 {
            return values[k];
        }
        let w = weight(k, n) / d;
        num += values[k] * w;
        den += w;
    }
    num * (1.0 / den)
}

/// Lagrange basis values `ℓ_k(x)` for all `k`.
pub fn basis(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    let mut out = vec![0.0; n];
    if let Some(k) = nodes.iter().position(|&t| t == x) {
        out[k] = 1.0;
        return out;
    }
    let mut den = 0.0;
    for k in 0..n {
        let w = weight(k, n) / (x - nodes[k]);
        out[k] = w;
        den += w;
    }
    for v in &mut out {
        *v /= den;
    }
    out
}

/// Clenshaw–Curtis weights for the Lobatto points of `[lo, hi]`.
pub fn clenshaw_curtis_weights(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    // Standard construction (Trefethen, "Spectral Methods in MATLAB", clencurt),
    // with nodes ordered ascending.
    let big_n = n - 1;
    let mut w = vec![0.0; n];
    let theta: Vec<f64> = (0..n).map(|k| PI * k as f64 / big_n as f64).collect();
    let nf = big_n as f64;
    if big_n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[big_n] = w[0];
        for k in 1..big_n {
            let mut v = 1.0;
            for j in 1..big_n / 2 {
                v -= 2.0 * (2.0 * j as f64 * theta[k]).cos() / (4.0 * (j * j) as f64 - 1.0);
            }
            v -= (nf * theta[k]).cos() / (nf * nf - 1.0);
            w[k] = 2.0 * v / nf;
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[big_n] = w[0];
        for k in 1..big_n {
            let mut v = 1.0;
            for j in 1..=(big_n - 1) / 2 {
                v -= 2.0 * (2.0 * j as f64 * theta[k]).cos() / (4.0 * (j * j) as f64 - 1.0);
            }
            w[k] = 2.0 * v / nf;
        }
    }
    let half = 0.5 * (hi - lo);
    w.iter().map(|x| x * half).collect()
}
