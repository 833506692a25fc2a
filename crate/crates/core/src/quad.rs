//! Thin wrappers over the quadrature crates: an adaptive double-exponential
//! integrator with interval bisection on failure, and fixed Gauss–Legendre
//! panels mapped onto arbitrary intervals.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 14;

/// Adaptive integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    bisect(f, a, b, tol, 0)
}

fn bisect<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let out = quadrature::integrate(f, a, b, tol);
    if out.error_estimate <= tol && out.integral.is_finite() {
        return Ok(out.integral);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature {
            a,
            b,
            estimate: out.error_estimate,
            context: String::new(),
        });
    }
    let mid = 0.5 * (a + b);
    Ok(bisect(f, a, mid, 0.5 * tol, depth + 1)? + bisect(f, mid, b, 0.5 * tol, depth + 1)?)
}

/// Integral over `[a, b]` split at every interior breakpoint.
pub fn integrate_split<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    let pieces = cuts.len() + 1;
    let mut lo = a;
    let mut total = 0.0;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        total += integrate(f, lo, hi, tol / pieces as f64)?;
        lo = hi;
    }
    Ok(total)
}

/// Gauss–Legendre nodes and weights on `[a, b]`, `n` nodes per panel and one
/// panel per consecutive pair of `edges`.
pub fn legendre_panels(n: usize, edges: &[f64]) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
    let mut out = Vec::with_capacity(n * edges.len().saturating_sub(1));
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for &(x, wt) in &rule {
            out.push((mid + half * x, half * wt));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let v = integrate(&|x: f64| x.sqrt(), 0.0, 4.0, 1e-12).unwrap();
        assert!((v - 16.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn split_at_kink() {
        let f = |x: f64| (x - 1.0).abs();
        let v = integrate_split(&f, 0.0, 3.0, &[1.0], 1e-12).unwrap();
        assert!((v - 2.5).abs() < 1e-11);
    }

    #[test]
    fn panels_integrate_polynomials_exactly() {
        let nodes = legendre_panels(4, &[0.0, 1.0, 3.0]);
        assert_eq!(nodes.len(), 8);
        let v: f64 = nodes.iter().map(|&(x, w)| w * x.powi(5)).sum();
        assert!((v - 729.0 / 6.0).abs() < 1e-10);
    }
}
