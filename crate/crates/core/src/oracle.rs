//! Independent references for testing: brute-force double integration of
//! stiffness entries, pointwise application of the nonlocal operator, and
//! exact solutions.
//!
//! Nothing here uses the distance matrices or the cubic reduction of the
//! assembly module; entries are computed straight from the hat functions.

use crate::error::{invalid, Error, Result};
use crate::kernel::Kernel;
use crate::mesh::Mesh1D;
use crate::quadrature::{graded_toward_zero, integrate_breaks, merge_breaks, GAUSS3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub max_depth: usize,
    /// Ratio between consecutive panels of the geometric grading toward
    /// `s = 0`.
    pub grading: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { rel_tol: 1e-9, max_depth: 40, grading: 0.25 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 1e-14 && self.rel_tol < 1e-3) {
            return Err(invalid("rel_tol", format!("need 1e-14 < rel_tol < 1e-3, got {}", self.rel_tol)));
        }
        if self.max_depth > 40 {
            return Err(invalid("max_depth", format!("at most 40, got {}", self.max_depth)));
        }
        if !(self.grading > 0.0 && self.grading < 1.0) {
            return Err(invalid("grading", format!("need 0 < grading < 1, got {}", self.grading)));
        }
        Ok(())
    }
}

/// Hat function of node `i` of `x`.
fn hat(x: &[f64], i: usize, t: f64) -> f64 {
    if t <= x[i - 1] || t >= x[i + 1] {
        0.0
    } else if t <= x[i] {
        (t - x[i - 1]) / (x[i] - x[i - 1])
    } else {
        (x[i + 1] - t) / (x[i + 1] - x[i])
    }
}

/// `int_R (phi_j(t+s) - phi_j(t)) (phi_k(t+s) - phi_k(t)) dt`, exact: the
/// integrand is piecewise quadratic between the nodes and the nodes shifted
/// by `-s`.
fn shifted_overlap(x: &[f64], j: usize, k: usize, s: f64) -> f64 {
    let nodes = [x[j - 1], x[j], x[j + 1], x[k - 1], x[k], x[k + 1]];
    let lo = nodes.iter().cloned().fold(f64::INFINITY, f64::min) - s;
    let hi = nodes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pts = merge_breaks(lo, hi, nodes.iter().flat_map(|&v| [v, v - s]));
    let f = |t: f64| (hat(x, j, t + s) - hat(x, j, t)) * (hat(x, k, t + s) - hat(x, k, t));
    pts.windows(2)
        .map(|w| {
            let (c, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            r * GAUSS3.iter().map(|&(g, wt)| wt * f(c + r * g)).sum::<f64>()
        })
        .sum()
}

/// `(S_delta)_jk` by nested quadrature of the defining double integral
/// (1-based interior indices).
pub fn entry_bruteforce(mesh: &Mesh1D, kernel: &Kernel, j: usize, k: usize, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !kernel.is_truncated() {
        return Err(Error::UnsupportedKernel("brute-force entries need a finite horizon".into()));
    }
    let n = mesh.interior_count();
    for i in [j, k] {
        if i == 0 || i > n {
            return Err(Error::IndexOutOfRange(format!("interior index {i} not in 1..={n}")));
        }
    }
    let x = mesh.nodes();
    let delta = kernel.delta();
    // Below the smallest gap between the nodes involved the overlap is
    // exactly c2 s^2 + c3 s^3; two samples fix it, and the kernel moments
    // integrate it over [0, s0] where direct sampling drowns in rounding.
    let mut near = [x[j - 1], x[j], x[j + 1], x[k - 1], x[k], x[k + 1]];
    near.sort_by(|p, q| p.total_cmp(q));
    let gap = near.windows(2).map(|w| w[1] - w[0]).filter(|&g| g > 0.0).fold(delta, f64::min);
    let s0 = 1e-3 * gap;
    let (g1, g2) = (shifted_overlap(x, j, k, s0), shifted_overlap(x, j, k, 0.5 * s0));
    let c3 = 2.0 * (g1 - 4.0 * g2) / s0.powi(3);
    let c2 = (g1 - c3 * s0.powi(3)) / (s0 * s0);
    let head = c2 * kernel.moment(2, 0.0, s0)? + c3 * kernel.moment(3, 0.0, s0)?;
    let breaks = merge_breaks(s0, delta, graded_toward_zero(delta, spec.grading, s0 / delta));
    let f = |s: f64| kernel.eval(s) * shifted_overlap(x, j, k, s);
    let abs_tol = spec.rel_tol * 1e-6 / mesh.stats().h_min;
    let r = integrate_breaks(&f, &breaks, abs_tol, spec.rel_tol, spec.max_depth);
    if !r.converged {
        return Err(Error::QuadratureNotConverged {
            error_estimate: r.error,
            tolerance: abs_tol.max(spec.rel_tol * r.value.abs()),
        });
    }
    Ok(head + r.value)
}

/// `N_delta u(x) = int_0^delta (2u(x) - u(x+s) - u(x-s)) rho(s) ds` with `u`
/// extended by zero outside `(a, b)`.
pub fn apply_nonlocal(u: &dyn Fn(f64) -> f64, kernel: &Kernel, x: f64, domain: (f64, f64)) -> Result<f64> {
    apply_nonlocal_with_kinks(u, kernel, x, domain, &[])
}

/// As [`apply_nonlocal`], with extra points where `u` is not smooth; the
/// `s`-integral is split where `x +- s` crosses them.
pub fn apply_nonlocal_with_kinks(
    u: &dyn Fn(f64) -> f64,
    kernel: &Kernel,
    x: f64,
    domain: (f64, f64),
    kinks: &[f64],
) -> Result<f64> {
    let (a, b) = domain;
    if !(x >= a && x <= b) {
        return Err(invalid("x", format!("{x} outside [{a}, {b}]")));
    }
    if !kernel.is_truncated() {
        return Err(Error::UnsupportedKernel("pointwise application needs a finite horizon".into()));
    }
    let delta = kernel.delta();
    let ext = |t: f64| if t > a && t < b { u(t) } else { 0.0 };
    let ux = ext(x);
    let second_difference = |s: f64| 2.0 * ux - ext(x + s) - ext(x - s);
    let integrand = |s: f64| second_difference(s) * kernel.eval(s);
    let crossings: Vec<f64> = [x - a, b - x]
        .into_iter()
        .chain(kinks.iter().map(|&k| (k - x).abs()))
        .filter(|&v| v > 0.0 && v < delta)
        .collect();
    let first = crossings.iter().cloned().fold(delta, f64::min);
    // Near s = 0 the second difference drowns in rounding noise that the
    // singular kernel amplifies, so [0, s0] uses its leading power instead:
    // s^2 where u is smooth at x, s where x is a kink or an endpoint.
    let smooth = x > a && x < b && !kinks.contains(&x);
    let (power, s0): (u32, f64) = if smooth { (2, first * 1e-3) } else { (1, first * 1e-8) };
    let head = second_difference(s0) / s0.powi(power as i32) * kernel.moment(power, 0.0, s0)?;
    // grade toward s0, then double the panel width out to the horizon so a
    // long power-law tail is not one panel
    let mut doubling = Vec::new();
    let mut s = first;
    while s < delta {
        s *= 2.0;
        doubling.push(s);
    }
    let breaks = merge_breaks(
        s0,
        delta,
        graded_toward_zero(first, 0.25, s0 / first).into_iter().chain(crossings).chain(doubling),
    );
    // the second difference carries rounding of order eps * |u|, which the
    // kernel mass beyond s0 turns into an absolute accuracy limit
    let u_scale = [x, x - first, x + first, x - delta, x + delta, 0.5 * (a + b)]
        .into_iter()
        .map(|t| ext(t).abs())
        .fold(0.0, f64::max);
    let abs_tol = 1e-13f64.max(8.0 * f64::EPSILON * u_scale * kernel.moment(0, s0, delta)?);
    let r = integrate_breaks(&integrand, &breaks, abs_tol, 1e-11, 45);
    if !r.converged {
        return Err(Error::QuadratureNotConverged { error_estimate: r.error, tolerance: abs_tol.max(1e-11 * r.value.abs()) });
    }
    Ok(head + r.value)
}

/// `C(alpha) = 2^{-alpha} sqrt(pi) / (Gamma((1+alpha)/2) Gamma(1+alpha/2))`.
pub fn fractional_poisson_constant(alpha: f64) -> f64 {
    2f64.powf(-alpha) * std::f64::consts::PI.sqrt() / (libm::tgamma(0.5 * (1.0 + alpha)) * libm::tgamma(1.0 + 0.5 * alpha))
}

/// Solution of `(-Delta)^{alpha/2} u = 1` on `(-1, 1)`, `u = 0` outside:
/// `C(alpha) (1 - x^2)^{alpha/2}`.
pub fn exact_fractional_poisson(alpha: f64, x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    fractional_poisson_constant(alpha) * (1.0 - x * x).powf(0.5 * alpha)
}
