//! Radial interaction kernels and their closed-form moments
//! `mu_m(a, b) = int_a^b s^m rho(s) ds`, `m = 0..=3`.
//!
//! The assembler only ever contracts piecewise-cubic integrands against a
//! kernel, so moments are its whole interface to the kernel. Power-law and
//! box kernels integrate in closed form; custom kernels fall back to
//! adaptive Gauss-Kronrod.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{graded_toward_zero, integrate_breaks};

/// `m == alpha` switches to the logarithmic antiderivative below this gap.
pub const LOG_BRANCH_GAP: f64 = 1e-10;

/// Relative tolerance for custom-kernel moments.
pub const CUSTOM_MOMENT_RTOL: f64 = 1e-12;

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-facing kernel selector, mirroring the config keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `(2 - alpha) / delta^(2 - alpha) * s^(-1 - alpha)` on `(0, delta)`.
    Fractional { alpha: f64, delta: f64 },
    /// `3 / delta^3` on `(0, delta)`.
    Box { delta: f64 },
    /// `C_alpha * s^(-1 - alpha)` on `(0, inf)`; only the closed-form
    /// infinite-horizon assembler accepts it.
    FractionalInfinite { alpha: f64 },
    /// `C_alpha * s^(-1 - alpha)` cut off at `delta` (not renormalized).
    TruncatedInfinite { alpha: f64, delta: f64 },
}

#[derive(Clone)]
pub enum Kernel {
    FractionalTruncated { alpha: f64, delta: f64, constant: f64 },
    ConstantBox { delta: f64, constant: f64 },
    FractionalInfinite { alpha: f64, constant: f64 },
    TruncatedInfinite { alpha: f64, delta: f64, constant: f64 },
    Custom { delta: f64, rho: RadialFn },
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::FractionalTruncated { alpha, delta, constant } => f
                .debug_struct("FractionalTruncated")
                .field("alpha", alpha)
                .field("delta", delta)
                .field("constant", constant)
                .finish(),
            Kernel::ConstantBox { delta, constant } => f
                .debug_struct("ConstantBox")
                .field("delta", delta)
                .field("constant", constant)
                .finish(),
            Kernel::FractionalInfinite { alpha, constant } => f
                .debug_struct("FractionalInfinite")
                .field("alpha", alpha)
                .field("constant", constant)
                .finish(),
            Kernel::TruncatedInfinite { alpha, delta, constant } => f
                .debug_struct("TruncatedInfinite")
                .field("alpha", alpha)
                .field("delta", delta)
                .field("constant", constant)
                .finish(),
            Kernel::Custom { delta, .. } => f.debug_struct("Custom").field("delta", delta).finish_non_exhaustive(),
        }
    }
}

/// `C_alpha = 2^(alpha-1) alpha Gamma((1+alpha)/2) / (sqrt(pi) Gamma(1 - alpha/2))`,
/// the constant making `C_alpha |s|^(-1-alpha)` the kernel of `(-Delta)^(alpha/2)`.
pub fn fractional_laplacian_constant(alpha: f64) -> f64 {
    2f64.powf(alpha - 1.0) * alpha * libm::tgamma(0.5 * (1.0 + alpha))
        / (PI.sqrt() * libm::tgamma(1.0 - 0.5 * alpha))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("need 0 < delta < inf, got {delta}")));
    }
    Ok(())
}

fn check_alpha_open(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(invalid("alpha", format!("need 0 < alpha < 2, got {alpha}")));
    }
    Ok(())
}

pub fn make_kernel(spec: KernelSpec) -> Result<Kernel> {
    match spec {
        KernelSpec::Fractional { alpha, delta } => Kernel::fractional(alpha, delta),
        KernelSpec::Box { delta } => Kernel::constant_box(delta),
        KernelSpec::FractionalInfinite { alpha } => Kernel::fractional_infinite(alpha),
        KernelSpec::TruncatedInfinite { alpha, delta } => Kernel::truncated_infinite(alpha, delta),
    }
}

/// `C (b^e - a^e) / e` with `e = m - alpha`, stable as `e -> 0`.
fn power_moment(constant: f64, e: f64, a: f64, b: f64) -> f64 {
    if e.abs() < LOG_BRANCH_GAP {
        return constant * (b / a).ln();
    }
    if a == 0.0 {
        return constant * b.powf(e) / e;
    }
    constant * a.powf(e) * (e * (b / a).ln()).exp_m1() / e
}

impl Kernel {
    /// Normalized truncated fractional kernel, `alpha` in `[-1, 2)`.
    pub fn fractional(alpha: f64, delta: f64) -> Result<Self> {
        if !(-1.0..2.0).contains(&alpha) {
            return Err(invalid("alpha", format!("need -1 <= alpha < 2, got {alpha}")));
        }
        check_delta(delta)?;
        let k = Kernel::FractionalTruncated {
            alpha,
            delta,
            constant: (2.0 - alpha) / delta.powf(2.0 - alpha),
        };
        let m2 = k.moment(2, 0.0, delta)?;
        if (m2 - 1.0).abs() > 1e-13 {
            return Err(invalid("alpha", format!("second moment {m2} is not normalized")));
        }
        Ok(k)
    }

    pub fn constant_box(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Kernel::ConstantBox { delta, constant: 3.0 / delta.powi(3) })
    }

    pub fn fractional_infinite(alpha: f64) -> Result<Self> {
        check_alpha_open(alpha)?;
        Ok(Kernel::FractionalInfinite { alpha, constant: fractional_laplacian_constant(alpha) })
    }

    pub fn truncated_infinite(alpha: f64, delta: f64) -> Result<Self> {
        check_alpha_open(alpha)?;
        check_delta(delta)?;
        Ok(Kernel::TruncatedInfinite { alpha, delta, constant: fractional_laplacian_constant(alpha) })
    }

    /// A kernel given pointwise on `(0, delta)`. It must be nonnegative; it is
    /// not renormalized.
    pub fn custom(delta: f64, rho: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        check_delta(delta)?;
        Ok(Kernel::Custom { delta, rho: Arc::new(rho) })
    }

    /// Horizon; `f64::INFINITY` for the untruncated fractional kernel.
    pub fn delta(&self) -> f64 {
        match *self {
            Kernel::FractionalTruncated { delta, .. }
            | Kernel::ConstantBox { delta, .. }
            | Kernel::TruncatedInfinite { delta, .. }
            | Kernel::Custom { delta, .. } => delta,
            Kernel::FractionalInfinite { .. } => f64::INFINITY,
        }
    }

    /// Power-law order, if any. The box kernel is the `alpha = -1` member of
    /// the fractional family and reports it.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Kernel::FractionalTruncated { alpha, .. }
            | Kernel::FractionalInfinite { alpha, .. }
            | Kernel::TruncatedInfinite { alpha, .. } => Some(alpha),
            Kernel::ConstantBox { .. } => Some(-1.0),
            Kernel::Custom { .. } => None,
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match *self {
            Kernel::FractionalTruncated { constant, .. }
            | Kernel::ConstantBox { constant, .. }
            | Kernel::FractionalInfinite { constant, .. }
            | Kernel::TruncatedInfinite { constant, .. } => Some(constant),
            Kernel::Custom { .. } => None,
        }
    }

    pub fn is_truncated(&self) -> bool {
        !matches!(self, Kernel::FractionalInfinite { .. })
    }

    /// Closed-form (or quadrature, for custom) moments are available.
    pub fn has_moment_path(&self) -> bool {
        self.is_truncated()
    }

    /// `rho(|s|)`; zero beyond the horizon.
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.abs();
        if s > self.delta() {
            return 0.0;
        }
        match self {
            Kernel::FractionalTruncated { alpha, constant, .. }
            | Kernel::FractionalInfinite { alpha, constant }
            | Kernel::TruncatedInfinite { alpha, constant, .. } => constant * s.powf(-1.0 - alpha),
            Kernel::ConstantBox { constant, .. } => *constant,
            Kernel::Custom { rho, .. } => rho(s),
        }
    }

    /// `int_a^b s^m rho(s) ds` for `0 <= a <= b <= delta`, `m <= 3`.
    pub fn moment(&self, m: u32, a: f64, b: f64) -> Result<f64> {
        if m > 3 {
            return Err(invalid("m", format!("moments are defined for m <= 3, got {m}")));
        }
        let delta = self.delta();
        if !(a >= 0.0 && a <= b && b <= delta * (1.0 + 1e-12)) {
            return Err(invalid("interval", format!("need 0 <= a <= b <= delta, got [{a}, {b}] with delta {delta}")));
        }
        if a == b {
            return Ok(0.0);
        }
        match self {
            Kernel::FractionalTruncated { alpha, constant, .. } | Kernel::TruncatedInfinite { alpha, constant, .. } => {
                let e = m as f64 - alpha;
                if a == 0.0 && e <= LOG_BRANCH_GAP {
                    return Err(Error::DivergentMoment(format!("mu_{m}(0, {b}) diverges for alpha = {alpha}")));
                }
                Ok(power_moment(*constant, e, a, b))
            }
            Kernel::ConstantBox { constant, .. } => {
                let p = (m + 1) as i32;
                Ok(constant * (b.powi(p) - a.powi(p)) / p as f64)
            }
            Kernel::FractionalInfinite { .. } => Err(Error::UnsupportedKernel(
                "the untruncated fractional kernel has no moment path; use assemble_infinite".into(),
            )),
            Kernel::Custom { rho, .. } => {
                let f = |s: f64| s.powi(m as i32) * rho(s);
                let breaks = if a == 0.0 {
                    graded_toward_zero(b, 0.25, 1e-30)
                } else {
                    vec![a, b]
                };
                let r = integrate_breaks(&f, &breaks, 0.0, CUSTOM_MOMENT_RTOL, 50);
                if !r.converged || !r.value.is_finite() {
                    return Err(Error::QuadratureNotConverged {
                        error_estimate: r.error,
                        tolerance: CUSTOM_MOMENT_RTOL * r.value.abs(),
                    });
                }
                Ok(r.value)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::merge_breaks;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn constants() {
        let k = Kernel::fractional(0.0, 1.0).unwrap();
        assert_eq!(k.constant(), Some(2.0));
        let b = Kernel::constant_box(2.0).unwrap();
        assert_eq!(b.constant(), Some(0.375));
        assert_eq!(b.eval(1.0), 0.375);
        let inf = Kernel::fractional_infinite(1.0).unwrap();
        assert!(rel(inf.constant().unwrap(), 1.0 / PI) < 1e-14);
        assert_eq!(inf.delta(), f64::INFINITY);
    }

    #[test]
    fn fractional_laplacian_constant_values() {
        assert!((fractional_laplacian_constant(1.0) - 1.0 / PI).abs() < 1e-15);
        assert!((fractional_laplacian_constant(0.5) - 1.0 / (2.0 * (2.0 * PI).sqrt())).abs() < 1e-15);
        // vanishes like 2 - alpha at the local end
        let eps = 1e-6;
        assert!((fractional_laplacian_constant(2.0 - eps) / eps - 1.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(Kernel::fractional(2.0, 1.0), Err(Error::InvalidParameter { name: "alpha", .. })));
        assert!(matches!(Kernel::fractional(-1.5, 1.0), Err(Error::InvalidParameter { name: "alpha", .. })));
        assert!(matches!(Kernel::fractional(0.5, 0.0), Err(Error::InvalidParameter { name: "delta", .. })));
        assert!(Kernel::fractional_infinite(0.0).is_err());
        assert!(Kernel::fractional_infinite(2.0).is_err());
        assert!(Kernel::constant_box(-1.0).is_err());
    }

    #[test]
    fn moment_examples() {
        let b = Kernel::constant_box(1.0).unwrap();
        assert!((b.moment(2, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let f = Kernel::fractional(0.0, 1.0).unwrap();
        assert!((f.moment(2, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let f1 = Kernel::fractional(1.0, 1.0).unwrap();
        assert!((f1.moment(1, 0.5, 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn divergent_moments_rejected() {
        let f = Kernel::fractional(0.5, 1.0).unwrap();
        assert!(matches!(f.moment(0, 0.0, 0.5), Err(Error::DivergentMoment(_))));
        let f1 = Kernel::fractional(1.0, 1.0).unwrap();
        assert!(matches!(f1.moment(1, 0.0, 0.5), Err(Error::DivergentMoment(_))));
        // m - alpha > 0 at zero is fine
        assert!(f.moment(1, 0.0, 0.5).is_ok());
        assert!(f.moment(2, 0.0, 2.0).is_err());
        assert!(Kernel::fractional_infinite(0.5).unwrap().moment(2, 0.0, 1.0).is_err());
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Kernel::constant_box(1.0).unwrap().eval(0.5), 3.0);
        assert!((Kernel::fractional(0.5, 1.0).unwrap().eval(1.0) - 1.5).abs() < 1e-15);
        assert_eq!(Kernel::fractional(0.5, 1.0).unwrap().eval(2.0), 0.0);
        assert_eq!(Kernel::constant_box(0.3).unwrap().eval(0.6), 0.0);
    }

    #[test]
    fn log_branch_is_continuous() {
        let below = Kernel::fractional(1.0 - 1e-9, 1.0).unwrap();
        let at = Kernel::fractional(1.0, 1.0).unwrap();
        let above = Kernel::fractional(1.0 + 1e-9, 1.0).unwrap();
        let m = at.moment(1, 0.2, 0.9).unwrap();
        assert!(rel(below.moment(1, 0.2, 0.9).unwrap(), m) < 1e-8);
        assert!(rel(above.moment(1, 0.2, 0.9).unwrap(), m) < 1e-8);
    }

    #[test]
    fn custom_kernel_matches_box() {
        let delta = 0.7;
        let c = Kernel::custom(delta, move |_| 3.0 / delta.powi(3)).unwrap();
        let b = Kernel::constant_box(delta).unwrap();
        for m in 0..=3 {
            assert!(rel(c.moment(m, 0.1, 0.6).unwrap(), b.moment(m, 0.1, 0.6).unwrap()) < 1e-12);
        }
        assert!(rel(c.moment(2, 0.0, delta).unwrap(), 1.0) < 1e-12);
    }

    fn any_truncated() -> impl Strategy<Value = Kernel> {
        prop_oneof![
            (-1.0f64..1.99, 0.01f64..5.0).prop_map(|(a, d)| Kernel::fractional(a, d).unwrap()),
            (0.01f64..5.0).prop_map(|d| Kernel::constant_box(d).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn second_moment_partitions_sum_to_one(k in any_truncated(), cuts in prop::collection::vec(0.0f64..1.0, 0..12)) {
            let delta = k.delta();
            let pts = merge_breaks(0.0, delta, cuts.iter().map(|c| c * delta));
            let total: f64 = pts.windows(2).map(|w| k.moment(2, w[0], w[1]).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "total {}", total);
        }

        #[test]
        fn moments_are_additive(k in any_truncated(), m in 0u32..4, t in 0.05f64..0.95, u in 0.01f64..0.5) {
            let delta = k.delta();
            let a = u * delta * 0.5;
            let c = delta;
            let b = a + t * (c - a);
            let whole = k.moment(m, a, c).unwrap();
            let parts = k.moment(m, a, b).unwrap() + k.moment(m, b, c).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-13 * whole.abs().max(1e-300) + 1e-300);
        }

        #[test]
        fn closed_form_matches_quadrature(k in any_truncated(), m in 0u32..4, lo in 0.01f64..0.9, w in 0.01f64..1.0) {
            let delta = k.delta();
            let a = lo * delta;
            let b = a + w * (delta - a);
            let closed = k.moment(m, a, b).unwrap();
            let kk = k.clone();
            let r = integrate_breaks(&|s: f64| s.powi(m as i32) * kk.eval(s), &[a, b], 0.0, 1e-13, 40);
            prop_assert!((closed - r.value).abs() <= 1e-10 * closed.abs(), "{} vs {}", closed, r.value);
        }
    }
}
