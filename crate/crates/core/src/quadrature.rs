//! Adaptive Gauss-Kronrod (7/15) integration and fixed Gauss-Legendre rules.
//!
//! Used for custom kernels, the brute-force oracle and the manufactured
//! forcings. The semi-analytic assembly for power-law and box kernels never
//! goes through here.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Two-point Gauss-Legendre abscissae on [-1, 1] (weights 1).
pub const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Three-point Gauss-Legendre rule on [-1, 1] as (abscissa, weight).
pub const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Single G7/K15 panel: returns (Kronrod value, |Kronrod - Gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let (v, e, _) = gk15_abs(f, a, b);
    (v, e)
}

/// As [`gk15`], also returning the Kronrod estimate of `int |f|`.
fn gk15_abs<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs = fc.abs() * WGK[7];
    for i in 0..7 {
        let dx = r * XGK[i];
        let (fl, fr) = (f(c - dx), f(c + dx));
        k += WGK[i] * (fl + fr);
        abs += WGK[i] * (fl.abs() + fr.abs());
        if i % 2 == 1 {
            g += WG[i / 2] * (fl + fr);
        }
    }
    (k * r, ((k - g) * r).abs(), abs * r.abs())
}

/// Hard cap on panels per call; reaching it reports non-convergence.
pub const MAX_PANELS: usize = 200_000;

/// Rounding floor of a panel relative to `int |f|` over it.
const NOISE_FACTOR: f64 = 50.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub panels: usize,
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    noise: f64,
    depth: usize,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive integration over consecutive breakpoints.
///
/// `breaks` must be sorted; each gap becomes an initial panel. Panels are
/// bisected largest-error-first until the summed estimate drops below
/// `max(abs_tol, rel_tol * |value|)` or below the rounding floor of the
/// integrand, or until no panel can be refined (depth `max_depth`, error at
/// rounding level, or [`MAX_PANELS`] reached).
pub fn integrate_breaks<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_depth: usize,
) -> QuadResult {
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    let mut panels = 0usize;
    let mut noise = 0.0;
    let push = |heap: &mut BinaryHeap<Panel>, a: f64, b: f64, depth: usize, value: &mut f64, error: &mut f64, noise: &mut f64| {
        let (v, e, abs) = gk15_abs(f, a, b);
        *value += v;
        *error += e;
        *noise += NOISE_FACTOR * abs;
        // a panel whose error is at rounding level cannot improve
        if e > NOISE_FACTOR * abs {
            heap.push(Panel { a, b, value: v, error: e, noise: NOISE_FACTOR * abs, depth });
        }
    };
    for w in breaks.windows(2) {
        if !(w[1] > w[0]) {
            continue;
        }
        push(&mut heap, w[0], w[1], 0, &mut value, &mut error, &mut noise);
        panels += 1;
    }
    // panels that cannot be refined leave the heap but stay in the totals
    let mut exhausted = false;
    loop {
        let target = abs_tol.max(rel_tol * value.abs()).max(noise);
        if error <= target {
            break;
        }
        if panels >= MAX_PANELS {
            exhausted = true;
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if worst.depth >= max_depth || !(mid > worst.a && mid < worst.b) {
            continue;
        }
        value -= worst.value;
        error -= worst.error;
        noise -= worst.noise;
        push(&mut heap, worst.a, mid, worst.depth + 1, &mut value, &mut error, &mut noise);
        push(&mut heap, mid, worst.b, worst.depth + 1, &mut value, &mut error, &mut noise);
        panels += 2;
    }
    let error = error.max(0.0);
    let target = abs_tol.max(rel_tol * value.abs()).max(noise);
    QuadResult { value, error, converged: !exhausted && error <= target, panels }
}

/// Breakpoints `0 < ... < b` refined geometrically toward zero: the first
/// panel is `[b*ratio, b]`, the next `[b*ratio^2, b*ratio]`, down to width
/// `b * floor`. The leftover `[0, b*ratio^K]` is returned as the leading
/// panel so callers may integrate or drop it.
pub fn graded_toward_zero(b: f64, ratio: f64, floor: f64) -> Vec<f64> {
    debug_assert!(ratio > 0.0 && ratio < 1.0);
    let mut pts = vec![b];
    let mut x = b;
    while x > b * floor {
        x *= ratio;
        pts.push(x);
    }
    pts.push(0.0);
    pts.reverse();
    pts
}

/// Merge, sort and deduplicate breakpoints, clipping to `[lo, hi]`.
pub fn merge_breaks(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = extra.into_iter().filter(|&x| x > lo && x < hi).collect();
    v.push(lo);
    v.push(hi);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk15_is_exact_for_polynomials() {
        let (v, e) = gk15(&|x: f64| x.powi(9) - 3.0 * x * x + 1.0, -1.0, 2.0);
        let exact = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-12);
        assert!(e < 1e-10);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let breaks = graded_toward_zero(1.0, 0.25, 1e-30);
        let r = integrate_breaks(&|x: f64| x.powf(-0.5), &breaks, 0.0, 1e-12, 40);
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let r = integrate_breaks(&|x: f64| (x - 0.3).abs().powi(3), &[0.0, 1.0], 0.0, 1e-13, 40);
        let exact = (0.3f64.powi(4) + 0.7f64.powi(4)) / 4.0;
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn rounding_noise_does_not_explode_the_panel_count() {
        // the cancellation noise of (1 + x) - 1 - x is far above the 1e-300
        // tolerance; refinement must stop at the rounding floor
        let f = |x: f64| 1e8 * ((1.0 + x) - 1.0 - x) + 1.0;
        let r = integrate_breaks(&f, &[0.0, 1.0], 1e-300, 0.0, 60);
        assert!(r.panels < MAX_PANELS);
        assert!((r.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gauss_rules_integrate_exactly() {
        // two-point: cubic
        let two: f64 = GAUSS2.iter().map(|&x| x.powi(3) + x * x).sum();
        assert!((two - 2.0 / 3.0).abs() < 1e-15);
        // three-point: quintic
        let three: f64 = GAUSS3.iter().map(|&(x, w)| w * (x.powi(4) + x.powi(5))).sum();
        assert!((three - 0.4).abs() < 1e-15);
    }
}
