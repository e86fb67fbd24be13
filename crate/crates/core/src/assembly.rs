//! Stiffness and mass matrices for continuous P1 elements.
//!
//! For interior nodes `j, k` the stiffness entry is
//!
//! ```text
//! S_jk = int_0^delta  c_j g(D_jk; s) c_k^T  rho(s) ds,
//! g(z; s) = -(|z+s|^3 - 2|z|^3 + |z-s|^3) / 12,
//! ```
//!
//! with `c_j = (1/h_j, -1/h_j - 1/h_{j+1}, 1/h_{j+1})` and
//! `D_jk[r][c] = |x_{j-1+r} - x_{k-1+c}|`. The integrand is a cubic in `s`
//! between consecutive distances in `D_jk`, so each entry is a short sum of
//! kernel moments. Indices `j, k` in the public API are 1-based interior
//! node numbers; matrix rows are 0-based (`row = j - 1`).

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::kernel::Kernel;
use crate::linalg::SymMatrix;
use crate::mesh::Mesh1D;
use crate::quadrature::GAUSS2;

/// Second-difference weights and pairwise node distances for one entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalGeometry {
    pub cj: [f64; 3],
    pub ck: [f64; 3],
    pub d: [[f64; 3]; 3],
}

/// `g(z; s)` with both branches resolved.
pub fn g_eval(z: f64, s: f64) -> f64 {
    let z = z.abs();
    if s <= z {
        -0.5 * z * s * s
    } else {
        -(s * s * s + 3.0 * s * z * z - z * z * z) / 6.0
    }
}

fn stencil(nodes: &[f64], j: usize) -> [f64; 3] {
    let a = 1.0 / (nodes[j] - nodes[j - 1]);
    let b = 1.0 / (nodes[j + 1] - nodes[j]);
    [a, -a - b, b]
}

fn check_index(mesh: &Mesh1D, j: usize) -> Result<()> {
    let n = mesh.interior_count();
    if j == 0 || j > n {
        return Err(Error::IndexOutOfRange(format!("interior index {j} not in 1..={n}")));
    }
    Ok(())
}

pub fn local_geometry(mesh: &Mesh1D, j: usize, k: usize) -> Result<LocalGeometry> {
    check_index(mesh, j)?;
    check_index(mesh, k)?;
    Ok(geometry(mesh.nodes(), j, k))
}

fn geometry(x: &[f64], j: usize, k: usize) -> LocalGeometry {
    let mut d = [[0.0; 3]; 3];
    for (r, row) in d.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (x[j - 1 + r] - x[k - 1 + c]).abs();
        }
    }
    LocalGeometry { cj: stencil(x, j), ck: stencil(x, k), d }
}

/// Contracts `c_j g(D; s) c_k^T` against the kernel.
///
/// `ordered` means every distance is `x_{k-1+c} - x_{j-1+r} >= 0`
/// (`k >= j + 2`); then `I(s) = (1/6) sum w (d - s)_+^3` vanishes outside
/// `[min d, max d]`. For every entry, `I` is constant beyond `max d` since
/// `c` annihilates affine functions, so the `s` and `s^3` terms drop there.
fn contract(kernel: &Kernel, geo: &LocalGeometry, ordered: bool) -> Result<f64> {
    let delta = kernel.delta();
    let mut w = [0.0; 9];
    let mut d = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            w[3 * r + c] = geo.cj[r] * geo.ck[c];
            d[3 * r + c] = geo.d[r][c];
        }
    }
    let dmax = d.iter().cloned().fold(0.0, f64::max);
    let (lo, hi) = if ordered {
        (d.iter().cloned().fold(f64::INFINITY, f64::min), dmax.min(delta))
    } else {
        (0.0, delta)
    };
    if lo >= hi {
        return Ok(0.0);
    }
    let mut breaks = Vec::with_capacity(11);
    breaks.push(lo);
    breaks.extend(d.iter().cloned().filter(|&v| v > lo && v < hi));
    breaks.push(hi);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();

    let mut total = 0.0;
    for pq in breaks.windows(2) {
        let (p, q) = (pq[0], pq[1]);
        let mid = 0.5 * (p + q);
        let tail = mid > dmax;
        let mut coef = [0.0; 4];
        for i in 0..9 {
            let (wi, di) = (w[i], d[i]);
            if mid < di {
                coef[2] -= 0.5 * wi * di;
            } else {
                coef[0] += wi * di * di * di / 6.0;
                if !tail {
                    coef[1] -= 0.5 * wi * di * di;
                    coef[3] -= wi / 6.0;
                }
            }
        }
        for (m, &cm) in coef.iter().enumerate() {
            if cm != 0.0 {
                total += cm * kernel.moment(m as u32, p, q)?;
            }
        }
    }
    Ok(total)
}

fn require_moments(kernel: &Kernel) -> Result<()> {
    if !kernel.has_moment_path() {
        return Err(Error::UnsupportedKernel(
            "the untruncated fractional kernel needs assemble_infinite".into(),
        ));
    }
    Ok(())
}

fn entry_unchecked(x: &[f64], kernel: &Kernel, j: usize, k: usize) -> Result<f64> {
    let (j, k) = if j <= k { (j, k) } else { (k, j) };
    if k >= j + 2 && x[k - 1] - x[j + 1] >= kernel.delta() {
        return Ok(0.0);
    }
    contract(kernel, &geometry(x, j, k), k >= j + 2)
}

/// One stiffness entry `(S_delta)_jk`, 1-based interior indices.
pub fn assemble_entry(mesh: &Mesh1D, kernel: &Kernel, j: usize, k: usize) -> Result<f64> {
    require_moments(kernel)?;
    check_index(mesh, j)?;
    check_index(mesh, k)?;
    entry_unchecked(mesh.nodes(), kernel, j, k)
}

/// Largest `k - j` with a nonzero entry in row `j` (1-based).
fn row_reach(x: &[f64], n: usize, delta: f64, j: usize) -> usize {
    let mut k = (j + 1).min(n);
    while k < n && x[k] - x[j + 1] < delta {
        k += 1;
    }
    k - j
}

/// Full `S_delta` for a truncated kernel, banded when the band is narrow.
pub fn assemble(mesh: &Mesh1D, kernel: &Kernel) -> Result<SymMatrix> {
    require_moments(kernel)?;
    let x = mesh.nodes();
    let n = mesh.interior_count();
    let delta = kernel.delta();
    let reach: Vec<usize> = (1..=n).map(|j| row_reach(x, n, delta, j)).collect();
    let bw = reach.iter().cloned().max().unwrap_or(0);
    let rows: Vec<Vec<f64>> = (1..=n)
        .into_par_iter()
        .map(|j| (j..=j + reach[j - 1]).map(|k| entry_unchecked(x, kernel, j, k)).collect())
        .collect::<Result<_>>()?;
    let mut s = SymMatrix::zeros(n, bw);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            s.set(i, i + off, v);
        }
    }
    Ok(s)
}

/// Tridiagonal stiffness matrix of `-u''`.
pub fn assemble_local(mesh: &Mesh1D) -> SymMatrix {
    let h = mesh.element_sizes();
    let n = mesh.interior_count();
    let diag: Vec<f64> = (0..n).map(|i| 1.0 / h[i] + 1.0 / h[i + 1]).collect();
    let off: Vec<f64> = (1..n).map(|i| -1.0 / h[i]).collect();
    SymMatrix::from_tridiagonal(&diag, &off)
}

/// `c_alpha = (2 - alpha) / (6 (3 - alpha))`.
pub fn small_horizon_coefficient(alpha: f64) -> f64 {
    (2.0 - alpha) / (6.0 * (3.0 - alpha))
}

/// `S_delta = S_0 - c_alpha delta S_0^2` for `delta <= h_min`, where the
/// square runs over the full node set (boundary nodes included), i.e.
/// `(S_0^2)_jk = sum_i c_j(i) c_k(i)`.
pub fn assemble_delta_le_h(mesh: &Mesh1D, alpha: f64, delta: f64) -> Result<SymMatrix> {
    if !(-1.0..2.0).contains(&alpha) {
        return Err(invalid("alpha", format!("need -1 <= alpha < 2, got {alpha}")));
    }
    let hmin = mesh.stats().h_min;
    if !(delta > 0.0 && delta <= hmin) {
        return Err(invalid("delta", format!("need 0 < delta <= h_min = {hmin}, got {delta}")));
    }
    let x = mesh.nodes();
    let n = mesh.interior_count();
    let cd = small_horizon_coefficient(alpha) * delta;
    let s0 = assemble_local(mesh);
    let mut s = SymMatrix::zeros(n, 2);
    for j in 1..=n {
        let cj = stencil(x, j);
        for k in j..=(j + 2).min(n) {
            let ck = stencil(x, k);
            // c_j and c_k overlap on full-node indices max(j,k)-1 ..= min(j,k)+1
            let sq: f64 = (k - 1..=j + 1).map(|i| cj[i + 1 - j] * ck[i + 1 - k]).sum();
            s.set(j - 1, k - 1, s0.get(j - 1, k - 1) - cd * sq);
        }
    }
    Ok(s)
}

/// `C^_alpha = 1 / (2 Gamma(4 - alpha) cos(alpha pi / 2))`.
pub fn infinite_horizon_constant(alpha: f64) -> f64 {
    1.0 / (2.0 * libm::tgamma(4.0 - alpha) * (0.5 * alpha * PI).cos())
}

/// `|alpha - 1|` below this uses the `D^2 ln D` limit form.
const ALPHA_ONE_GAP: f64 = 1e-12;

/// Stencils whose spread is at most this fraction of their center distance
/// are contracted through the binomial series.
const SERIES_RADIUS: f64 = 0.5;

/// `sum_{n >= 4} binom(beta, n) z^n`.
fn binomial_tail(beta: f64, z: f64) -> f64 {
    let mut coef = beta * (beta - 1.0) * (beta - 2.0) * (beta - 3.0) / 24.0;
    let mut zn = z.powi(4);
    let mut sum = 0.0;
    for n in 4..400 {
        let term = coef * zn;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() || term == 0.0 {
            break;
        }
        coef *= (beta - n as f64) / (n as f64 + 1.0);
        zn *= z;
    }
    sum
}

/// `sum_{n >= 4} q_n z^n` for `(1+z)^2 ln(1+z)`, `q_n = a_n + 2a_{n-1} + a_{n-2}`,
/// `a_n = (-1)^{n+1}/n`.
fn log_tail(z: f64) -> f64 {
    let a = |n: usize| if n % 2 == 1 { 1.0 / n as f64 } else { -1.0 / n as f64 };
    let mut zn = z.powi(4);
    let mut sum = 0.0;
    for n in 4..400 {
        let term = (a(n) + 2.0 * a(n - 1) + a(n - 2)) * zn;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() || term == 0.0 {
            break;
        }
        zn *= z;
    }
    sum
}

fn infinite_entry(x: &[f64], alpha: f64, chat: f64, j: usize, k: usize) -> f64 {
    let (j, k) = if j <= k { (j, k) } else { (k, j) };
    let geo = geometry(x, j, k);
    let log_form = (alpha - 1.0).abs() < ALPHA_ONE_GAP;
    let beta = 3.0 - alpha;
    let t = x[k] - x[j];
    let spread = (x[k + 1] - x[k - 1]).max(x[j + 1] - x[j - 1]);
    let mut sum = 0.0;
    if k >= j + 2 && spread <= SERIES_RADIUS * t {
        for r in 0..3 {
            for c in 0..3 {
                let z = ((x[k - 1 + c] - x[k]) - (x[j - 1 + r] - x[j])) / t;
                let w = geo.cj[r] * geo.ck[c];
                sum += w * if log_form { log_tail(z) } else { binomial_tail(beta, z) };
            }
        }
        sum *= if log_form { t * t } else { t.powf(beta) };
    } else {
        for r in 0..3 {
            for c in 0..3 {
                let dd = geo.d[r][c];
                if dd > 0.0 {
                    let w = geo.cj[r] * geo.ck[c];
                    sum += w * if log_form { dd * dd * dd.ln() } else { dd.powf(beta) };
                }
            }
        }
    }
    chat * sum
}

/// Dense `S_infinity` for the fractional kernel `C_alpha |s|^{-1-alpha}`,
/// `alpha in (0, 2)`.
pub fn assemble_infinite(mesh: &Mesh1D, alpha: f64) -> Result<SymMatrix> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(invalid("alpha", format!("need 0 < alpha < 2, got {alpha}")));
    }
    let chat = if (alpha - 1.0).abs() < ALPHA_ONE_GAP {
        1.0 / (2.0 * PI)
    } else {
        infinite_horizon_constant(alpha)
    };
    let x = mesh.nodes();
    let n = mesh.interior_count();
    let rows: Vec<Vec<f64>> = (1..=n)
        .into_par_iter()
        .map(|j| (j..=n).map(|k| infinite_entry(x, alpha, chat, j, k)).collect())
        .collect();
    let mut s = SymMatrix::Dense(nalgebra::DMatrix::zeros(n, n));
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            s.set(i, i + off, v);
        }
    }
    Ok(s)
}

/// Cubic `c0 + c1 t + c2 t^2 + c3 t^3` on `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicPiece {
    pub lo: f64,
    pub hi: f64,
    pub coef: [f64; 4],
}

/// `k (m - t)^3` in monomial coefficients.
fn shifted_cube(m: f64, k: f64) -> [f64; 4] {
    [k * m * m * m, -3.0 * k * m * m, 3.0 * k * m, -k]
}

fn add(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

/// Piecewise-cubic representation of `I_p(tau)` on a uniform grid (in
/// units where `h = 1`), scaled by 12.
pub fn ip_pieces(p: usize) -> Vec<CubicPiece> {
    let piece = |lo: f64, hi: f64, coef: [f64; 4]| CubicPiece { lo, hi, coef };
    match p {
        0 => vec![
            piece(0.0, 1.0, [0.0, 0.0, 24.0, -12.0]),
            piece(1.0, 2.0, add([16.0, 0.0, 0.0, 0.0], shifted_cube(2.0, -4.0))),
            piece(2.0, f64::INFINITY, [16.0, 0.0, 0.0, 0.0]),
        ],
        1 => vec![
            piece(0.0, 1.0, [0.0, 0.0, -12.0, 8.0]),
            piece(1.0, 2.0, [14.0, -42.0, 30.0, -6.0]),
            piece(2.0, 3.0, add([4.0, 0.0, 0.0, 0.0], shifted_cube(3.0, -2.0))),
            piece(3.0, f64::INFINITY, [4.0, 0.0, 0.0, 0.0]),
        ],
        _ => {
            let p = p as f64;
            vec![
                piece(p - 2.0, p - 1.0, shifted_cube(p - 2.0, 2.0)),
                piece(p - 1.0, p, add(shifted_cube(p - 2.0, 2.0), shifted_cube(p - 1.0, -8.0))),
                piece(p, p + 1.0, add(shifted_cube(p + 1.0, 8.0), shifted_cube(p + 2.0, -2.0))),
                piece(p + 1.0, p + 2.0, shifted_cube(p + 2.0, -2.0)),
            ]
        }
    }
}

#[allow(non_snake_case)]
pub fn Ip_eval(p: usize, tau: f64) -> f64 {
    ip_pieces(p)
        .iter()
        .find(|pc| tau >= pc.lo && tau < pc.hi)
        .map(|pc| pc.coef[0] + tau * (pc.coef[1] + tau * (pc.coef[2] + tau * pc.coef[3])))
        .unwrap_or(0.0)
}

/// Generating vector of a uniform-mesh stiffness matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Toeplitz {
    pub h: f64,
    pub t: Vec<f64>,
}

impl Toeplitz {
    pub fn n(&self) -> usize {
        self.t.len()
    }

    /// Last index with a nonzero `t_p`.
    pub fn half_bandwidth(&self) -> usize {
        self.t.iter().rposition(|&v| v != 0.0).unwrap_or(0)
    }

    pub fn to_matrix(&self) -> SymMatrix {
        let n = self.n();
        let bw = self.half_bandwidth();
        let mut s = SymMatrix::zeros(n, bw);
        for i in 0..n {
            for p in 0..=bw.min(n - 1 - i) {
                s.set(i, i + p, self.t[p]);
            }
        }
        s
    }

    /// `p t_p` pairs, one per line.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (p, v) in self.t.iter().enumerate() {
            writeln!(w, "{p} {v:.16e}")?;
        }
        Ok(())
    }
}

/// `t_p = (h/12) sum_n a_n h^{-n} mu_n` over the pieces of `I_p` inside
/// `[0, delta/h]`.
pub fn toeplitz_vector(h: f64, n: usize, kernel: &Kernel) -> Result<Toeplitz> {
    require_moments(kernel)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("need h > 0, got {h}")));
    }
    let delta = kernel.delta();
    let reach = delta / h;
    let mut t = vec![0.0; n];
    for (p, tp) in t.iter_mut().enumerate() {
        if p >= 2 && (p - 2) as f64 >= reach {
            break;
        }
        let mut sum = 0.0;
        for pc in ip_pieces(p) {
            let lo = pc.lo;
            let hi = pc.hi.min(reach);
            if lo >= hi {
                continue;
            }
            let (a, b) = (lo * h, (hi * h).min(delta));
            let mut hn = 1.0;
            for (m, &c) in pc.coef.iter().enumerate() {
                if c != 0.0 {
                    sum += c / hn * kernel.moment(m as u32, a, b)?;
                }
                hn *= h;
            }
        }
        *tp = sum * h / 12.0;
    }
    Ok(Toeplitz { h, t })
}

pub fn assemble_uniform_toeplitz(mesh: &Mesh1D, kernel: &Kernel) -> Result<Toeplitz> {
    if !mesh.is_uniform() {
        return Err(Error::MeshMismatch("the Toeplitz path needs a uniform mesh".into()));
    }
    let h = (mesh.b() - mesh.a()) / mesh.element_count() as f64;
    toeplitz_vector(h, mesh.interior_count(), kernel)
}

/// Symmetric tridiagonal mass matrix on the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl MassMatrix {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn to_sym(&self) -> SymMatrix {
        SymMatrix::from_tridiagonal(&self.diag, &self.off)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.off[i] * x[i + 1];
                }
                v
            })
            .collect()
    }
}

/// Element integrals `int_e n phi_a phi_b` for the two hat functions
/// living on element `[x0, x1]`: returns `(left-left, left-right, right-right)`.
fn element_mass(x0: f64, x1: f64, weight: Option<&dyn Fn(f64) -> f64>) -> (f64, f64, f64) {
    let h = x1 - x0;
    match weight {
        None => (h / 3.0, h / 6.0, h / 3.0),
        Some(n) => {
            let (mut ll, mut lr, mut rr) = (0.0, 0.0, 0.0);
            for &g in &GAUSS2 {
                let t = 0.5 * (1.0 + g);
                let x = x0 + t * h;
                let wv = 0.5 * h * n(x);
                let (l, r) = (1.0 - t, t);
                ll += wv * l * l;
                lr += wv * l * r;
                rr += wv * r * r;
            }
            (ll, lr, rr)
        }
    }
}

/// `M_ij = int n phi_i phi_j` (`n = 1` when `weight` is `None`). The
/// weighted case uses two-point Gauss per element, so a mesh node should
/// sit at every jump of `n`.
pub fn mass_matrix(mesh: &Mesh1D, weight: Option<&dyn Fn(f64) -> f64>) -> MassMatrix {
    let x = mesh.nodes();
    let n = mesh.interior_count();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for e in 0..=n {
        let (ll, lr, rr) = element_mass(x[e], x[e + 1], weight);
        // element e spans nodes e and e+1; interior row = node - 1
        if e >= 1 {
            diag[e - 1] += ll;
        }
        if e < n {
            diag[e] += rr;
        }
        if e >= 1 && e < n {
            off[e - 1] += lr;
        }
    }
    MassMatrix { diag, off }
}

/// Unweighted mass matrix rows on the interior nodes, with columns over the
/// full node set `0..=N+1`: returns `(left, diag, right)` coefficients.
pub(crate) fn mass_full_rows(mesh: &Mesh1D) -> Vec<[f64; 3]> {
    let h = mesh.element_sizes();
    (0..mesh.interior_count())
        .map(|i| [h[i] / 6.0, (h[i] + h[i + 1]) / 3.0, h[i + 1] / 6.0])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshSpec};
    use proptest::prelude::*;

    fn uniform(n: usize) -> Mesh1D {
        generate_mesh(&MeshSpec::Uniform { a: 0.0, b: 1.0, interior: n }).unwrap()
    }

    fn graded(elements: usize) -> Mesh1D {
        generate_mesh(&MeshSpec::GradedBoundary { a: 0.0, b: 1.0, elements, gamma: 2.0 }).unwrap()
    }

    fn direct_g(z: f64, s: f64) -> f64 {
        -((z + s).abs().powi(3) - 2.0 * z.abs().powi(3) + (z - s).abs().powi(3)) / 12.0
    }

    #[test]
    fn g_examples() {
        assert!((g_eval(0.0, 1.0) + 1.0 / 6.0).abs() < 1e-15);
        assert!((g_eval(1.0, 0.5) + 0.125).abs() < 1e-15);
        assert!((g_eval(2.0, 1.0) + 1.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn g_branches_match_definition(z in 0.0f64..3.0, s in 0.0f64..3.0) {
            let scale = (z + s).powi(3).max(1e-300);
            prop_assert!((g_eval(z, s) - direct_g(z, s)).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn geometry_examples() {
        let m = uniform(7);
        let h = 0.125;
        let g = local_geometry(&m, 3, 3).unwrap();
        let expect = [[0.0, h, 2.0 * h], [h, 0.0, h], [2.0 * h, h, 0.0]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((g.d[r][c] - expect[r][c]).abs() < 1e-15);
            }
        }
        let g = local_geometry(&m, 3, 4).unwrap();
        let expect = [[h, 2.0 * h, 3.0 * h], [0.0, h, 2.0 * h], [h, 0.0, h]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((g.d[r][c] - expect[r][c]).abs() < 1e-15);
            }
        }
        assert!(g.cj.iter().sum::<f64>().abs() < 1e-12);
        assert!(matches!(local_geometry(&m, 0, 1), Err(Error::IndexOutOfRange(_))));
        assert!(matches!(local_geometry(&m, 1, 8), Err(Error::IndexOutOfRange(_))));
    }

    #[test]
    fn small_horizon_entries() {
        let m = generate_mesh(&MeshSpec::Uniform { a: 0.0, b: 1.0, interior: 9 }).unwrap();
        let k = Kernel::fractional(0.0, 0.05).unwrap();
        let s = assemble(&m, &k).unwrap();
        assert!((s.get(4, 4) - 50.0 / 3.0).abs() < 1e-12);
        assert!((s.get(4, 5) + 70.0 / 9.0).abs() < 1e-12);
        assert!((s.get(4, 6) + 5.0 / 9.0).abs() < 1e-12);
        assert_eq!(s.get(4, 7), 0.0);
        let id = assemble_delta_le_h(&m, 0.0, 0.05).unwrap();
        assert!((id.get(4, 4) - 50.0 / 3.0).abs() < 1e-12);
        assert!((id.get(4, 5) + 70.0 / 9.0).abs() < 1e-12);
        assert!((id.get(4, 6) + 5.0 / 9.0).abs() < 1e-12);
        assert!((id.get(0, 0) - 50.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn delta_le_h_limits_and_errors() {
        let m = graded(8);
        let hmin = m.stats().h_min;
        assert_eq!(small_horizon_coefficient(2.0), 0.0);
        assert!(matches!(assemble_delta_le_h(&m, 0.5, 1.01 * hmin), Err(Error::InvalidParameter { name: "delta", .. })));
        assert!(assemble_delta_le_h(&m, 2.0, hmin).is_err());
    }

    #[test]
    fn local_matrix() {
        let m = generate_mesh(&MeshSpec::Uniform { a: 0.0, b: 1.0, interior: 2 }).unwrap();
        let s = assemble_local(&m);
        assert!((s.get(0, 0) - 6.0).abs() < 1e-12);
        assert!((s.get(0, 1) + 3.0).abs() < 1e-12);
        let u = assemble_local(&uniform(9));
        let row: f64 = (3..6).map(|k| u.get(4, k)).sum();
        assert!(row.abs() < 1e-12);
    }

    #[test]
    fn bandwidth_follows_horizon() {
        let m = uniform(16);
        let h = 1.0 / 17.0;
        let s = assemble(&m, &Kernel::fractional(0.5, 3.5 * h).unwrap()).unwrap();
        assert_eq!(s.half_bandwidth(), 5);
        assert!(s.get(0, 5) != 0.0);
        let full = assemble(&m, &Kernel::constant_box(1.0).unwrap()).unwrap();
        assert!(!full.is_banded());
        assert!(full.get(0, 15) != 0.0);
    }

    #[test]
    fn truncated_assemble_rejects_infinite_kernel() {
        let m = uniform(4);
        let k = Kernel::fractional_infinite(0.5).unwrap();
        assert!(matches!(assemble(&m, &k), Err(Error::UnsupportedKernel(_))));
        assert!(matches!(assemble_entry(&m, &k, 1, 1), Err(Error::UnsupportedKernel(_))));
    }

    #[test]
    fn reflection_symmetry() {
        let m = graded(12);
        let s = assemble(&m, &Kernel::fractional(0.5, 0.3).unwrap()).unwrap();
        let n = m.interior_count();
        let scale = s.max_abs();
        for j in 0..n {
            for k in 0..n {
                assert!((s.get(j, k) - s.get(n - 1 - j, n - 1 - k)).abs() < 1e-13 * scale);
            }
        }
    }

    #[test]
    fn ip_examples() {
        assert_eq!(Ip_eval(0, 1.0), 12.0);
        assert_eq!(Ip_eval(0, 3.0), 16.0);
        assert_eq!(Ip_eval(1, 0.0), 0.0);
        assert_eq!(Ip_eval(5, 2.0), 0.0);
        assert_eq!(Ip_eval(5, 7.5), 0.0);
    }

    #[test]
    fn ip_is_twelve_times_the_contracted_integrand() {
        let c = [1.0, -2.0, 1.0];
        for p in 0..7usize {
            for i in 0..90 {
                let tau = 0.1 * i as f64 + 0.013;
                let mut sum = 0.0;
                for r in 0..3 {
                    for cc in 0..3 {
                        let z = (p as f64 + cc as f64 - r as f64).abs();
                        sum += c[r] * c[cc] * g_eval(z, tau);
                    }
                }
                assert!((Ip_eval(p, tau) - 12.0 * sum).abs() < 1e-10 * (1.0 + (p as f64 + 2.0).powi(3)), "p={p} tau={tau}");
            }
        }
    }

    #[test]
    fn toeplitz_box_two_h() {
        let h = 0.1;
        let tz = toeplitz_vector(h, 9, &Kernel::constant_box(2.0 * h).unwrap()).unwrap();
        assert!((tz.t[0] - 0.625 / h).abs() < 1e-12);
        assert_eq!(tz.t[4], 0.0);
        assert_eq!(tz.half_bandwidth(), 3);
    }

    #[test]
    fn toeplitz_matches_assemble() {
        let m = uniform(40);
        for k in [Kernel::fractional(0.5, 5.0 / 41.0).unwrap(), Kernel::constant_box(0.07).unwrap(), Kernel::fractional(-0.5, 2.0).unwrap()] {
            let a = assemble(&m, &k).unwrap();
            let t = assemble_uniform_toeplitz(&m, &k).unwrap().to_matrix();
            let scale = a.max_abs();
            for i in 0..40 {
                for j in 0..40 {
                    assert!((a.get(i, j) - t.get(i, j)).abs() <= 1e-12 * scale, "{k:?} ({i},{j})");
                }
            }
        }
        assert!(assemble_uniform_toeplitz(&graded(8), &Kernel::constant_box(0.1).unwrap()).is_err());
    }

    #[test]
    fn toeplitz_dump_format() {
        let tz = Toeplitz { h: 0.5, t: vec![1.0, -0.25] };
        let mut buf = Vec::new();
        tz.write_dump(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 1.0000000000000000e0\n1 -2.5000000000000000e-1\n");
    }

    #[test]
    fn infinite_diagonal_example() {
        let m = uniform(15);
        let h: f64 = 1.0 / 16.0;
        let s = assemble_infinite(&m, 0.5).unwrap();
        let expect = infinite_horizon_constant(0.5) * h.sqrt() * (2.0 * 2f64.powf(2.5) - 8.0);
        assert!((s.get(7, 7) - expect).abs() < 1e-13 * expect);
        assert!((expect / h.sqrt() - 0.70506).abs() < 1e-4);
        assert!(assemble_infinite(&m, 2.0).is_err());
    }

    #[test]
    fn infinite_series_matches_direct_contraction() {
        let m = graded(20);
        let x = m.nodes();
        for alpha in [0.3, 1.0, 1.7] {
            let chat = if alpha == 1.0 { 1.0 / (2.0 * PI) } else { infinite_horizon_constant(alpha) };
            for (j, k) in [(2, 9), (3, 17), (5, 12)] {
                let series = infinite_entry(x, alpha, chat, j, k);
                let geo = geometry(x, j, k);
                let mut direct = 0.0;
                for r in 0..3 {
                    for c in 0..3 {
                        let d = geo.d[r][c];
                        let v = if alpha == 1.0 { d * d * d.ln() } else { d.powf(3.0 - alpha) };
                        direct += geo.cj[r] * geo.ck[c] * v;
                    }
                }
                direct *= chat;
                assert!((series - direct).abs() <= 1e-6 * direct.abs(), "alpha={alpha} ({j},{k}) {series} {direct}");
            }
        }
    }

    #[test]
    fn local_limit_of_infinite() {
        let m = uniform(15);
        let h = 1.0 / 16.0;
        let s = assemble_infinite(&m, 1.999).unwrap();
        let s0 = assemble_local(&m);
        for (i, j) in [(7, 7), (7, 8)] {
            assert!((h * s.get(i, j) - h * s0.get(i, j)).abs() < 1e-2);
        }
    }

    #[test]
    fn mass_examples() {
        let m = uniform(7);
        let h = 0.125;
        let mm = mass_matrix(&m, None);
        assert!((mm.diag[3] - 2.0 * h / 3.0).abs() < 1e-15);
        assert!((mm.off[3] - h / 6.0).abs() < 1e-15);
        let one = |_x: f64| 1.0;
        let w = mass_matrix(&m, Some(&one));
        for i in 0..7 {
            assert!((w.diag[i] - mm.diag[i]).abs() < 1e-14);
        }
        let step = |x: f64| if x < 0.5 { 0.5 } else { 1.0 };
        let ws = mass_matrix(&m, Some(&step));
        assert!((ws.diag[1] - 0.5 * 2.0 * h / 3.0).abs() < 1e-15);
        assert!((ws.diag[3] - (0.5 * h / 3.0 + h / 3.0)).abs() < 1e-15);
        assert!((ws.diag[5] - 2.0 * h / 3.0).abs() < 1e-15);
        let g = graded(8);
        let gm = mass_matrix(&g, None);
        let rows = gm.matvec(&[1.0; 7]);
        let full = mass_full_rows(&g);
        for i in 0..7 {
            assert!((rows[i] + full[i][0] * (i == 0) as u8 as f64 + full[i][2] * (i == 6) as u8 as f64 - (g.h(i + 1) + g.h(i + 2)) / 2.0).abs() < 1e-15);
        }
    }
}
