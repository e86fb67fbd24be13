//! Solvers on assembled matrices: boundary-value and Helmholtz problems,
//! the generalized eigenproblem `S u = lambda M u`, extreme eigenvalues and
//! condition numbers, semi-implicit Allen-Cahn stepping, and error norms.

use std::io::Write;
use std::sync::Arc;

use crate::assembly::{assemble, assemble_infinite, assemble_local, mass_full_rows, mass_matrix, MassMatrix};
use crate::error::{invalid, Error, Result};
use crate::kernel::Kernel;
use crate::linalg::{condition_estimate, max_abs_vec, SymMatrix};
use crate::mesh::Mesh1D;
use crate::quadrature::GAUSS3;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which stiffness matrix a problem uses.
#[derive(Debug, Clone)]
pub enum Operator {
    /// `-u''` (the `delta -> 0` limit).
    Local,
    Nonlocal(Kernel),
}

impl From<Kernel> for Operator {
    fn from(k: Kernel) -> Self {
        Operator::Nonlocal(k)
    }
}

impl Operator {
    pub fn stiffness(&self, mesh: &Mesh1D) -> Result<SymMatrix> {
        match self {
            Operator::Local => Ok(assemble_local(mesh)),
            Operator::Nonlocal(k @ Kernel::FractionalInfinite { .. }) => assemble_infinite(mesh, k.alpha().unwrap_or(f64::NAN)),
            Operator::Nonlocal(k) => assemble(mesh, k),
        }
    }
}

/// Right-hand side of a linear problem.
#[derive(Clone)]
pub enum Forcing {
    /// Pointwise `f`, discretized as `(I_h f, phi_k)`.
    Function(ScalarFn),
    /// Values of `f` at all nodes `x_0..x_{N+1}`, discretized like `Function`.
    NodalValues(Vec<f64>),
    /// A ready load vector of length `N`.
    Load(Vec<f64>),
}

impl std::fmt::Debug for Forcing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Forcing::Function(_) => f.write_str("Function(..)"),
            Forcing::NodalValues(v) => f.debug_tuple("NodalValues").field(&v.len()).finish(),
            Forcing::Load(v) => f.debug_tuple("Load").field(&v.len()).finish(),
        }
    }
}

impl Forcing {
    pub fn load(&self, mesh: &Mesh1D) -> Result<Vec<f64>> {
        match self {
            Forcing::Function(f) => Ok(rhs_from_function(mesh, f.as_ref())),
            Forcing::NodalValues(v) => rhs_from_nodal(mesh, v),
            Forcing::Load(v) => {
                if v.len() != mesh.interior_count() {
                    return Err(Error::MeshMismatch(format!("load has {} entries, mesh has {} unknowns", v.len(), mesh.interior_count())));
                }
                Ok(v.clone())
            }
        }
    }
}

/// `(I_h f, phi_k)` for every interior `k`, with `I_h` interpolating at all
/// nodes including the endpoints.
pub fn rhs_from_function(mesh: &Mesh1D, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let values: Vec<f64> = mesh.nodes().iter().map(|&x| f(x)).collect();
    rhs_from_nodal(mesh, &values).expect("node count matches by construction")
}

/// As [`rhs_from_function`] from values at all `N + 2` nodes.
pub fn rhs_from_nodal(mesh: &Mesh1D, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != mesh.nodes().len() {
        return Err(Error::MeshMismatch(format!("{} nodal values for {} nodes", values.len(), mesh.nodes().len())));
    }
    Ok(mass_full_rows(mesh)
        .iter()
        .enumerate()
        .map(|(i, r)| r[0] * values[i] + r[1] * values[i + 1] + r[2] * values[i + 2])
        .collect())
}

/// Nodal solution with the homogeneous volume constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub mesh: Mesh1D,
    /// Values at the interior nodes `x_1..x_N`.
    pub u: Vec<f64>,
}

impl Solution {
    pub fn new(mesh: Mesh1D, u: Vec<f64>) -> Result<Self> {
        if u.len() != mesh.interior_count() {
            return Err(Error::MeshMismatch(format!("{} values for {} unknowns", u.len(), mesh.interior_count())));
        }
        Ok(Solution { mesh, u })
    }

    /// Values at all nodes, zero at both endpoints.
    pub fn full(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.u.len() + 2);
        v.push(0.0);
        v.extend_from_slice(&self.u);
        v.push(0.0);
        v
    }

    /// Piecewise-linear interpolant at `x`; zero outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let nodes = self.mesh.nodes();
        if x <= nodes[0] || x >= nodes[nodes.len() - 1] {
            return 0.0;
        }
        let i = nodes.partition_point(|&v| v <= x).max(1) - 1;
        let full = self.full();
        let t = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
        (1.0 - t) * full[i] + t * full[i + 1]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs_vec(&self.u)
    }

    /// `x,u` CSV over all nodes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,u")?;
        for (x, u) in self.mesh.nodes().iter().zip(self.full()) {
            writeln!(w, "{x:.16e},{u:.16e}")?;
        }
        Ok(())
    }
}

/// Relative residual bound enforced on every SPD solve.
pub const RESIDUAL_BOUND: f64 = 1e-10;

fn residual_inf(a: &SymMatrix, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let ax = a.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let m = max_abs_vec(&r);
    (r, m)
}

/// Cholesky solve with one step of iterative refinement; fails if
/// `||A x - b||_inf > 1e-10 ||b||_inf`.
pub fn solve_spd(a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n() {
        return Err(Error::MeshMismatch(format!("rhs length {} for a {}x{} matrix", b.len(), a.n(), a.n())));
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let f = a.cholesky()?;
    let mut x = f.solve(b);
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let bound = RESIDUAL_BOUND * max_abs_vec(b);
    for _ in 0..3 {
        let (r, m) = residual_inf(a, &x, b);
        if !m.is_finite() {
            return Err(Error::NonFinite(0));
        }
        if m <= bound {
            return Ok(x);
        }
        let dx = f.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
    }
    let (_, m) = residual_inf(a, &x, b);
    if m <= bound {
        Ok(x)
    } else {
        Err(Error::Residual { residual: m, bound })
    }
}

#[derive(Debug, Clone)]
pub struct BvpProblem {
    pub mesh: Mesh1D,
    pub operator: Operator,
    pub forcing: Forcing,
    /// `lambda <= 0`; the system solved is `(S - lambda M) u = rhs`.
    pub lambda: f64,
}

pub fn solve_bvp(problem: &BvpProblem) -> Result<Solution> {
    if !(problem.lambda <= 0.0) {
        return Err(invalid("lambda", format!("need lambda <= 0, got {}", problem.lambda)));
    }
    let s = problem.operator.stiffness(&problem.mesh)?;
    let rhs = problem.forcing.load(&problem.mesh)?;
    let a = if problem.lambda < 0.0 {
        s.combine(1.0, &mass_matrix(&problem.mesh, None).to_sym(), -problem.lambda)?
    } else {
        s
    };
    let u = solve_spd(&a, &rhs)?;
    Solution::new(problem.mesh.clone(), u)
}

#[derive(Debug, Clone)]
pub struct HelmholtzSolution {
    pub solution: Solution,
    /// 1-norm condition estimate of `S + k^2 M_n`.
    pub condition: f64,
    pub near_singular: bool,
    pub residual: f64,
}

/// Condition estimates above this flag a (near-)resonant system.
pub const NEAR_SINGULAR_CONDITION: f64 = 1e12;

/// Solves `N_delta u + k^2 n u = f` with a volume constraint, i.e.
/// `(S + k^2 M_n) u = rhs`. Where `n < 0` the system is indefinite and the
/// solution oscillates.
pub fn solve_helmholtz(
    mesh: &Mesh1D,
    operator: &Operator,
    k2: f64,
    n: &dyn Fn(f64) -> f64,
    forcing: &Forcing,
) -> Result<HelmholtzSolution> {
    if !(k2 > 0.0 && k2.is_finite()) {
        return Err(invalid("k2", format!("need k2 > 0, got {k2}")));
    }
    let s = operator.stiffness(mesh)?;
    let mn = mass_matrix(mesh, Some(n)).to_sym();
    let a = s.combine(1.0, &mn, k2)?;
    let rhs = forcing.load(mesh)?;
    let f = a.lu()?;
    let mut u = f.solve(&rhs);
    let (r, _) = residual_inf(&a, &u, &rhs);
    let du = f.solve(&r);
    for (ui, di) in u.iter_mut().zip(du) {
        *ui += di;
    }
    let (_, residual) = residual_inf(&a, &u, &rhs);
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(0));
    }
    let condition = condition_estimate(&a, &f);
    Ok(HelmholtzSolution {
        solution: Solution::new(mesh.clone(), u)?,
        condition,
        near_singular: !(condition < NEAR_SINGULAR_CONDITION),
        residual,
    })
}

/// Eigenpairs sorted by ascending eigenvalue; `vectors[i]` pairs with
/// `values[i]` and the vectors are `M`-orthonormal.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Lower bidiagonal Cholesky factor of a tridiagonal SPD matrix:
/// `(diag, sub)` with `L[i][i] = diag[i]`, `L[i+1][i] = sub[i]`.
fn tridiagonal_cholesky(m: &MassMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.n();
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    for i in 0..n {
        let mut v = m.diag[i];
        if i > 0 {
            l[i - 1] = m.off[i - 1] / d[i - 1];
            v -= l[i - 1] * l[i - 1];
        }
        if !(v > 0.0) {
            return Err(Error::Factorization { pivot: i, reason: "mass matrix is not positive definite".into() });
        }
        d[i] = v.sqrt();
    }
    Ok((d, l))
}

/// Smallest `count` eigenpairs of `S u = lambda M u` via `M = L L^T` and a
/// dense symmetric eigensolve of `L^{-1} S L^{-T}`.
pub fn eig_generalized(s: &SymMatrix, m: &MassMatrix, count: usize) -> Result<Eigenpairs> {
    let n = s.n();
    if m.n() != n {
        return Err(Error::MeshMismatch(format!("stiffness {n}x{n}, mass {}x{}", m.n(), m.n())));
    }
    let (d, l) = tridiagonal_cholesky(m)?;
    let forward = |col: &mut [f64]| {
        for i in 0..n {
            if i > 0 {
                col[i] -= l[i - 1] * col[i - 1];
            }
            col[i] /= d[i];
        }
    };
    // X = L^{-1} S, then C = L^{-1} X^T
    let mut x = s.to_dense();
    for mut col in x.column_iter_mut() {
        forward(col.as_mut_slice());
    }
    let mut c = x.transpose();
    for mut col in c.column_iter_mut() {
        forward(col.as_mut_slice());
    }
    let c = (&c + c.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let count = count.min(n);
    let mut values = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    for &i in order.iter().take(count) {
        values.push(eig.eigenvalues[i]);
        // v = L^{-T} y
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().cloned().collect();
        for r in (0..n).rev() {
            if r + 1 < n {
                v[r] -= l[r] * v[r + 1];
            }
            v[r] /= d[r];
        }
        vectors.push(v);
    }
    Ok(Eigenpairs { values, vectors })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremes {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub cond: f64,
    pub power_iterations: usize,
    pub inverse_iterations: usize,
}

pub const EIGEN_RTOL: f64 = 1e-8;
pub const MAX_POWER_ITERATIONS: usize = 200_000;
pub const MAX_INVERSE_ITERATIONS: usize = 500;

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= nrm;
    }
    nrm
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deterministic start vector with components in every eigendirection of
/// interest.
fn start_vector(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract()).collect();
    normalize(&mut v);
    v
}

/// `lambda_max` by power iteration and `lambda_min` by inverse iteration
/// (Cholesky), both stopped when the Rayleigh quotient changes by less
/// than `1e-8` relative. `S` must be SPD.
pub fn condition_and_extremes(s: &SymMatrix) -> Result<Extremes> {
    let n = s.n();
    if n == 0 {
        return Err(invalid("matrix", "empty matrix"));
    }
    let mut v = start_vector(n);
    let mut lmax = 0.0f64;
    let mut power_iterations = 0;
    loop {
        let mut w = s.matvec(&v);
        let rq = dot(&v, &w);
        power_iterations += 1;
        if !rq.is_finite() {
            return Err(Error::NonFinite(power_iterations));
        }
        let done = (rq - lmax).abs() <= EIGEN_RTOL * rq.abs();
        lmax = rq;
        if done {
            break;
        }
        if power_iterations >= MAX_POWER_ITERATIONS {
            return Err(Error::Stagnation { iterations: power_iterations, last: lmax });
        }
        normalize(&mut w);
        v = w;
    }
    let f = s.cholesky()?;
    let mut v = start_vector(n);
    let mut lmin = f64::INFINITY;
    let mut inverse_iterations = 0;
    loop {
        let mut w = f.solve(&v);
        inverse_iterations += 1;
        // Rayleigh quotient of the inverse: v^T S^{-1} v with |v| = 1
        let mu = dot(&v, &w);
        let est = 1.0 / mu;
        if !est.is_finite() {
            return Err(Error::NonFinite(inverse_iterations));
        }
        let done = (est - lmin).abs() <= EIGEN_RTOL * est.abs();
        lmin = est;
        if done {
            break;
        }
        if inverse_iterations >= MAX_INVERSE_ITERATIONS {
            return Err(Error::Stagnation { iterations: inverse_iterations, last: lmin });
        }
        normalize(&mut w);
        v = w;
    }
    Ok(Extremes { lambda_min: lmin, lambda_max: lmax, cond: lmax / lmin, power_iterations, inverse_iterations })
}

#[derive(Clone)]
pub struct AllenCahnProblem {
    pub mesh: Mesh1D,
    pub operator: Operator,
    pub epsilon: f64,
    pub tau: f64,
    pub t_final: f64,
    pub u0: ScalarFn,
}

impl std::fmt::Debug for AllenCahnProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AllenCahnProblem")
            .field("mesh", &self.mesh)
            .field("operator", &self.operator)
            .field("epsilon", &self.epsilon)
            .field("tau", &self.tau)
            .field("t_final", &self.t_final)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct AllenCahnRun {
    /// `(t, U)` at the requested times, in request order.
    pub snapshots: Vec<(f64, Solution)>,
    /// `(t_n, max_j |U^n_j|)` for `n = 0..=steps`.
    pub history: Vec<(f64, f64)>,
    pub steps: usize,
}

impl AllenCahnRun {
    pub fn final_state(&self) -> Option<&Solution> {
        self.snapshots.last().map(|(_, s)| s)
    }

    pub fn write_history<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,maxabs")?;
        for (t, m) in &self.history {
            writeln!(w, "{t:.16e},{m:.16e}")?;
        }
        Ok(())
    }
}

/// `f(u) = u^3 - u`, the derivative of `(u^2 - 1)^2 / 4`.
pub fn allen_cahn_nonlinearity(u: f64) -> f64 {
    u * u * u - u
}

/// Semi-implicit backward Euler: `(M + tau eps^2 S) U^n = M U^{n-1} - tau M f(U^{n-1})`,
/// with nodal interpolation of `u0`. The final time is always included in
/// the snapshots.
pub fn allen_cahn_run(problem: &AllenCahnProblem, snapshot_times: &[f64]) -> Result<AllenCahnRun> {
    let AllenCahnProblem { mesh, operator, epsilon, tau, t_final, u0 } = problem;
    let (eps, tau, t_final) = (*epsilon, *tau, *t_final);
    if !(eps > 0.0) {
        return Err(invalid("epsilon", format!("need epsilon > 0, got {eps}")));
    }
    if !(tau > 0.0) {
        return Err(invalid("tau", format!("need tau > 0, got {tau}")));
    }
    if !(t_final >= tau) {
        return Err(invalid("t_final", format!("need T >= tau, got T = {t_final}, tau = {tau}")));
    }
    let steps = (t_final / tau).round() as usize;
    let s = operator.stiffness(mesh)?;
    let m = mass_matrix(mesh, None);
    let a = s.combine(tau * eps * eps, &m.to_sym(), 1.0)?;
    let fac = a.cholesky()?;

    let mut u: Vec<f64> = mesh.interior_nodes().iter().map(|&x| u0(x)).collect();
    let mut wanted: Vec<(usize, usize)> = snapshot_times
        .iter()
        .enumerate()
        .map(|(i, &t)| (i, ((t / tau).round() as usize).min(steps)))
        .collect();
    wanted.sort_by_key(|&(_, n)| n);
    let mut snaps: Vec<Option<(f64, Solution)>> = vec![None; snapshot_times.len()];
    let mut next = 0;
    let take = |n: usize, u: &[f64], snaps: &mut Vec<Option<(f64, Solution)>>, next: &mut usize| -> Result<()> {
        while *next < wanted.len() && wanted[*next].1 == n {
            snaps[wanted[*next].0] = Some((n as f64 * tau, Solution::new(mesh.clone(), u.to_vec())?));
            *next += 1;
        }
        Ok(())
    };
    let mut history = Vec::with_capacity(steps + 1);
    history.push((0.0, max_abs_vec(&u)));
    take(0, &u, &mut snaps, &mut next)?;
    for step in 1..=steps {
        let g: Vec<f64> = u.iter().map(|&v| v - tau * allen_cahn_nonlinearity(v)).collect();
        let rhs = m.matvec(&g);
        u = fac.solve(&rhs);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(step));
        }
        history.push((step as f64 * tau, max_abs_vec(&u)));
        take(step, &u, &mut snaps, &mut next)?;
    }
    let mut snapshots: Vec<(f64, Solution)> = snaps.into_iter().flatten().collect();
    if snapshot_times.iter().all(|&t| ((t / tau).round() as usize).min(steps) != steps) {
        snapshots.push((steps as f64 * tau, Solution::new(mesh.clone(), u)?));
    }
    Ok(AllenCahnRun { snapshots, history, steps })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub linf: f64,
    /// Trapezoidal `l^2` over the nodal errors; unlike `l2` it does not see
    /// what happens between nodes, which matters for discontinuous references.
    pub l2_nodal: f64,
}

/// Reference for [`error_norms`].
pub enum Reference<'a> {
    Function(&'a dyn Fn(f64) -> f64),
    Solution(&'a Solution),
}

/// `L^inf` over all nodes, `L^2` by three-point Gauss per element, and the
/// nodal trapezoidal norm of `u_h - reference`.
pub fn error_norms(uh: &Solution, reference: Reference<'_>) -> Result<ErrorNorms> {
    let x = uh.mesh.nodes();
    let full = uh.full();
    let ref_fn: Box<dyn Fn(f64) -> f64 + '_> = match reference {
        Reference::Function(f) => Box::new(f),
        Reference::Solution(r) => {
            if r.mesh.nodes() != x {
                return Err(Error::MeshMismatch("reference solution lives on a different mesh".into()));
            }
            Box::new(move |t| r.eval(t))
        }
    };
    let nodal: Vec<f64> = x.iter().zip(&full).map(|(&xi, &ui)| (ui - ref_fn(xi)).abs()).collect();
    let linf = nodal.iter().cloned().fold(0.0, f64::max);
    let l2_nodal = x
        .windows(2)
        .zip(nodal.windows(2))
        .map(|(xe, e)| 0.5 * (xe[1] - xe[0]) * (e[0] * e[0] + e[1] * e[1]))
        .sum::<f64>()
        .sqrt();
    let mut l2 = 0.0;
    for e in 0..x.len() - 1 {
        let (x0, x1) = (x[e], x[e + 1]);
        let h = x1 - x0;
        for &(g, w) in &GAUSS3 {
            let t = 0.5 * (1.0 + g);
            let uv = (1.0 - t) * full[e] + t * full[e + 1];
            let d = uv - ref_fn(x0 + t * h);
            l2 += 0.5 * h * w * d * d;
        }
    }
    Ok(ErrorNorms { l2: l2.sqrt(), linf, l2_nodal })
}
