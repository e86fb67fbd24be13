//! Command execution. Each command reads all of its keys first, rejects
//! leftovers, then computes; sweeps run in parallel but rows are written in
//! parameter order.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::assembly::{assemble_uniform_toeplitz, mass_matrix};
use crate::kernel::Kernel;
use crate::mesh::Mesh1D;
use crate::oracle::{apply_nonlocal_with_kinks, exact_fractional_poisson};
use crate::solve::{
    allen_cahn_run, condition_and_extremes, eig_generalized, error_norms, solve_bvp, solve_helmholtz, AllenCahnProblem,
    BvpProblem, Forcing, Operator, Reference, Solution,
};

use super::config::{self, function, Builtin, Config};
use super::report::{fit_slope, Cell, StudyReport};
use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Assemble,
    Bvp,
    Helmholtz,
    Eig,
    AllenCahn,
    StudyCond,
    StudyConvergence,
    StudyLimit,
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        <Command as clap::ValueEnum>::from_str(s, false).map_err(|_| CliError::Config(format!("unknown command `{s}`")))
    }
}

/// Runs `command`, writing artifacts under `prefix` and one summary line per
/// sweep point to `log`. Returns the files written.
pub fn run(command: Command, cfg: &Config, prefix: &str, log: &mut dyn Write) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Outputs { prefix: prefix.to_string(), written: Vec::new() };
    match command {
        Command::Assemble => assemble_cmd(cfg, &mut out, log)?,
        Command::Bvp => bvp_cmd(cfg, &mut out, log)?,
        Command::Helmholtz => helmholtz_cmd(cfg, &mut out, log)?,
        Command::Eig => eig_cmd(cfg, &mut out, log)?,
        Command::AllenCahn => allen_cahn_cmd(cfg, &mut out, log)?,
        Command::StudyCond => study_cond(cfg, &mut out, log)?,
        Command::StudyConvergence => study_convergence(cfg, &mut out, log)?,
        Command::StudyLimit => study_limit(cfg, &mut out, log)?,
    }
    Ok(out.written)
}

struct Outputs {
    prefix: String,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, suffix: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = PathBuf::from(format!("{}_{suffix}", self.prefix));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }
}

fn kernel_of(op: &Operator) -> Option<&Kernel> {
    match op {
        Operator::Nonlocal(k) => Some(k),
        Operator::Local => None,
    }
}

/// How the right-hand side is obtained: a builtin function, or the
/// nonlocal operator applied to the exact solution.
enum ForcingPlan {
    Given(Builtin),
    Oracle(Builtin),
}

fn forcing_plan(cfg: &Config, exact: Option<&Builtin>, default_oracle: bool) -> Result<ForcingPlan, CliError> {
    let f = cfg.raw("f").map(str::to_string);
    match f.as_deref() {
        Some("oracle") | None if f.is_some() || default_oracle => match exact {
            Some(e) => Ok(ForcingPlan::Oracle(e.clone())),
            None => Err(CliError::Config("`f = oracle` needs an `exact` solution".into())),
        },
        Some(name) => config::builtin(name)
            .map(ForcingPlan::Given)
            .ok_or_else(|| CliError::Config(format!("key `f`: unknown function `{name}`"))),
        None => Err(CliError::Config("missing required key `f`".into())),
    }
}

fn check_oracle(plan: &ForcingPlan, op: &Operator) -> Result<(), CliError> {
    if let ForcingPlan::Oracle(_) = plan {
        match kernel_of(op) {
            Some(k) if k.is_truncated() => {}
            _ => return Err(CliError::Config("`f = oracle` needs a finite-horizon kernel".into())),
        }
    }
    Ok(())
}

fn materialize(plan: &ForcingPlan, mesh: &Mesh1D, op: &Operator) -> Result<Forcing, CliError> {
    match plan {
        ForcingPlan::Given(b) => Ok(Forcing::Function(b.f.clone())),
        ForcingPlan::Oracle(exact) => {
            let kernel = kernel_of(op).expect("checked by check_oracle");
            let domain = (mesh.a(), mesh.b());
            let values: Result<Vec<f64>, crate::Error> = mesh
                .nodes()
                .par_iter()
                .map(|&x| apply_nonlocal_with_kinks(exact.f.as_ref(), kernel, x, domain, &exact.kinks))
                .collect();
            Ok(Forcing::NodalValues(values?))
        }
    }
}

fn storage_name(s: &crate::linalg::SymMatrix) -> &'static str {
    if s.is_banded() {
        "banded"
    } else {
        "dense"
    }
}

fn assemble_cmd(cfg: &Config, out: &mut Outputs, log: &mut dyn Write) -> Result<(), CliError> {
    let n: usize = cfg.require("N")?;
    let mesh = config::mesh(cfg, n)?;
    let op = config::operator(cfg, None, None, &mesh)?;
    cfg.check_all_used()?;
    let s = op.stiffness(&mesh)?;
    out.write("mesh.csv", |w| mesh.write_csv(w))?;
    out.write("matrix.txt", |w| s.write_coordinate(w))?;
    if let Some(k) = kernel_of(&op).filter(|k| k.has_moment_path() && mesh.is_uniform()) {
        let t = assemble_uniform_toeplitz(&mesh, k)?;
        out.write("toeplitz.txt", |w| t.write_dump(w))?;
    }
    writeln!(
        log,
        "assemble N={} half_bandwidth={} storage={} max_abs={:.6e}",
        mesh.interior_count(),
        s.half_bandwidth(),
        storage_name(&s),
        s.max_abs()
    )?;
    Ok(())
}

fn bvp_cmd(cfg: &Config, out: &mut Outputs, log: &mut dyn Write) -> Result<(), CliError> {
    let n: usize = cfg.require("N")?;
    let mesh = config::mesh(cfg, n)?;
    let op = config::operator(cfg, None, None, &mesh)?;
    let lambda = cfg.or("lambda", 0.0)?;
    let exact = function(cfg, "exact")?;
    let plan = forcing_plan(cfg, exact.as_ref(), false)?;
    check_oracle(&plan, &op)?;
    cfg.check_all_used()?;
    let forcing = materialize(&plan, &mesh, &op)?;
    let sol = solve_bvp(&BvpProblem { mesh, operator: op, forcing, lambda })?;
    out.write("solution.csv", |w| sol.write_csv(w))?;
    write!(log, "bvp N={} max_abs_u={:.6e}", sol.u.len(), sol.max_abs())?;
    if let Some(e) = exact {
        let err = error_norms(&sol, Reference::Function(e.f.as_ref()))?;
        write!(log, " l2={:.6e} linf={:.6e}", err.l2, err.linf)?;
    }
    writeln!(log)?;
    Ok(())
}

fn helmholtz_cmd(cfg: &Config, out: &mut Outputs, log: &mut dyn Write) -> Result<(), CliError> {
    let n: usize = cfg.require("N")?;
    let mesh = config::mesh(cfg, n)?;
    let op = config::operator(cfg, None, None, &mesh)?;
    let k2: f64 = cfg.require("k2")?;
    let weight = function(cfg, "n")?.ok_or_else(|| CliError::Config("missing required key `n`".into()))?;
    let f = match function(cfg, "f")? {
        Some(f) => f,
        None => config::builtin(&k2.to_string()).expect("numeric constant"),
    };
    cfg.check_all_used()?;
    let res = solve_helmholtz(&mesh, &op, k2, weight.f.as_ref(), &Forcing::Function(f.f.clone()))?;
    out.write("solution.csv", |w| res.solution.write_csv(w))?;
    writeln!(
        log,
        "helmholtz N={} k2={k2} max_abs_u={:.6e} condition={:.3e}{}",
        res.solution.u.len(),
        res.solution.max_abs(),
        res.condition,
        if res.near_singular { " near_singular" } else { "" }
    )?;
    Ok(())
}

fn eig_cmd(cfg: &Config, out: &mut Outputs, log: &mut dyn Write) -> Result<(), CliError> {
    let n: usize = cfg.require("N")?;
    let mesh = config::mesh(cfg, n)?;
    let op = config::operator(cfg, None, None, &mesh)?;
    let count: usize = cfg.or("count", 5)?;
    cfg.check_all_used()?;
    let s = op.stiffness(&mesh)?;
    let pairs = eig_generalized(&s, &mass_matrix(&mesh, None), count)?;
    let mut rep = StudyReport::new(&["k", "lambda", "ratio"]);
    let l1 = pairs.values.first().copied().unwrap_or(f64::NAN);
    for (i, &l) in pairs.values.iter().enumerate() {
        rep.push(vec![(i + 1).into(), l.into(), (l / l1).into()]);
    }
    out.write("eigenvalues.csv", |w| rep.write_csv(w))?;
    let list: Vec<String> = pairs.values.iter().map(|v| format!("{v:.6e}")).collect();
    writeln!(log, "eig N={} lambda=[{}]", s.n(), list.join(", "))?;
    Ok(())
}

fn allen_cahn_cmd(cfg: &Config, out: &mut Outputs, log: &mut dyn Write) -> Result<(), CliError> {
    let n: usize = cfg.require("N")?;
    let mesh = config::mesh(cfg, n)?;
    let op = config::operator(cfg, None, None, &mesh)?;
    let epsilon: f64 = cfg.require("epsilon")?;
    let tau: f64 = cfg.require("tau")?;
    let t_final: f64 = cfg.require("T")?;
    let u0 = function(cfg, "u0")?.unwrap_or_else(|| config::builtin("gaussian").expect("registered"));
    let times: Vec<f64> = cfg.list("snapshots")?.unwrap_or_default();
    cfg.check_all_used()?;
    let problem = AllenCahnProblem { mesh, operator: op, epsilon, tau, t_final, u0: u0.f.clone() };
    let run = allen_cahn_run(&problem, &times)?;
    for (t, sol) in &run.snapshots {
        out.write(&format!("t{t}.csv"), |w| sol.write_csv(w))?;
    }
    out.write("history.csv", |w| run.write_history(w))?;
    let peak = run.history.iter().map(|h| h.1).fold(0.0, f64::max);
    writeln!(log, "allen-cahn N={} steps={} max_abs_history={peak:.6e}", problem.mesh.interior_count(), run.steps)?;
    Ok(())
}

/// Pairwise `log(y_k / y_{k-1}) / log(x_k / x_{k-1})`, empty for the first
/// row of each group.
fn rate_cells(x: &[f64], y: &[f64]) -> Vec<Cell> {
    let mut cells = vec![Cell::Empty];
    for i in 1..x.len() {
        cells.push(((y[i] / y[i - 1]).ln() / (x[i] / x[i - 1]).ln()).into());
    }
    cells
}

fn study_cond(cfg: &Config, out: &mut Outputs, log: &mut dyn Write) -> Result<(), CliError> {
    let sizes: Vec<usize> = cfg.require_list("N")?;
    let alphas: Vec<Option<f64>> = match cfg.list::<f64>("alpha")? {
        Some(v) => v.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let mut points = Vec::new();
    for &alpha in &alphas {
        for &n in &sizes {
            let mesh = config::mesh(cfg, n)?;
            let op = config::operator(cfg, alpha, None, &mesh)?;
            points.push((alpha, n, mesh, op));
        }
    }
    cfg.check_all_used()?;
    let results: Vec<_> = points
        .par_iter()
        .map(|(_, _, mesh, op)| -> Result<_, CliError> { Ok(condition_and_extremes(&op.stiffness(mesh)?)?) })
        .collect::<Result<_, _>>()?;
    let mut rep = StudyReport::new(&[
        "alpha", "N", "h_min", "h_max", "lambda_min", "lambda_max", "cond", "rate_cond", "rate_lambda_min",
    ]);
    for (g, alpha) in alphas.iter().enumerate() {
        let idx: Vec<usize> = (g * sizes.len()..(g + 1) * sizes.len()).collect();
        let ns: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
        let conds: Vec<f64> = idx.iter().map(|&i| results[i].cond).collect();
        let lmins: Vec<f64> = idx.iter().map(|&i| results[i].lambda_min).collect();
        let rc = rate_cells(&ns, &conds);
        let rl = rate_cells(&ns, &lmins);
        for (r, &i) in idx.iter().enumerate() {
            let (_, n, mesh, _) = &points[i];
            let st = mesh.stats();
            let e = &results[i];
            rep.push(vec![
                alpha.map(Cell::from).unwrap_or(Cell::Empty),
                (*n).into(),
                st.h_min.into(),
                st.h_max.into(),
                e.lambda_min.into(),
                e.lambda_max.into(),
                e.cond.into(),
                rc[r].clone(),
                rl[r].clone(),
            ]);
            writeln!(log, "study-cond alpha={} N={n} cond={:.6e} lambda_min={:.6e}", fmt_opt(*alpha), e.cond, e.lambda_min)?;
        }
        if ns.len() >= 2 {
            let (sc, _) = fit_slope(&ns, &conds);
            let (sl, _) = fit_slope(&ns, &lmins);
            writeln!(log, "study-cond alpha={} slope_cond={sc:.4} slope_lambda_min={sl:.4}", fmt_opt(*alpha))?;
        }
    }
    out.write("cond.csv", |w| rep.write_csv(w))?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|a| a.to_string()).unwrap_or_else(|| "-".into())
}

fn study_convergence(cfg: &Config, out: &mut Outputs, log: &mut dyn Write) -> Result<(), CliError> {
    let sizes: Vec<usize> = cfg.require_list("N")?;
    let exact = function(cfg, "exact")?.ok_or_else(|| CliError::Config("missing required key `exact`".into()))?;
    let plan = forcing_plan(cfg, Some(&exact), true)?;
    let mut points = Vec::new();
    for &n in &sizes {
        let mesh = config::mesh(cfg, n)?;
        let op = config::operator(cfg, None, None, &mesh)?;
        check_oracle(&plan, &op)?;
        points.push((mesh, op));
    }
    cfg.check_all_used()?;
    let results: Vec<_> = points
        .par_iter()
        .map(|(mesh, op)| -> Result<_, CliError> {
            let forcing = materialize(&plan, mesh, op)?;
            let sol = solve_bvp(&BvpProblem { mesh: mesh.clone(), operator: op.clone(), forcing, lambda: 0.0 })?;
            Ok(error_norms(&sol, Reference::Function(exact.f.as_ref()))?)
        })
        .collect::<Result<_, _>>()?;
    let h: Vec<f64> = points.iter().map(|(m, _)| m.stats().h_max).collect();
    let l2: Vec<f64> = results.iter().map(|e| e.l2).collect();
    let linf: Vec<f64> = results.iter().map(|e| e.linf).collect();
    let l2n: Vec<f64> = results.iter().map(|e| e.l2_nodal).collect();
    let r2 = rate_cells(&h, &l2);
    let ri = rate_cells(&h, &linf);
    let rn = rate_cells(&h, &l2n);
    let mut rep =
        StudyReport::new(&["N", "h", "delta", "l2", "linf", "l2_nodal", "rate_l2", "rate_linf", "rate_l2_nodal"]);
    for (i, (mesh, op)) in points.iter().enumerate() {
        let delta = kernel_of(op).map(|k| k.delta()).unwrap_or(0.0);
        rep.push(vec![
            mesh.interior_count().into(),
            h[i].into(),
            delta.into(),
            l2[i].into(),
            linf[i].into(),
            l2n[i].into(),
            r2[i].clone(),
            ri[i].clone(),
            rn[i].clone(),
        ]);
        writeln!(log, "study-convergence N={} h={:.6e} l2={:.6e} linf={:.6e}", mesh.interior_count(), h[i], l2[i], linf[i])?;
    }
    if h.len() >= 2 {
        let (s2, _) = fit_slope(&h, &l2);
        let (si, _) = fit_slope(&h, &linf);
        writeln!(log, "study-convergence slope_l2={s2:.4} slope_linf={si:.4}")?;
    }
    out.write("convergence.csv", |w| rep.write_csv(w))?;
    Ok(())
}

enum LimitReference {
    Function(Builtin),
    FractionalPoisson(f64),
    Local,
}

fn study_limit(cfg: &Config, out: &mut Outputs, log: &mut dyn Write) -> Result<(), CliError> {
    let n: usize = cfg.require("N")?;
    let deltas: Vec<f64> = cfg.require_list("delta")?;
    let mesh = config::mesh(cfg, n)?;
    let f = function(cfg, "f")?.ok_or_else(|| CliError::Config("missing required key `f`".into()))?;
    let reference = match cfg.require::<String>("reference")?.as_str() {
        "local" => LimitReference::Local,
        "fractional_poisson" => LimitReference::FractionalPoisson(cfg.require("alpha")?),
        name => LimitReference::Function(
            config::builtin(name).ok_or_else(|| CliError::Config(format!("key `reference`: unknown reference `{name}`")))?,
        ),
    };
    let ops: Vec<Operator> = deltas.iter().map(|&d| config::operator(cfg, None, Some(d), &mesh)).collect::<Result<_, _>>()?;
    cfg.check_all_used()?;
    let forcing = Forcing::Function(f.f.clone());
    let solve = |op: &Operator| -> Result<Solution, CliError> {
        Ok(solve_bvp(&BvpProblem { mesh: mesh.clone(), operator: op.clone(), forcing: forcing.clone(), lambda: 0.0 })?)
    };
    let local = match reference {
        LimitReference::Local => Some(solve(&Operator::Local)?),
        _ => None,
    };
    let sols: Vec<Solution> = ops.par_iter().map(solve).collect::<Result<_, _>>()?;
    let mut rep = StudyReport::new(&["delta", "max_dev", "l2_dev"]);
    let mut devs = Vec::new();
    for (d, sol) in deltas.iter().zip(&sols) {
        let e = match &reference {
            LimitReference::Local => error_norms(sol, Reference::Solution(local.as_ref().expect("solved above")))?,
            LimitReference::FractionalPoisson(alpha) => {
                let a = *alpha;
                error_norms(sol, Reference::Function(&move |x| exact_fractional_poisson(a, x)))?
            }
            LimitReference::Function(b) => error_norms(sol, Reference::Function(b.f.as_ref()))?,
        };
        devs.push(e.linf);
        rep.push(vec![(*d).into(), e.linf.into(), e.l2.into()]);
        writeln!(log, "study-limit delta={d} max_dev={:.6e} l2_dev={:.6e}", e.linf, e.l2)?;
    }
    let monotone = devs.windows(2).all(|w| w[1] < w[0]);
    writeln!(log, "study-limit monotone={}", if monotone { "yes" } else { "no" })?;
    out.write("limit.csv", |w| rep.write_csv(w))?;
    Ok(())
}

/// Reads a config file and runs `command`; used by the binary.
pub fn run_file(command: Command, path: &Path, prefix: Option<&str>, log: &mut dyn Write) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: Config = text.parse()?;
    let from_file = cfg.raw("out").map(str::to_string);
    let prefix = prefix.map(str::to_string).or(from_file).unwrap_or_else(|| "nlfem".to_string());
    run(command, &cfg, &prefix, log)
}
