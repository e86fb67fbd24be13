//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, sweeps are comma lists
//! (`N = 64, 128, 256`). Keys are case-sensitive. Every key in the file must
//! be consumed by the command; leftovers are reported as unknown.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use crate::kernel::Kernel;
use crate::mesh::{generate_mesh, Mesh1D, MeshSpec};
use crate::quadrature::integrate_breaks;
use crate::solve::{Operator, ScalarFn};

use super::CliError;

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, (usize, String)>,
    used: RefCell<BTreeSet<String>>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl FromStr for Config {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(config_err(format!("line {}: empty key", i + 1)));
            }
            if entries.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
                return Err(config_err(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }
        Ok(Config { entries, used: RefCell::new(BTreeSet::new()) })
    }
}

impl Config {
    pub fn raw(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key).map(|(_, v)| v.as_str());
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| config_err(format!("key `{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.get(key)?.ok_or_else(|| config_err(format!("missing required key `{key}`")))
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list; a single value is a one-element list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let items: Result<Vec<T>, _> = v
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| config_err(format!("key `{key}`: cannot parse `{}`", s.trim()))))
            .collect();
        let items = items?;
        if items.is_empty() {
            return Err(config_err(format!("key `{key}`: empty list")));
        }
        Ok(Some(items))
    }

    pub fn require_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        self.list(key)?.ok_or_else(|| config_err(format!("missing required key `{key}`")))
    }

    /// Marks keys as consumed without reading them.
    pub fn touch(&self, keys: &[&str]) {
        for k in keys {
            if self.entries.contains_key(*k) {
                self.used.borrow_mut().insert(k.to_string());
            }
        }
    }

    /// Errors on the first key that no part of the command read.
    pub fn check_all_used(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        match self.entries.iter().find(|(k, _)| !used.contains(*k)) {
            Some((k, (line, _))) => Err(config_err(format!("unknown key `{k}` (line {line})"))),
            None => Ok(()),
        }
    }
}

/// A named scalar function from the builtin registry.
#[derive(Clone)]
pub struct Builtin {
    pub name: String,
    pub f: ScalarFn,
    /// Points where the function is not smooth.
    pub kinks: Vec<f64>,
}

impl std::fmt::Debug for Builtin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Builtin").field("name", &self.name).field("kinks", &self.kinks).finish()
    }
}

/// Names accepted by [`builtin`], besides numeric constants.
pub const BUILTIN_NAMES: &[&str] = &["x^2", "x^2(1-x)^2", "1-x^2", "sin", "step", "gaussian", "jump"];

/// Resolves a function name: a numeric constant, `x^2`, `x^2(1-x)^2`,
/// `1-x^2`, `sin`, `step` (0.5 left of 0, 1 right of it), `gaussian`
/// (`exp(-100 x^2)`), or `jump` (`2x^2` below 0.5, `(1-x)^2` above).
pub fn builtin(name: &str) -> Option<Builtin> {
    let name = name.trim();
    if let Ok(c) = name.parse::<f64>() {
        return Some(Builtin { name: name.into(), f: Arc::new(move |_| c), kinks: vec![] });
    }
    let (f, kinks): (ScalarFn, Vec<f64>) = match name {
        "x^2" => (Arc::new(|x| x * x), vec![]),
        "x^2(1-x)^2" => (Arc::new(|x| x * x * (1.0 - x) * (1.0 - x)), vec![]),
        "1-x^2" => (Arc::new(|x| 1.0 - x * x), vec![]),
        "sin" => (Arc::new(f64::sin), vec![]),
        "step" => (Arc::new(|x| if x < 0.0 { 0.5 } else { 1.0 }), vec![0.0]),
        "gaussian" => (Arc::new(|x| (-100.0 * x * x).exp()), vec![]),
        "jump" => (Arc::new(|x| if x < 0.5 { 2.0 * x * x } else { (1.0 - x) * (1.0 - x) }), vec![0.5]),
        _ => return None,
    };
    Some(Builtin { name: name.into(), f, kinks })
}

pub fn function(cfg: &Config, key: &str) -> Result<Option<Builtin>, CliError> {
    match cfg.raw(key) {
        None => Ok(None),
        Some(v) => builtin(v).map(Some).ok_or_else(|| {
            config_err(format!("key `{key}`: unknown function `{v}` (known: constants, {})", BUILTIN_NAMES.join(", ")))
        }),
    }
}

/// Mesh keys: `mesh` (family), `a`, `b`, the size `N`, and per family
/// `gamma`, `q`, `eta`, `M`.
pub fn mesh_spec(cfg: &Config, size: usize) -> Result<MeshSpec, CliError> {
    let family = cfg.or("mesh", "uniform".to_string())?;
    let a = cfg.or("a", 0.0)?;
    let b = cfg.or("b", 1.0)?;
    let spec = match family.as_str() {
        "uniform" => MeshSpec::Uniform { a, b, interior: size },
        "graded" | "graded_boundary" => MeshSpec::GradedBoundary { a, b, elements: size, gamma: cfg.require("gamma")? },
        "graded_center" => MeshSpec::GradedCenter { a, b, elements: size, gamma: cfg.require("gamma")? },
        "geometric" => MeshSpec::Geometric { a, b, n: size, q: cfg.require("q")? },
        "shishkin" => MeshSpec::Shishkin { a, b, m: cfg.require("M")?, n: size, eta: cfg.require("eta")? },
        other => return Err(config_err(format!("key `mesh`: unknown family `{other}`"))),
    };
    Ok(spec)
}

pub fn mesh(cfg: &Config, size: usize) -> Result<Mesh1D, CliError> {
    Ok(generate_mesh(&mesh_spec(cfg, size)?)?)
}

/// Horizon for a given mesh: `delta` if set, else `delta_factor * h_max`.
pub fn horizon(cfg: &Config, delta: Option<f64>, mesh: &Mesh1D) -> Result<f64, CliError> {
    if let Some(d) = delta {
        return Ok(d);
    }
    match cfg.get::<f64>("delta_factor")? {
        Some(c) => Ok(c * mesh.stats().h_max),
        None => Err(config_err("missing required key `delta` (or `delta_factor`)")),
    }
}

/// Kernel keys: `kernel`, `alpha`, `delta` (or `delta_factor`), and
/// `profile` for `custom`. `kernel = local` selects `-u''`.
pub fn operator(cfg: &Config, alpha: Option<f64>, delta: Option<f64>, mesh: &Mesh1D) -> Result<Operator, CliError> {
    let kind = cfg.or("kernel", "fractional".to_string())?;
    let alpha = match alpha {
        Some(a) => Some(a),
        None => cfg.get("alpha")?,
    };
    let need_alpha = || alpha.ok_or_else(|| config_err("missing required key `alpha`"));
    let delta = match delta {
        Some(d) => Some(d),
        None => cfg.get("delta")?,
    };
    let k = match kind.as_str() {
        "local" => return Ok(Operator::Local),
        "fractional" => Kernel::fractional(need_alpha()?, horizon(cfg, delta, mesh)?)?,
        "box" => Kernel::constant_box(horizon(cfg, delta, mesh)?)?,
        "fractional_infinite" => Kernel::fractional_infinite(need_alpha()?)?,
        "truncated_infinite" => Kernel::truncated_infinite(need_alpha()?, horizon(cfg, delta, mesh)?)?,
        "custom" => custom_kernel(&cfg.require::<String>("profile")?, horizon(cfg, delta, mesh)?)?,
        other => return Err(config_err(format!("key `kernel`: unknown kernel `{other}`"))),
    };
    Ok(Operator::Nonlocal(k))
}

/// `rho(s) = c p(s / delta)` on `(0, delta)` with `c` fixing the second
/// moment to 1. Profiles: `constant`, `linear` (`1 - t`), `gaussian`
/// (`exp(-4 t^2)`), `cosine` (`(1 + cos(pi t)) / 2`).
pub fn custom_kernel(profile: &str, delta: f64) -> Result<Kernel, CliError> {
    let p: fn(f64) -> f64 = match profile {
        "constant" => |_| 1.0,
        "linear" => |t| 1.0 - t,
        "gaussian" => |t| (-4.0 * t * t).exp(),
        "cosine" => |t| 0.5 * (1.0 + (PI * t).cos()),
        other => return Err(config_err(format!("key `profile`: unknown profile `{other}`"))),
    };
    let m2 = integrate_breaks(&|t: f64| t * t * p(t), &[0.0, 1.0], 0.0, 1e-15, 30).value;
    let c = 1.0 / (m2 * delta.powi(3));
    Ok(Kernel::custom(delta, move |s| c * p(s / delta))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files() {
        let cfg: Config = "# comment\nN = 64, 128\nalpha=0.5 # trailing\n\nmesh = graded\n".parse().unwrap();
        assert_eq!(cfg.require_list::<usize>("N").unwrap(), vec![64, 128]);
        assert_eq!(cfg.require::<f64>("alpha").unwrap(), 0.5);
        assert!(matches!(cfg.check_all_used(), Err(CliError::Config(m)) if m.contains("`mesh`")));
        assert!("novalue\n".parse::<Config>().is_err());
        assert!("a=1\na=2\n".parse::<Config>().is_err());
    }

    #[test]
    fn parse_errors_name_the_key() {
        let cfg: Config = "alpha = half\n".parse().unwrap();
        match cfg.require::<f64>("alpha") {
            Err(CliError::Config(m)) => assert!(m.contains("`alpha`")),
            other => panic!("{other:?}"),
        }
        match cfg.require::<f64>("delta") {
            Err(CliError::Config(m)) => assert!(m.contains("`delta`")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn registry() {
        assert_eq!((builtin("2").unwrap().f)(0.3), 2.0);
        assert_eq!((builtin("x^2(1-x)^2").unwrap().f)(0.5), 0.0625);
        assert_eq!((builtin("step").unwrap().f)(-1.0), 0.5);
        assert_eq!((builtin("jump").unwrap().f)(0.25), 0.125);
        assert_eq!((builtin("jump").unwrap().f)(0.75), 0.0625);
        assert!(builtin("cosh").is_none());
    }

    #[test]
    fn custom_profiles_are_normalized() {
        for p in ["constant", "linear", "gaussian", "cosine"] {
            let k = custom_kernel(p, 0.3).unwrap();
            assert!((k.moment(2, 0.0, 0.3).unwrap() - 1.0).abs() < 1e-11, "{p}");
        }
        let c = custom_kernel("constant", 0.5).unwrap();
        assert!((c.eval(0.1) - 24.0).abs() < 1e-12);
    }
}
