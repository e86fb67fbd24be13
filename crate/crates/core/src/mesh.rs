//! One-dimensional partitions `a = x_0 < x_1 < ... < x_{N+1} = b`.
//!
//! Every generator returns the *full* node list including both endpoints.
//! The unknowns of a P1 discretization with a homogeneous volume constraint
//! sit at the interior nodes `x_1..x_N`, so `interior_count() == nodes.len() - 2`.
//! Each family takes its own natural size parameter (see [`MeshSpec`]).

use std::fmt;
use std::io::Write;

use crate::error::{invalid, Error, Result};

/// Generating scheme of a mesh, with the parameters it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshFamily {
    Uniform,
    GradedBoundary { gamma: f64 },
    GradedCenter { gamma: f64 },
    Geometric { q: f64 },
    Shishkin { eta: f64 },
    /// Built from an explicit node list.
    Explicit,
}

/// Recipe for a mesh on `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshSpec {
    /// `interior` equally spaced interior nodes (`interior + 1` elements).
    Uniform { a: f64, b: f64, interior: usize },
    /// Algebraic clustering toward both endpoints; `elements` must be even.
    GradedBoundary {
        a: f64,
        b: f64,
        elements: usize,
        gamma: f64,
    },
    /// Algebraic clustering toward the midpoint; `elements` must be even.
    GradedCenter {
        a: f64,
        b: f64,
        elements: usize,
        gamma: f64,
    },
    /// Geometric refinement toward both endpoints with ratio `q`:
    /// `2n - 1` interior nodes plus the two endpoints.
    Geometric { a: f64, b: f64, n: usize, q: f64 },
    /// Piecewise uniform: `m` fine elements on each boundary strip of
    /// relative width `eta`, `n` coarse elements in between.
    Shishkin {
        a: f64,
        b: f64,
        m: usize,
        n: usize,
        eta: f64,
    },
}

impl MeshSpec {
    pub fn interval(&self) -> (f64, f64) {
        match *self {
            MeshSpec::Uniform { a, b, .. }
            | MeshSpec::GradedBoundary { a, b, .. }
            | MeshSpec::GradedCenter { a, b, .. }
            | MeshSpec::Geometric { a, b, .. }
            | MeshSpec::Shishkin { a, b, .. } => (a, b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.interval();
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid("interval", format!("need finite a < b, got ({a}, {b})")));
        }
        match *self {
            MeshSpec::Uniform { interior, .. } => {
                if interior == 0 {
                    return Err(invalid("N", "uniform mesh needs at least one interior node"));
                }
            }
            MeshSpec::GradedBoundary { elements, gamma, .. }
            | MeshSpec::GradedCenter { elements, gamma, .. } => {
                if elements < 2 || elements % 2 != 0 {
                    return Err(invalid(
                        "N",
                        format!("graded meshes need an even element count >= 2, got {elements}"),
                    ));
                }
                if !(gamma >= 1.0) || !gamma.is_finite() {
                    return Err(invalid("gamma", format!("need gamma >= 1, got {gamma}")));
                }
            }
            MeshSpec::Geometric { n, q, .. } => {
                if n == 0 {
                    return Err(invalid("N", "geometric mesh needs n >= 1"));
                }
                if !(q > 0.0 && q < 1.0) {
                    return Err(invalid("q", format!("need 0 < q < 1, got {q}")));
                }
                let smallest = q.powi(n as i32 - 1) * 0.5 * (b - a);
                if smallest <= 64.0 * f64::EPSILON * a.abs().max(b.abs()) {
                    return Err(invalid("q", format!("q^(n-1) = {:e} leaves elements below rounding", q.powi(n as i32 - 1))));
                }
            }
            MeshSpec::Shishkin { m, n, eta, .. } => {
                if m == 0 || n == 0 {
                    return Err(invalid("M", "Shishkin mesh needs m >= 1 and n >= 1"));
                }
                if !(eta > 0.0 && eta < 0.5) {
                    return Err(invalid("eta", format!("need 0 < eta < 1/2, got {eta}")));
                }
            }
        }
        Ok(())
    }
}

/// A validated partition of `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    family: MeshFamily,
}

/// Summary of element sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub h_min: f64,
    pub h_max: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Mesh1D {
    /// Wraps an explicit node list, checking it is strictly increasing with at
    /// least one interior node.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        Self::with_family(nodes, MeshFamily::Explicit)
    }

    fn with_family(nodes: Vec<f64>, family: MeshFamily) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(invalid("nodes", "need at least 3 nodes (one interior unknown)"));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(invalid("nodes", "non-finite node coordinate"));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(invalid(
                "nodes",
                format!("not strictly increasing at index {}: {} >= {}", i, nodes[i], nodes[i + 1]),
            ));
        }
        Ok(Mesh1D { nodes, family })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn family(&self) -> MeshFamily {
        self.family
    }

    pub fn a(&self) -> f64 {
        self.nodes[0]
    }

    pub fn b(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Number of interior nodes (= number of unknowns).
    pub fn interior_count(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn element_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// `h_j = x_j - x_{j-1}` for `j = 1..=N+1`.
    pub fn h(&self, j: usize) -> f64 {
        self.nodes[j] - self.nodes[j - 1]
    }

    pub fn element_sizes(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn interior_nodes(&self) -> &[f64] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    /// True when all element sizes agree to a relative `1e-12`.
    pub fn is_uniform(&self) -> bool {
        let s = self.stats();
        s.h_max - s.h_min <= 1e-12 * s.h_max
    }

    pub fn stats(&self) -> MeshStats {
        let (mut h_min, mut h_max) = (f64::INFINITY, 0.0f64);
        for w in self.nodes.windows(2) {
            let h = w[1] - w[0];
            h_min = h_min.min(h);
            h_max = h_max.max(h);
        }
        MeshStats {
            h_min,
            h_max,
            ratio: h_max / h_min,
            count: self.element_count(),
        }
    }

    /// Writes `index,x` CSV, one node per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,x")?;
        for (i, x) in self.nodes.iter().enumerate() {
            writeln!(w, "{},{:.16e}", i, x)?;
        }
        Ok(())
    }
}

impl fmt::Display for Mesh1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.stats();
        write!(
            f,
            "{:?} mesh on ({}, {}): {} elements, h in [{:.3e}, {:.3e}]",
            self.family,
            self.a(),
            self.b(),
            s.count,
            s.h_min,
            s.h_max
        )
    }
}

pub fn mesh_stats(mesh: &Mesh1D) -> MeshStats {
    mesh.stats()
}

pub fn generate_mesh(spec: &MeshSpec) -> Result<Mesh1D> {
    spec.validate()?;
    let (a, b) = spec.interval();
    let len = b - a;
    let (mut nodes, family) = match *spec {
        MeshSpec::Uniform { interior, .. } => {
            let n1 = (interior + 1) as f64;
            let nodes = (0..=interior + 1).map(|i| a + len * (i as f64) / n1).collect();
            (nodes, MeshFamily::Uniform)
        }
        MeshSpec::GradedBoundary { elements, gamma, .. } => {
            let n = elements as f64;
            let half = elements / 2;
            let nodes = (0..=elements)
                .map(|j| {
                    let t = 2.0 * j as f64 / n;
                    if j < half {
                        a + 0.5 * len * t.powf(gamma)
                    } else {
                        b - 0.5 * len * (2.0 - t).powf(gamma)
                    }
                })
                .collect();
            (nodes, MeshFamily::GradedBoundary { gamma })
        }
        MeshSpec::GradedCenter { elements, gamma, .. } => {
            let n = elements as f64;
            let half = elements / 2;
            let mid = 0.5 * (a + b);
            let nodes = (0..=elements)
                .map(|j| {
                    let t = 2.0 * j as f64 / n;
                    if j < half {
                        mid - 0.5 * len * (1.0 - t).powf(gamma)
                    } else {
                        mid + 0.5 * len * (t - 1.0).powf(gamma)
                    }
                })
                .collect();
            (nodes, MeshFamily::GradedCenter { gamma })
        }
        MeshSpec::Geometric { n, q, .. } => {
            let mut nodes = Vec::with_capacity(2 * n + 1);
            nodes.push(a);
            for j in 1..n {
                nodes.push(a + q.powi((n - j) as i32) * 0.5 * len);
            }
            for j in n..2 * n {
                nodes.push(b - q.powi((j - n) as i32) * 0.5 * len);
            }
            nodes.push(b);
            (nodes, MeshFamily::Geometric { q })
        }
        MeshSpec::Shishkin { m, n, eta, .. } => {
            let fine = eta * len / m as f64;
            let coarse = (1.0 - 2.0 * eta) * len / n as f64;
            let left_strip = a + eta * len;
            let right_strip = b - eta * len;
            let mut nodes = Vec::with_capacity(2 * m + n + 1);
            for i in 0..m {
                nodes.push(a + fine * i as f64);
            }
            for i in 0..n {
                nodes.push(left_strip + coarse * i as f64);
            }
            for i in 0..m {
                nodes.push(right_strip + fine * i as f64);
            }
            nodes.push(b);
            (nodes, MeshFamily::Shishkin { eta })
        }
    };
    let last = nodes.len() - 1;
    nodes[0] = a;
    nodes[last] = b;
    Mesh1D::with_family(nodes, family).map_err(|e| match e {
        // parameters were valid, so a degenerate node list means the
        // grading underflowed (e.g. gamma huge with many elements)
        Error::InvalidParameter { reason, .. } => invalid("spec", format!("degenerate mesh: {reason}")),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn uniform_three_interior() {
        let m = generate_mesh(&MeshSpec::Uniform { a: 0.0, b: 1.0, interior: 3 }).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let s = m.stats();
        assert_eq!((s.h_min, s.h_max, s.ratio, s.count), (0.25, 0.25, 1.0, 4));
    }

    #[test]
    fn graded_gamma_one_is_uniform() {
        for elements in [2usize, 4, 10, 64] {
            let g = generate_mesh(&MeshSpec::GradedBoundary { a: -1.0, b: 2.0, elements, gamma: 1.0 }).unwrap();
            let u = generate_mesh(&MeshSpec::Uniform { a: -1.0, b: 2.0, interior: elements - 1 }).unwrap();
            for (x, y) in g.nodes().iter().zip(u.nodes()) {
                assert!(close(*x, *y), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn graded_boundary_gamma_two() {
        let m = generate_mesh(&MeshSpec::GradedBoundary { a: 0.0, b: 1.0, elements: 4, gamma: 2.0 }).unwrap();
        assert!(close(m.nodes()[1], 0.125));
        assert!(close(m.nodes()[2], 0.5));
        assert!(close(m.nodes()[3], 0.875));
        let s = m.stats();
        assert!(close(s.h_min, 0.125) && close(s.h_max, 0.375) && close(s.ratio, 3.0));
    }

    #[test]
    fn shishkin_sizes() {
        let m = generate_mesh(&MeshSpec::Shishkin { a: 0.0, b: 1.0, m: 2, n: 4, eta: 0.2 }).unwrap();
        let h = m.element_sizes();
        assert_eq!(h.len(), 8);
        for &hi in h[..2].iter().chain(&h[6..]) {
            assert!(close(hi, 0.1), "{hi}");
        }
        for &hi in &h[2..6] {
            assert!(close(hi, 0.15), "{hi}");
        }
    }

    #[test]
    fn geometric_nodes_and_ratio() {
        let m = generate_mesh(&MeshSpec::Geometric { a: 0.0, b: 1.0, n: 3, q: 0.5 }).unwrap();
        let expect = [0.0, 0.125, 0.25, 0.5, 0.75, 0.875, 1.0];
        assert_eq!(m.nodes().len(), 7);
        for (x, e) in m.nodes().iter().zip(expect) {
            assert!(close(*x, e));
        }
        // consecutive sizes in each half differ by 1/q
        let s = m.stats();
        assert!(close(s.ratio, 2.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_mesh(&MeshSpec::GradedBoundary { a: 0.0, b: 1.0, elements: 5, gamma: 2.0 }).is_err());
        assert!(generate_mesh(&MeshSpec::GradedCenter { a: 0.0, b: 1.0, elements: 7, gamma: 2.0 }).is_err());
        assert!(generate_mesh(&MeshSpec::GradedBoundary { a: 0.0, b: 1.0, elements: 4, gamma: 0.5 }).is_err());
        assert!(generate_mesh(&MeshSpec::Geometric { a: 0.0, b: 1.0, n: 3, q: 1.0 }).is_err());
        assert!(generate_mesh(&MeshSpec::Geometric { a: 0.0, b: 1.0, n: 3, q: 0.0 }).is_err());
        assert!(generate_mesh(&MeshSpec::Shishkin { a: 0.0, b: 1.0, m: 2, n: 2, eta: 0.5 }).is_err());
        assert!(generate_mesh(&MeshSpec::Shishkin { a: 0.0, b: 1.0, m: 2, n: 2, eta: 0.0 }).is_err());
        assert!(generate_mesh(&MeshSpec::Uniform { a: 1.0, b: 0.0, interior: 3 }).is_err());
        assert!(Mesh1D::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn csv_dump() {
        let m = generate_mesh(&MeshSpec::Uniform { a: 0.0, b: 1.0, interior: 1 }).unwrap();
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "index,x");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1,5.0000000000000000e-1"));
    }

    fn spec_strategy() -> impl Strategy<Value = MeshSpec> {
        let ab = (-5.0f64..5.0, 0.01f64..10.0).prop_map(|(a, l)| (a, a + l));
        prop_oneof![
            (ab.clone(), 1usize..300).prop_map(|((a, b), interior)| MeshSpec::Uniform { a, b, interior }),
            (ab.clone(), 1usize..150, 1.0f64..4.0)
                .prop_map(|((a, b), k, gamma)| MeshSpec::GradedBoundary { a, b, elements: 2 * k, gamma }),
            (ab.clone(), 1usize..150, 1.0f64..4.0)
                .prop_map(|((a, b), k, gamma)| MeshSpec::GradedCenter { a, b, elements: 2 * k, gamma }),
            (ab.clone(), 1usize..40, 0.3f64..0.99)
                .prop_map(|((a, b), n, q)| MeshSpec::Geometric { a, b, n, q })
                .prop_filter("resolvable", |s| s.validate().is_ok()),
            (ab, 1usize..50, 1usize..50, 0.01f64..0.49)
                .prop_map(|((a, b), m, n, eta)| MeshSpec::Shishkin { a, b, m, n, eta }),
        ]
    }

    proptest! {
        #[test]
        fn generated_meshes_satisfy_invariants(spec in spec_strategy()) {
            let mesh = generate_mesh(&spec).unwrap();
            let (a, b) = spec.interval();
            prop_assert_eq!(mesh.a(), a);
            prop_assert_eq!(mesh.b(), b);
            let h = mesh.element_sizes();
            prop_assert!(h.iter().all(|&x| x > 0.0));
            let total: f64 = h.iter().sum();
            prop_assert!((total - (b - a)).abs() <= 1e-14 * (b - a) * h.len() as f64);
            let s = mesh.stats();
            prop_assert!(s.ratio >= 1.0);
        }

        #[test]
        fn graded_meshes_are_symmetric(k in 1usize..100, gamma in 1.0f64..3.5, center in any::<bool>()) {
            let spec = if center {
                MeshSpec::GradedCenter { a: -1.0, b: 3.0, elements: 2 * k, gamma }
            } else {
                MeshSpec::GradedBoundary { a: -1.0, b: 3.0, elements: 2 * k, gamma }
            };
            let mesh = generate_mesh(&spec).unwrap();
            let x = mesh.nodes();
            let n = x.len() - 1;
            for j in 0..=n {
                prop_assert!((x[j] + x[n - j] - 2.0).abs() <= 1e-14 * 4.0);
            }
        }

        #[test]
        fn graded_refinement_shrinks_h_min(k in 1usize..200, gamma in 1.1f64..3.0) {
            let coarse = generate_mesh(&MeshSpec::GradedBoundary { a: 0.0, b: 1.0, elements: 2 * k, gamma }).unwrap();
            let fine = generate_mesh(&MeshSpec::GradedBoundary { a: 0.0, b: 1.0, elements: 4 * k, gamma }).unwrap();
            prop_assert!(fine.stats().h_min < coarse.stats().h_min);
        }
    }
}
