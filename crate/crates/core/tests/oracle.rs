//! Assembled stiffness entries against brute-force double integration on
//! random nonuniform meshes.

use nlfem::assembly::assemble;
use nlfem::oracle::{entry_bruteforce, QuadratureSpec};
use nlfem::{Kernel, Mesh1D};
use proptest::prelude::*;

fn random_mesh() -> impl Strategy<Value = Mesh1D> {
    prop::collection::vec(0.2f64..1.0, 4..8).prop_map(|widths| {
        let total: f64 = widths.iter().sum();
        let mut nodes = vec![0.0];
        for w in &widths {
            nodes.push(nodes.last().unwrap() + w / total);
        }
        *nodes.last_mut().unwrap() = 1.0;
        Mesh1D::from_nodes(nodes).unwrap()
    })
}

fn kernel() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        (-0.9f64..1.9, 0.05f64..0.6).prop_map(|(a, d)| Kernel::fractional(a, d).unwrap()),
        (0.05f64..0.6).prop_map(|d| Kernel::constant_box(d).unwrap()),
        (0.2f64..1.8, 0.05f64..0.6).prop_map(|(a, d)| Kernel::truncated_infinite(a, d).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn assembled_entries_match_double_integration(mesh in random_mesh(), k in kernel()) {
        let s = assemble(&mesh, &k).unwrap();
        let n = mesh.interior_count();
        let spec = QuadratureSpec::default();
        let scale = (1..=n).map(|j| s.get(j - 1, j - 1).abs()).fold(0.0, f64::max);
        for j in 1..=n {
            for i in j..=n.min(j + 2) {
                let reference = entry_bruteforce(&mesh, &k, j, i, &spec).unwrap();
                let got = s.get(j - 1, i - 1);
                prop_assert!((got - reference).abs() <= 1e-8 * scale, "({j},{i}): {got} vs {reference}");
            }
        }
    }
}
