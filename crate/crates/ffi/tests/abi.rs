use std::ffi::CStr;
use std::ptr;

use nlfem_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(nlfem_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn mesh_round_trip() {
    let mut mesh = ptr::null_mut();
    assert_eq!(unsafe { nlfem_mesh_uniform(0.0, 1.0, 3, &mut mesh) }, NlfemStatus::Ok);
    let mut count = 0;
    assert_eq!(unsafe { nlfem_mesh_node_count(mesh, &mut count) }, NlfemStatus::Ok);
    assert_eq!(count, 5);
    let mut buf = [0.0; 5];
    assert_eq!(unsafe { nlfem_mesh_nodes(mesh, buf.as_mut_ptr(), 5) }, NlfemStatus::Ok);
    assert_eq!(buf, [0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(unsafe { nlfem_mesh_nodes(mesh, buf.as_mut_ptr(), 4) }, NlfemStatus::BufferTooSmall);
    unsafe { nlfem_mesh_free(mesh) };
}

#[test]
fn invalid_arguments_report_a_message() {
    let mut mesh = ptr::null_mut();
    assert_eq!(unsafe { nlfem_mesh_uniform(1.0, 0.0, 3, &mut mesh) }, NlfemStatus::InvalidArgument);
    assert!(mesh.is_null());
    assert!(!last_error().is_empty());
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { nlfem_kernel_fractional(2.5, 0.1, &mut k) }, NlfemStatus::InvalidArgument);
    assert_eq!(unsafe { nlfem_mesh_node_count(ptr::null(), &mut 0) }, NlfemStatus::NullPointer);
    assert!(last_error().contains("mesh"));
    let nodes = [0.0, 0.5, 0.5, 1.0];
    assert_eq!(unsafe { nlfem_mesh_from_nodes(nodes.as_ptr(), 4, &mut mesh) }, NlfemStatus::InvalidArgument);
}

#[test]
fn assemble_box_kernel_and_read_entries() {
    let mut mesh = ptr::null_mut();
    let mut kernel = ptr::null_mut();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(nlfem_mesh_uniform(0.0, 1.0, 15, &mut mesh), NlfemStatus::Ok);
        assert_eq!(nlfem_kernel_box(0.125, &mut kernel), NlfemStatus::Ok);
        assert_eq!(nlfem_assemble(mesh, kernel, &mut s), NlfemStatus::Ok);
        let (mut n, mut bw) = (0, 0);
        assert_eq!(nlfem_matrix_size(s, &mut n), NlfemStatus::Ok);
        assert_eq!(nlfem_matrix_half_bandwidth(s, &mut bw), NlfemStatus::Ok);
        assert_eq!(n, 15);
        assert_eq!(bw, 3);
        // uniform box kernel with delta = 2h: t_0 = 0.625 / h
        let mut t0 = 0.0;
        assert_eq!(nlfem_matrix_get(s, 7, 7, &mut t0), NlfemStatus::Ok);
        assert!((t0 - 0.625 * 16.0).abs() < 1e-12);
        let (mut a, mut b) = (0.0, 0.0);
        nlfem_matrix_get(s, 2, 4, &mut a);
        nlfem_matrix_get(s, 4, 2, &mut b);
        assert_eq!(a, b);
        assert_eq!(nlfem_matrix_get(s, 15, 0, &mut a), NlfemStatus::InvalidArgument);
        nlfem_matrix_free(s);
        nlfem_kernel_free(kernel);
        nlfem_mesh_free(mesh);
    }
}

#[test]
fn local_solve_matches_parabola() {
    let mut mesh = ptr::null_mut();
    unsafe {
        assert_eq!(nlfem_mesh_uniform(-1.0, 1.0, 9, &mut mesh), NlfemStatus::Ok);
        let f = [2.0; 11];
        let mut u = [0.0; 9];
        assert_eq!(nlfem_solve_bvp(mesh, ptr::null(), f.as_ptr(), 11, u.as_mut_ptr(), 9), NlfemStatus::Ok);
        for (i, v) in u.iter().enumerate() {
            let x = -1.0 + 0.2 * (i + 1) as f64;
            assert!((v - (1.0 - x * x)).abs() < 1e-12);
        }
        assert_eq!(nlfem_solve_bvp(mesh, ptr::null(), f.as_ptr(), 10, u.as_mut_ptr(), 9), NlfemStatus::InvalidArgument);
        nlfem_mesh_free(mesh);
    }
}

#[test]
fn null_handles_are_rejected_and_freeing_null_is_a_no_op() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { nlfem_assemble(ptr::null(), ptr::null(), &mut out) }, NlfemStatus::NullPointer);
    assert_eq!(unsafe { nlfem_mesh_uniform(0.0, 1.0, 3, ptr::null_mut()) }, NlfemStatus::NullPointer);
    unsafe {
        nlfem_mesh_free(ptr::null_mut());
        nlfem_kernel_free(ptr::null_mut());
        nlfem_matrix_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_exports() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/nlfem.h")).unwrap();
    for name in ["nlfem_last_error", "nlfem_mesh_uniform", "nlfem_assemble", "nlfem_solve_bvp", "NLFEM_STATUS_OK", "NlfemMesh"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
