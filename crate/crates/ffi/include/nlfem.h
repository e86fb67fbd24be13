#ifndef NLFEM_H
#define NLFEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every exported function.
typedef enum NlfemStatus {
  NLFEM_STATUS_OK = 0,
  NLFEM_STATUS_NULL_POINTER = 1,
  NLFEM_STATUS_INVALID_ARGUMENT = 2,
  NLFEM_STATUS_BUFFER_TOO_SMALL = 3,
  NLFEM_STATUS_NUMERICAL = 4,
  NLFEM_STATUS_PANIC = 5,
} NlfemStatus;

// An interaction kernel.
typedef struct NlfemKernel NlfemKernel;

// A symmetric stiffness matrix.
typedef struct NlfemMatrix NlfemMatrix;

// A one-dimensional mesh.
typedef struct NlfemMesh NlfemMesh;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or an empty string.
// The pointer stays valid until the next call into the library on the
// same thread.
const char *nlfem_last_error(void);

// Uniform mesh of `(a, b)` with `interior` interior nodes.
//
// # Safety
// `out` must be valid for writing a pointer.
enum NlfemStatus nlfem_mesh_uniform(double a, double b, uintptr_t interior, struct NlfemMesh **out);

// Mesh of `(a, b)` with `elements` elements graded toward both endpoints
// with exponent `gamma`.
//
// # Safety
// `out` must be valid for writing a pointer.
enum NlfemStatus nlfem_mesh_graded(double a,
                                   double b,
                                   uintptr_t elements,
                                   double gamma,
                                   struct NlfemMesh **out);

// Mesh from `len` strictly increasing node coordinates, endpoints included.
//
// # Safety
// `nodes` must point to `len` readable doubles and `out` must be valid for
// writing a pointer.
enum NlfemStatus nlfem_mesh_from_nodes(const double *nodes, uintptr_t len, struct NlfemMesh **out);

// Number of nodes, endpoints included.
//
// # Safety
// `mesh` must be a live handle and `out` valid for writing.
enum NlfemStatus nlfem_mesh_node_count(const struct NlfemMesh *mesh, uintptr_t *out);

// Copies the node coordinates into `buf`, which must hold at least the
// node count.
//
// # Safety
// `mesh` must be a live handle and `buf` valid for `len` writes.
enum NlfemStatus nlfem_mesh_nodes(const struct NlfemMesh *mesh, double *buf, uintptr_t len);

// # Safety
// `mesh` must be null or a handle not yet freed.
void nlfem_mesh_free(struct NlfemMesh *mesh);

// Fractional kernel `(2 - alpha) / delta^(2 - alpha) * s^(-1 - alpha)` on `(0, delta)`.
//
// # Safety
// `out` must be valid for writing a pointer.
enum NlfemStatus nlfem_kernel_fractional(double alpha, double delta, struct NlfemKernel **out);

// Constant kernel `3 / delta^3` on `(0, delta)`.
//
// # Safety
// `out` must be valid for writing a pointer.
enum NlfemStatus nlfem_kernel_box(double delta, struct NlfemKernel **out);

// Fractional-Laplacian kernel `C_alpha s^(-1 - alpha)` cut off at `delta`.
//
// # Safety
// `out` must be valid for writing a pointer.
enum NlfemStatus nlfem_kernel_truncated_infinite(double alpha,
                                                 double delta,
                                                 struct NlfemKernel **out);

// # Safety
// `kernel` must be null or a handle not yet freed.
void nlfem_kernel_free(struct NlfemKernel *kernel);

// Stiffness matrix of `kernel` on `mesh`.
//
// # Safety
// `mesh` and `kernel` must be live handles and `out` valid for writing.
enum NlfemStatus nlfem_assemble(const struct NlfemMesh *mesh,
                                const struct NlfemKernel *kernel,
                                struct NlfemMatrix **out);

// Dimension (number of interior nodes).
//
// # Safety
// `matrix` must be a live handle and `out` valid for writing.
enum NlfemStatus nlfem_matrix_size(const struct NlfemMatrix *matrix, uintptr_t *out);

// Largest `|i - j|` with a stored entry.
//
// # Safety
// `matrix` must be a live handle and `out` valid for writing.
enum NlfemStatus nlfem_matrix_half_bandwidth(const struct NlfemMatrix *matrix, uintptr_t *out);

// Entry `(i, j)`, zero-based.
//
// # Safety
// `matrix` must be a live handle and `out` valid for writing.
enum NlfemStatus nlfem_matrix_get(const struct NlfemMatrix *matrix,
                                  uintptr_t i,
                                  uintptr_t j,
                                  double *out);

// # Safety
// `matrix` must be null or a handle not yet freed.
void nlfem_matrix_free(struct NlfemMatrix *matrix);

// Solves the volume-constrained problem with forcing given by its values at
// every node (`f_len` = node count). A null `kernel` selects `-u''`.
// Writes the interior solution (node count - 2 values) to `u`.
//
// # Safety
// `mesh` must be a live handle, `kernel` null or live, `f` readable for
// `f_len` doubles and `u` writable for `u_len` doubles.
enum NlfemStatus nlfem_solve_bvp(const struct NlfemMesh *mesh,
                                 const struct NlfemKernel *kernel,
                                 const double *f,
                                 uintptr_t f_len,
                                 double *u,
                                 uintptr_t u_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLFEM_H */
