//! Semi-analytic P1 finite elements for the one-dimensional nonlocal
//! Laplacian
//!
//! ```text
//! N_delta u(x) = int_0^delta (2u(x) - u(x+s) - u(x-s)) rho(s) ds,   x in (a, b),
//! u = 0 outside (a, b).
//! ```
//!
//! Stiffness entries are reduced exactly to sums of kernel moments
//! `int s^m rho(s) ds` over panels whose endpoints are node distances, so the
//! fractional and box kernels are assembled without quadrature error.
//!
//! Modules, bottom-up: [`mesh`], [`kernel`], [`assembly`] (plus [`linalg`]
//! for storage and factorizations), [`solve`], and the independent
//! references in [`oracle`]. The `nlfem` binary drives everything from flat
//! config files via [`cli`].

pub mod assembly;
pub mod cli;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod mesh;
pub mod oracle;
pub mod quadrature;
pub mod solve;

pub use error::{Error, Result};
pub use kernel::{make_kernel, Kernel, KernelSpec};
pub use mesh::{generate_mesh, mesh_stats, Mesh1D, MeshSpec};
