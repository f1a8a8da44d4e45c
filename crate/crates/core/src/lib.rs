//! Geometry of the solvable Lie group Sol₃ and its constant-mean-curvature
//! (CMC) surfaces.
//!
//! The crate is organized around the exact, closed-form layer and a discrete
//! layer built on top of it:
//!
//! - [`sol3`]: group law, left-invariant metric, canonical frame, connection
//!   and curvature tables, isometries, Killing fields, geodesic flow.
//! - [`gauss_map`]: coefficient functions of the Gauss-map elliptic equation,
//!   frame velocities, Hopf differential, and the Weierstrass-type integrator
//!   that reconstructs an immersion from a Gauss-map field.
//! - [`cylinders`]: the explicit x₂-invariant CMC cylinders (profile curve by
//!   quadrature, parametrization, non-embeddedness integral) together with
//!   their exact Gauss-map fields, used as oracles elsewhere.
//! - [`minimal_graphs`]: the minimal-graph PDE residual for x₁ = f(x₂,x₃) and
//!   the four entire solution families.
//! - [`sphere`]: discrete construction of the canonical CMC spheres by
//!   volume-constrained area descent, with geometry reports, Jacobi spectra,
//!   Killing/Stokes checks and continuation in H.
//! - [`quad_diff`]: the quadratic differential Q built from a solved sphere's
//!   Gauss map, with the |L/M| < 1 certificate and Cauchy-Riemann ratio.
//!
//! Heavy per-sample loops (residual grids, per-vertex mesh quantities,
//! spectral matvecs) run on rayon when the default `parallel` feature is
//! enabled and fall back to plain iterators otherwise. All parallel code
//! reduces sequentially over index-ordered buffers, so results are bit-stable
//! across thread counts.

pub mod cylinders;
pub mod error;
pub mod gauss_map;
pub mod mesh;
pub mod minimal_graphs;
pub mod par;
pub mod quad_diff;
pub mod quadrature;
pub mod sol3;
pub mod sphere;

pub use error::{Error, Result};
pub use sol3::{FrameVector, Isometry, Point};
