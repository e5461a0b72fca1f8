//! Optimal-transport distances, couplings and displacement interpolations
//! for Gaussian mixture models — scalar, vector-valued (components pinned to
//! channels of a graph) and unbalanced (mass created or destroyed through a
//! source layer).
//!
//! The building blocks are small and composable:
//!
//! * [`linalg`] — symmetric eigendecomposition, PSD square roots;
//! * [`gaussian`] — closed-form W2 distance, geodesics, densities;
//! * [`transport`] — exact transportation simplex with optional masks;
//! * [`graph`] — channel graph, shortest paths, fractional positions;
//! * [`mixture`] — scalar mixture distance/interpolation, unbalanced source
//!   node;
//! * [`vector`] — the three coupling strategies (restricted, linear cost,
//!   quadratic cost) behind one trait, selected at runtime;
//! * [`fit`] — weighted EM with k-means++ seeding;
//! * [`io`] / [`raster`] — model JSON, image ingestion, density grids and
//!   PPM frames;
//! * [`oracle`] — independent brute-force verifiers used by the test suites;
//! * [`testkit`] — seeded random instance generators.

pub mod error;
pub mod fit;
pub mod gaussian;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod mixture;
pub mod oracle;
pub mod raster;
pub mod testkit;
pub mod transport;
pub mod vector;

pub use error::{Error, Result};
