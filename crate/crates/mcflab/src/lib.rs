//! mcflab — a numerical laboratory for mean curvature flow.
//!
//! The crate evolves hypersurfaces of revolution (any dimension `n >= 2`)
//! through profile curves in the half-plane, and triangle meshes in `R^3`,
//! under mean curvature flow and several modified normal-speed laws. On top
//! of the two engines sit the analytic diagnostics used to study flows:
//! Gaussian density ratios and their scale monotonicity, entropy lower bounds
//! via F-functionals, Sturmian intersection counts, barrier/avoidance checks,
//! and terminal-event classification (round point vs. neckpinch).
//!
//! Start from the `examples/` directory: each example is a runnable
//! experiment exercising one capability. The `mcflab` binary drives the same
//! machinery from scenario config files.

pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod graph_pde;
pub mod mesh;
pub mod mesh_flow;
pub mod profile;
pub mod scenario;
pub mod shapes;

pub use error::{Error, Result};
pub use profile::{CurvatureData, Measures, ProfileCurve, ResamplePolicy, Topology};
