//! Stabilizer-free weak Galerkin discretization of
//! `−∇·(κ(|∇u|)∇u) = f` on polygonal meshes of the plane.

pub mod basis;
pub mod checks;
pub mod error;
pub mod error_norms;
pub mod mesh;
pub mod models;
pub mod projection;
pub mod quadrature;
pub mod solver;
pub mod study;
pub mod weak_gradient;

pub use error::{Error, Result};
pub use mesh::{GridFamily, PolygonalMesh, Rect};
pub use models::{Benchmark, KappaModel};
pub use weak_gradient::{GradientDegree, WeakFunction, WgSpace};
