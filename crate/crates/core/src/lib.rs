//! Front tracking for scalar conservation laws `p_t + H(p, a(x), g(t))_x = 0`
//! with piecewise-constant coefficients `a` and `g`, and reconstruction of the
//! matching Hamilton-Jacobi solution `u` with `u_x = p`.
//!
//! The solver is exact for the discretized flux: Riemann problems are solved
//! on a grid built in the `(z, alpha)` plane, fronts are tracked between
//! collisions, and the solution is restarted whenever `g` jumps. On top of the
//! engine there is a verification layer (entropy/weak residuals, interface
//! viscosity inequalities, a monotone finite-difference oracle, contraction
//! and comparison suites) and a batch CLI.

pub mod cli;
pub mod coeffs;
pub mod error;
pub mod expr;
pub mod grid;
pub mod hj;
pub mod model;
pub mod riemann;
pub mod tracker;
pub mod verify;

pub use coeffs::{CoefficientSpec, PiecewiseConstantFn};
pub use error::{Error, Result};
pub use grid::{psi, z_transform, FluxGrid};
pub use model::{AssumptionReport, Branch, FluxFamily, HamiltonianModel};
pub use riemann::{solve_interface, solve_scalar, Wave, WaveFan, WaveKind};
