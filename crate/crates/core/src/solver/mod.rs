//! Convex engine for the dynamic transport programs: perspective proximal
//! maps, the continuity projection, and the primal-dual loop.

pub mod pdhg;
pub mod program;
pub mod projection;
pub mod prox;

pub use pdhg::{pdhg_solve, Solution, SolveStats, SolverConfig};
pub use program::{EdgeFamily, EnergyTerm, FamilyKind, FluxBlock, Program, Stencil};
pub use projection::{ContinuityProjector, ProjectionInfo};
pub use prox::{prox_linear, prox_perspective, prox_perspective_scalar};
