//! Finite element kernels, assembly, linear solvers and eigensolvers.

pub mod cell;
pub mod dofmap;
pub mod eig;
pub mod forms;
pub mod shapes;
pub mod sparse;

pub use dofmap::DofMap;
pub use eig::{eigs_smallest, EigOptions, EigResult, EigSolverKind};
pub use forms::{ElementSpec, GradKind};
pub use sparse::{solve_spd, Factor, KernelSolver, SparseMatrix, SparseOperatorPair};
