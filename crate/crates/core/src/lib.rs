//! Exact semidefinite relaxations for convex programs built from SOS-convex
//! semialgebraic functions, with recovery of optimal points from moment data.

pub mod poly;
pub mod sdp;
pub mod soscert;
pub mod spectra;
pub mod relax;
pub mod robust;
pub mod ssafunc;

pub use poly::{Block, GramPairing, MonomialBasis, MultiIndex, PolyError, Polynomial};
pub use sdp::{
    check_feasible, solve, ConeSpec, Feasibility, LinearForm, SdpError, SdpPoint, SdpProblem,
    SdpSolution, SolveStatus, SolverOptions, SymMatrix,
};
