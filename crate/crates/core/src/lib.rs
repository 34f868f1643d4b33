//! Green's kernels, cone constants, index-condition certificates and a
//! Hammerstein solver for radial elliptic systems on exterior domains.

pub mod certify;
pub mod commands;
pub mod expr;
pub mod kernel;
pub mod problem;
pub mod quad;
pub mod radial;
pub mod report;
pub mod solver;

pub use certify::{
    Certifier, Condition, ConditionReport, Constants, Deviation, LadderSlot, MultiplicityVerdict,
    NonexistenceHypothesis, NonexistenceMode, NonexistenceReport, OracleConstants, RadiiLadder,
    Scheme,
};
pub use commands::{CommandError, CommandOutput, RunConfig, Status};
pub use expr::{parse, Env, Expr, Profile};
pub use kernel::{ConeConstants, ConeWindow, DirichletGamma, Kernel, KernelParams1, KernelParams2};
pub use problem::{Problem, ProblemError};
pub use quad::{Direction, FunctionalBound, PointMass, QuadratureConfig};
pub use radial::{Component, UnitProblem, Weight};
pub use solver::{Discretization, GridPair, SolveOutcome, SolverConfig};
