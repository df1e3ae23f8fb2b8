//! Front end for the `lagphase` solver: problem files, analytic field
//! expressions and the run orchestration behind the `lagphase` binary.

pub mod expr;
pub mod problem;
pub mod run;

pub use expr::{Expr, ExprError};
pub use problem::{parse_problem, parse_problem_file, FieldSource, Problem, ProblemError};
pub use run::{run, Command, RunConfig, RunReport, Status};
