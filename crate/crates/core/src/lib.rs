//! Shuffling gradient methods with momentum for finite-sum minimization.
//!
//! The crate provides
//!
//! * [`problems`]: the finite-sum abstraction, regularized logistic regression
//!   and an exactly solvable quadratic family;
//! * [`shuffling`]: incremental, shuffle-once and randomized-reshuffling
//!   permutations plus the weighted output-iterate draw;
//! * [`schedules`]: constant, diminishing, exponential and cosine epoch rates,
//!   step-size caps and exact schedule sums;
//! * [`optimizers`]: SMG, single-shuffle momentum (SSMG), shuffling SGD,
//!   heavy-ball SGD and Adam on a shared epoch loop;
//! * [`audit`]: convergence-bound audits, algebraic identity checks and
//!   log-log rate fits;
//! * [`dataio`]: LIBSVM parsing, synthetic datasets and trace persistence;
//! * [`cli`]: the experiment harness behind the `smg` binary.

// `!(x <= y)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod linalg;
pub mod optimizers;
pub mod problems;
pub mod schedules;
pub mod shuffling;

pub use error::{Error, Result};
pub use optimizers::{Algorithm, RunRecord};
pub use problems::{LogisticProblem, Problem, ProblemConstants, QuadraticMeanProblem, SparseSample};
pub use schedules::{Schedule, ScheduleKind, StepCap};
pub use shuffling::{ShufflingKind, ShufflingStrategy};
