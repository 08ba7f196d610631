//! Exact solvers for scheduling jobs with release dates on one machine so
//! that the total weight of jobs finishing by their due dates is maximal.
//!
//! Each solver is exact; they differ in the instance parameter they are
//! exponential in:
//!
//! - [`oracle`]: a subset dynamic program, exponential in the number of jobs;
//! - [`dp`]: boundary profiles over the distinct release dates, pseudo-polynomial
//!   in the processing times;
//! - [`prd`]: a MILP over job types `(p, r, d)`;
//! - [`pwd`]: a MILP over job types `(p, w, d)` and, by reversal, `(p, w, r)`.
//!
//! The MILPs are solved by the exact rational branch and bound in [`milp`].
//!
//! ```
//! use wtardy::{Algorithm, Instance, Job};
//!
//! let inst = Instance::new(vec![Job::new(2, 0, 2, 1), Job::new(2, 2, 4, 1), Job::new(3, 0, 4, 3)])?;
//! let best = Algorithm::Dp.solve(&inst)?;
//! assert_eq!(best.best_weight, 3);
//! # Ok::<(), wtardy::Error>(())
//! ```

pub mod algorithm;
pub mod dp;
pub mod error;
pub mod io;
pub mod milp;
pub mod model;
pub mod oracle;
pub mod prd;
pub mod pwd;
pub mod reductions;

pub use algorithm::Algorithm;
pub use error::{Error, Result};
pub use model::{Instance, Job, Schedule, SolveResult};
