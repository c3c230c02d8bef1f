//! Problem front-ends that compile to combinatorial n-fold ILPs and decode
//! the core solver's answer back into domain terms.
//!
//! * [`scheduling`]: makespan minimization and max-min allocation on
//!   uniformly related machines.
//! * [`closest_string`]: the closest string problem via column types.
//! * [`imbalance`]: minimum imbalance orderings parameterized by vertex
//!   cover.
//!
//! Each module ships a brute-force reference solver, and [`reports`] runs
//! seeded agreement checks against them.

pub mod closest_string;
pub mod imbalance;
pub mod reports;
pub mod scheduling;
