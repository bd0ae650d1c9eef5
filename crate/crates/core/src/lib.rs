//! Task-oriented chart recommendation: load a table, enumerate admissible
//! chart specifications per analytic task, rank them, and plan chart sets
//! that cover the columns of interest.

pub mod combine;
pub mod cost;
pub mod data;
pub mod enumerate;
pub mod ground;
pub mod rank;
pub mod rules;
pub mod spec;
pub mod task;
pub mod vegalite;
