//! HTTP service and command line front end for chart recommendation.

pub mod cli;
pub mod http;
pub mod pipeline;
pub mod registry;
