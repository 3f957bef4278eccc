//! Chart question answering toolkit.
//!
//! - [`chart`]: chart/table data model, numeric lexer, rasterization
//! - [`extraction`]: chart description to data table heuristics
//! - [`qa`]: input linearization, aggregation executor, supervision search,
//!   answer-in-table filter
//! - [`neural`]: a small image+table transformer with analytic gradients
//! - [`metrics`]: relaxed accuracy and the assignment-based extraction score
//! - [`harness`]: synthetic dataset generation and evaluation runs
//! - [`cli`]: the `chartqa` command-line tool

pub mod chart;
pub mod extraction;
pub mod metrics;
pub mod qa;
pub mod neural;
pub mod harness;
pub mod cli;
