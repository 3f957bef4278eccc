//! Deterministic table question answering.
//!
//! Questions are answered by applying an [`AggregationOp`] to a
//! [`CellSelection`] of a [`DataTable`](crate::chart::DataTable). This module
//! also linearizes (question, table) pairs for the encoder, searches for
//! difference/ratio supervision that reproduces a numeric answer, and filters
//! questions whose answer does not occur in the table.

mod execute;
mod filter;
mod linearize;
mod supervision;
mod types;

pub use execute::execute;
pub use filter::{answer_in_table_filter, FilterMatch, FilterVerdict};
pub use linearize::{linearize, linearize_with_limit, tokenize, InputToken, Linearized, Segment, MAX_SEQ_LEN};
pub use supervision::synthesize_supervision;
pub use types::{AggregationOp, Answer, CellSelection, QaError, SupervisionTarget, YesNo};

/// Default relative tolerance for supervision search.
pub const SUPERVISION_TOLERANCE: f64 = 0.01;
