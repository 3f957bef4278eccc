use serde::{Deserialize, Serialize};

use super::Answer;
use crate::chart::{format_value, DataTable};
use crate::metrics::{normalize_text, relaxed_match};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMatch {
    /// Answer text equals a cell, header or row label after trim + case-fold.
    Text,
    /// Numeric answer within tolerance of a numeric cell.
    Numeric,
    /// Yes/no answers come from a fixed vocabulary and are always kept.
    Class,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub keep: bool,
    pub matched: Option<FilterMatch>,
}

/// Keeps a question only if its answer can be found in the table.
pub fn answer_in_table_filter(answer: &Answer, table: &DataTable, tol: f64) -> FilterVerdict {
    let keep = |m| FilterVerdict {
        keep: true,
        matched: Some(m),
    };
    if let Answer::Class(_) = answer {
        return keep(FilterMatch::Class);
    }
    let text = normalize_text(&answer.to_string());
    let text_hit = table
        .col_headers()
        .iter()
        .chain(table.row_labels())
        .map(|s| normalize_text(s))
        .chain(table.values().into_iter().map(format_value))
        .any(|s| s == text);
    if text_hit {
        return keep(FilterMatch::Text);
    }
    if answer.as_number().is_some() {
        let gold = answer.to_string();
        if table
            .values()
            .into_iter()
            .any(|v| relaxed_match(&gold, &format_value(v), tol).correct)
        {
            return keep(FilterMatch::Numeric);
        }
    }
    FilterVerdict {
        keep: false,
        matched: None,
    }
}
