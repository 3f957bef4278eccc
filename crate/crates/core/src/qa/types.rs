use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{format_value, parse_number, DataTable};

/// Operation applied to the selected cells. The first four form the base
/// set, DIFFERENCE and RATIO extend it, YES and NO are fixed answers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationOp {
    None,
    Count,
    Sum,
    Average,
    Difference,
    Ratio,
    Yes,
    No,
}

impl AggregationOp {
    pub const ALL: [AggregationOp; 8] = [
        AggregationOp::None,
        AggregationOp::Count,
        AggregationOp::Sum,
        AggregationOp::Average,
        AggregationOp::Difference,
        AggregationOp::Ratio,
        AggregationOp::Yes,
        AggregationOp::No,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            AggregationOp::None => "none",
            AggregationOp::Count => "count",
            AggregationOp::Sum => "sum",
            AggregationOp::Average => "average",
            AggregationOp::Difference => "difference",
            AggregationOp::Ratio => "ratio",
            AggregationOp::Yes => "yes",
            AggregationOp::No => "no",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|op| op.name().eq_ignore_ascii_case(name))
    }

    /// Pairwise ops consume exactly two cells.
    pub fn is_pairwise(self) -> bool {
        matches!(self, AggregationOp::Difference | AggregationOp::Ratio)
    }

    pub fn is_class(self) -> bool {
        matches!(self, AggregationOp::Yes | AggregationOp::No)
    }

    /// Checks the selection size rule for this op.
    pub fn check_arity(self, n: usize) -> Result<(), QaError> {
        let ok = match self {
            AggregationOp::Difference | AggregationOp::Ratio => n == 2,
            AggregationOp::Yes | AggregationOp::No => true,
            _ => n >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(QaError::Arity {
                op: self,
                found: n,
            })
        }
    }
}

impl std::fmt::Display for AggregationOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YesNo {
    Yes,
    No,
}

/// A predicted or gold answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Answer {
    Number(f64),
    Text(String),
    Class(YesNo),
}

impl Answer {
    /// Numeric reading of the answer: the number itself, or a text that
    /// parses as one.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Answer::Number(v) => Some(*v),
            Answer::Text(s) => parse_number(s).ok(),
            Answer::Class(_) => None,
        }
    }
}

impl std::fmt::Display for Answer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Answer::Number(v) => f.write_str(&format_value(*v)),
            Answer::Text(s) => f.write_str(s),
            Answer::Class(YesNo::Yes) => f.write_str("yes"),
            Answer::Class(YesNo::No) => f.write_str("no"),
        }
    }
}

/// Zero-based `(row, col)` data coordinates. The order is significant for
/// RATIO; [`CellSelection::canonical`] gives row-major scan order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellSelection(pub Vec<(usize, usize)>);

impl CellSelection {
    pub fn new(cells: Vec<(usize, usize)>) -> Self {
        Self(cells)
    }

    /// Sorted into row-major order, duplicates removed.
    pub fn canonical(mut cells: Vec<(usize, usize)>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self(cells)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.0.iter()
    }

    pub fn contains(&self, cell: (usize, usize)) -> bool {
        self.0.contains(&cell)
    }

    pub fn check_in_range(&self, table: &DataTable) -> Result<(), QaError> {
        match self
            .0
            .iter()
            .find(|(r, c)| *r >= table.n_rows() || *c >= table.n_cols())
        {
            Some(&(row, col)) => Err(QaError::OutOfRange { row, col }),
            None => Ok(()),
        }
    }
}

/// Training label: which op to apply to which cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupervisionTarget {
    pub op: AggregationOp,
    pub cells: CellSelection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar_answer: Option<f64>,
}

impl SupervisionTarget {
    pub fn new(op: AggregationOp, cells: CellSelection, scalar_answer: Option<f64>) -> Result<Self, QaError> {
        op.check_arity(cells.len())?;
        Ok(Self {
            op,
            cells,
            scalar_answer,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QaError {
    #[error("{op} cannot take {found} cells")]
    Arity { op: AggregationOp, found: usize },
    #[error("cell ({row}, {col}) is empty")]
    NullCell { row: usize, col: usize },
    #[error("cell ({row}, {col}) is outside the table")]
    OutOfRange { row: usize, col: usize },
    #[error("ratio denominator is zero")]
    DivisionByZero,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_indices_are_stable() {
        for (i, op) in AggregationOp::ALL.iter().enumerate() {
            assert_eq!(op.index(), i);
            assert_eq!(AggregationOp::from_index(i), Some(*op));
            assert_eq!(AggregationOp::parse(op.name()), Some(*op));
        }
        assert_eq!(AggregationOp::ALL.len(), 8);
    }

    #[test]
    fn supervision_json_shape() {
        let t = SupervisionTarget::new(
            AggregationOp::Difference,
            CellSelection::new(vec![(2, 0), (0, 0)]),
            Some(5.0),
        )
        .unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"op":"difference","cells":[[2,0],[0,0]],"scalar_answer":5.0}"#);
        let back: SupervisionTarget = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn arity_rules() {
        assert!(SupervisionTarget::new(AggregationOp::Ratio, CellSelection::new(vec![(0, 0)]), None).is_err());
        assert!(SupervisionTarget::new(AggregationOp::Sum, CellSelection::default(), None).is_err());
        assert!(SupervisionTarget::new(AggregationOp::Yes, CellSelection::default(), None).is_ok());
    }

    #[test]
    fn answer_json_and_display() {
        let a = Answer::Number(57.27);
        assert_eq!(serde_json::to_string(&a).unwrap(), r#"{"type":"number","value":57.27}"#);
        assert_eq!(Answer::Class(YesNo::No).to_string(), "no");
        assert_eq!(Answer::Text("12.44 percent".into()).as_number(), Some(12.44));
    }
}
