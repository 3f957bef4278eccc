use serde::{Deserialize, Serialize};

use super::{ModelOutput, NeuralError};
use crate::chart::DataTable;
use crate::qa::{execute, AggregationOp, Answer, CellSelection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub op: AggregationOp,
    pub cells: CellSelection,
    pub answer: Answer,
}

/// Argmax op, first index on ties.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Decodes the op and cell heads and executes the result on `table`.
///
/// Cells are selected by score > 0 (probability > 0.5). Pairwise ops take the
/// two best-scoring cells instead, and any other op with nothing above the
/// threshold falls back to the single best cell. Selections are executed in
/// row-major order.
pub fn predict_answer(output: &ModelOutput, table: &DataTable) -> Result<Prediction, NeuralError> {
    let op = AggregationOp::from_index(argmax(&output.op_logits)).unwrap_or(AggregationOp::None);
    let mut ranked: Vec<((usize, usize), f64)> = output.cell_scores.clone();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let chosen: Vec<(usize, usize)> = if op.is_class() {
        Vec::new()
    } else if op.is_pairwise() {
        ranked.iter().take(2).map(|(rc, _)| *rc).collect()
    } else {
        let above: Vec<_> = ranked.iter().filter(|(_, s)| *s > 0.0).map(|(rc, _)| *rc).collect();
        if above.is_empty() {
            ranked.iter().take(1).map(|(rc, _)| *rc).collect()
        } else {
            above
        }
    };
    let cells = CellSelection::canonical(chosen);
    let answer = execute(op, &cells, table).map_err(|source| NeuralError::Execution {
        op,
        cells: cells.0.clone(),
        source,
    })?;
    Ok(Prediction { op, cells, answer })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> DataTable {
        DataTable::single_column("v", (0..4).map(|i| (format!("r{i}"), [8.0, 3.0, 4.0, 2.0][i])).collect())
    }

    fn output(op: AggregationOp, scores: [f64; 4]) -> ModelOutput {
        let mut logits = vec![0.0; 8];
        logits[op.index()] = 2.0;
        ModelOutput {
            op_logits: logits,
            token_scores: Vec::new(),
            cell_scores: scores.iter().enumerate().map(|(i, s)| ((i, 0), *s)).collect(),
            pooled_visual: Vec::new(),
            pooled_text: Vec::new(),
        }
    }

    #[test]
    fn count_uses_threshold() {
        let p = predict_answer(&output(AggregationOp::Count, [1.0, 2.0, 0.5, -1.0]), &table()).unwrap();
        assert_eq!(p.answer, Answer::Number(3.0));
    }

    #[test]
    fn difference_takes_top_two() {
        let p = predict_answer(&output(AggregationOp::Difference, [-5.0, -1.0, -2.0, -9.0]), &table()).unwrap();
        assert_eq!(p.cells.0, vec![(1, 0), (2, 0)]);
        assert_eq!(p.answer, Answer::Number(1.0));
        let p = predict_answer(&output(AggregationOp::Ratio, [3.0, 2.0, 1.0, 0.0]), &table()).unwrap();
        assert_eq!(p.answer, Answer::Number(8.0 / 3.0));
    }

    #[test]
    fn classes_and_fallback() {
        let p = predict_answer(&output(AggregationOp::Yes, [1.0; 4]), &table()).unwrap();
        assert_eq!(p.answer, Answer::Class(crate::qa::YesNo::Yes));
        let p = predict_answer(&output(AggregationOp::None, [-3.0, -1.0, -2.0, -4.0]), &table()).unwrap();
        assert_eq!(p.answer, Answer::Text("3".into()));
    }

    #[test]
    fn shift_and_scale_keep_the_op() {
        let base = output(AggregationOp::Average, [1.0, 1.0, -1.0, -1.0]);
        let mut moved = base.clone();
        moved.op_logits = base.op_logits.iter().map(|l| 3.0 * l + 100.0).collect();
        let a = predict_answer(&base, &table()).unwrap();
        let b = predict_answer(&moved, &table()).unwrap();
        assert_eq!(a.op, b.op);
    }

    #[test]
    fn execution_errors_carry_context() {
        let z = DataTable::single_column("v", vec![("a".into(), 1.0), ("b".into(), 0.0)]);
        let mut out = output(AggregationOp::Ratio, [1.0, 0.5, 0.0, 0.0]);
        out.cell_scores.truncate(2);
        let err = predict_answer(&out, &z).unwrap_err();
        assert!(matches!(err, NeuralError::Execution { op: AggregationOp::Ratio, .. }));
    }
}
