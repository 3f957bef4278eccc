use super::{AggregationOp, Answer, CellSelection, QaError, YesNo};
use crate::chart::{format_value, DataTable};

fn values(cells: &CellSelection, table: &DataTable) -> Result<Vec<f64>, QaError> {
    cells
        .iter()
        .map(|&(row, col)| table.cell(row, col).ok_or(QaError::NullCell { row, col }))
        .collect()
}

/// Applies `op` to the selected cells. Pairwise ops read the selection in its
/// given order: DIFFERENCE is `|a - b|`, RATIO is `a / b`.
pub fn execute(op: AggregationOp, cells: &CellSelection, table: &DataTable) -> Result<Answer, QaError> {
    op.check_arity(cells.len())?;
    match op {
        AggregationOp::Yes => return Ok(Answer::Class(YesNo::Yes)),
        AggregationOp::No => return Ok(Answer::Class(YesNo::No)),
        _ => {}
    }
    cells.check_in_range(table)?;
    if op == AggregationOp::Count {
        return Ok(Answer::Number(cells.len() as f64));
    }
    let v = values(cells, table)?;
    let answer = match op {
        AggregationOp::None => {
            let text: Vec<String> = v.iter().map(|x| format_value(*x)).collect();
            Answer::Text(text.join(", "))
        }
        AggregationOp::Sum => Answer::Number(v.iter().sum()),
        AggregationOp::Average => Answer::Number(v.iter().sum::<f64>() / v.len() as f64),
        AggregationOp::Difference => Answer::Number((v[0] - v[1]).abs()),
        AggregationOp::Ratio => {
            if v[1] == 0.0 {
                return Err(QaError::DivisionByZero);
            }
            Answer::Number(v[0] / v[1])
        }
        AggregationOp::Count | AggregationOp::Yes | AggregationOp::No => unreachable!(),
    };
    Ok(answer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> DataTable {
        DataTable::single_column(
            "v",
            values
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("r{i}"), *v))
                .collect(),
        )
    }

    fn sel(rows: &[usize]) -> CellSelection {
        CellSelection::new(rows.iter().map(|r| (*r, 0)).collect())
    }

    fn number(a: Answer) -> f64 {
        match a {
            Answer::Number(v) => v,
            other => panic!("expected number, got {other:?}"),
        }
    }

    #[test]
    fn sum_of_planted_cells() {
        let t = column(&[17.13, 40.14]);
        let v = number(execute(AggregationOp::Sum, &sel(&[0, 1]), &t).unwrap());
        assert!((v - 57.27).abs() < 1e-12);
    }

    #[test]
    fn count_and_difference_and_ratio() {
        let t = column(&[8.0, 3.0, 4.0, 2.0]);
        assert_eq!(execute(AggregationOp::Count, &sel(&[0, 1, 2]), &t), Ok(Answer::Number(3.0)));
        assert_eq!(execute(AggregationOp::Difference, &sel(&[0, 1]), &t), Ok(Answer::Number(5.0)));
        assert_eq!(execute(AggregationOp::Difference, &sel(&[1, 0]), &t), Ok(Answer::Number(5.0)));
        assert_eq!(execute(AggregationOp::Ratio, &sel(&[2, 3]), &t), Ok(Answer::Number(2.0)));
    }

    #[test]
    fn none_returns_cell_text() {
        let t = column(&[40.14, 17.13]);
        assert_eq!(execute(AggregationOp::None, &sel(&[0]), &t), Ok(Answer::Text("40.14".into())));
        assert_eq!(
            execute(AggregationOp::None, &sel(&[0, 1]), &t),
            Ok(Answer::Text("40.14, 17.13".into()))
        );
    }

    #[test]
    fn classes_ignore_cells() {
        let t = column(&[1.0]);
        assert_eq!(
            execute(AggregationOp::Yes, &CellSelection::default(), &t),
            Ok(Answer::Class(YesNo::Yes))
        );
        assert_eq!(execute(AggregationOp::No, &sel(&[7]), &t), Ok(Answer::Class(YesNo::No)));
    }

    #[test]
    fn errors() {
        let t = DataTable::new(
            vec!["a".into()],
            vec!["x".into(), "y".into()],
            vec![vec![Some(1.0)], vec![None]],
        )
        .unwrap();
        assert_eq!(
            execute(AggregationOp::Ratio, &sel(&[0]), &t),
            Err(QaError::Arity { op: AggregationOp::Ratio, found: 1 })
        );
        assert_eq!(
            execute(AggregationOp::Sum, &sel(&[0, 1]), &t),
            Err(QaError::NullCell { row: 1, col: 0 })
        );
        assert_eq!(
            execute(AggregationOp::Sum, &sel(&[5]), &t),
            Err(QaError::OutOfRange { row: 5, col: 0 })
        );
        let z = column(&[3.0, 0.0]);
        assert_eq!(execute(AggregationOp::Ratio, &sel(&[0, 1]), &z), Err(QaError::DivisionByZero));
    }
}
