use super::{AggregationOp, Answer, CellSelection, SupervisionTarget};
use crate::chart::DataTable;

/// Finds cell pairs whose difference or ratio reproduces `answer` within
/// relative tolerance `tol`.
///
/// Every unordered pair of non-null cells is tried. A DIFFERENCE target lists
/// its cells in row-major order; a RATIO target lists them numerator first,
/// in whichever orientation matched (both, if both do). Results are sorted by
/// cell coordinates then op. An empty result means no pair explains the
/// answer and the example should be dropped.
pub fn synthesize_supervision(
    table: &DataTable,
    answer: &Answer,
    ops: &[AggregationOp],
    tol: f64,
) -> Vec<SupervisionTarget> {
    let Some(target) = answer.as_number() else {
        return Vec::new();
    };
    let bound = tol * target.abs();
    let cells: Vec<((usize, usize), f64)> = table.numeric_cells().collect();
    let want_diff = ops.contains(&AggregationOp::Difference);
    let want_ratio = ops.contains(&AggregationOp::Ratio);
    let mut out = Vec::new();
    let emit = |out: &mut Vec<SupervisionTarget>, op, cells: Vec<(usize, usize)>| {
        out.push(SupervisionTarget {
            op,
            cells: CellSelection::new(cells),
            scalar_answer: Some(target),
        });
    };
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            let ((ci, a), (cj, b)) = (cells[i], cells[j]);
            if want_diff && ((a - b).abs() - target).abs() <= bound {
                emit(&mut out, AggregationOp::Difference, vec![ci, cj]);
            }
            if want_ratio {
                if b != 0.0 && (a / b - target).abs() <= bound {
                    emit(&mut out, AggregationOp::Ratio, vec![ci, cj]);
                }
                if a != 0.0 && (b / a - target).abs() <= bound {
                    emit(&mut out, AggregationOp::Ratio, vec![cj, ci]);
                }
            }
        }
    }
    out.sort_by(|x, y| {
        let kx = (x.cells.0.clone(), x.op);
        let ky = (y.cells.0.clone(), y.op);
        kx.cmp(&ky)
    });
    out
}
