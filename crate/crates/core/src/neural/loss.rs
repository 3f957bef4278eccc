use serde::{Deserialize, Serialize};

use super::ModelOutput;
use crate::qa::SupervisionTarget;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub op: f64,
    pub cell: f64,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on a logit, stable for large `|s|`.
fn bce_with_logit(s: f64, y: f64) -> f64 {
    s.max(0.0) - s * y + (-s.abs()).exp().ln_1p()
}

/// Op cross-entropy plus `lambda` times the mean per-cell BCE against the
/// target's cell indicator.
pub fn loss(output: &ModelOutput, target: &SupervisionTarget, lambda: f64) -> LossBreakdown {
    loss_with_grad(output, target, lambda).0
}

/// Loss together with its derivatives with respect to the op logits and the
/// per-cell scores.
pub fn loss_with_grad(output: &ModelOutput, target: &SupervisionTarget, lambda: f64) -> (LossBreakdown, Vec<f64>, Vec<f64>) {
    let logits = &output.op_logits;
    let lse = log_sum_exp(logits);
    let op = lse - logits[target.op.index()];
    let mut d_logits: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();
    d_logits[target.op.index()] -= 1.0;

    let n = output.cell_scores.len();
    let mut cell = 0.0;
    let mut d_cells = vec![0.0; n];
    if n > 0 {
        for (i, (rc, s)) in output.cell_scores.iter().enumerate() {
            let y = if target.cells.contains(*rc) { 1.0 } else { 0.0 };
            cell += bce_with_logit(*s, y);
            d_cells[i] = lambda * (sigmoid(*s) - y) / n as f64;
        }
        cell /= n as f64;
    }
    let total = op + lambda * cell;
    (LossBreakdown { total, op, cell }, d_logits, d_cells)
}

/// `loss(b) - loss(a)` evaluated from the output differences, so that small
/// changes are not swamped by rounding in the loss values themselves.
pub fn loss_delta(a: &ModelOutput, b: &ModelOutput, target: &SupervisionTarget, lambda: f64) -> f64 {
    let lse = log_sum_exp(&a.op_logits);
    let mix: f64 = a
        .op_logits
        .iter()
        .zip(&b.op_logits)
        .map(|(x, y)| (x - lse).exp() * (y - x).exp_m1())
        .sum();
    let t = target.op.index();
    let op = mix.ln_1p() - (b.op_logits[t] - a.op_logits[t]);
    let n = a.cell_scores.len();
    let mut cell = 0.0;
    for ((rc, s), (_, s2)) in a.cell_scores.iter().zip(&b.cell_scores) {
        let y = if target.cells.contains(*rc) { 1.0 } else { 0.0 };
        let d = s2 - s;
        cell += (sigmoid(*s) * d.exp_m1()).ln_1p() - y * d;
    }
    if n > 0 {
        cell /= n as f64;
    }
    op + lambda * cell
}
