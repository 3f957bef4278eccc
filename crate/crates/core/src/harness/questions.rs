use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::layout::PALETTE;
use super::words::{ORDINALS, UNANSWERABLE_NAMES};
use super::QuestionKind;
use crate::chart::{format_value, ChartType, DataTable};
use crate::qa::{AggregationOp, Answer, CellSelection, SupervisionTarget, YesNo};

pub(crate) struct Ctx<'a> {
    pub chart_type: ChartType,
    pub table: &'a DataTable,
    /// Palette index per column (bar, line) or per row (pie).
    pub colors: &'a [usize],
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Generated {
    pub question: String,
    pub answer: Answer,
    pub target: SupervisionTarget,
}

type Template = fn(&Ctx, &mut ChaCha8Rng) -> Option<Generated>;

impl Ctx<'_> {
    fn rows(&self) -> usize {
        self.table.n_rows()
    }

    fn cols(&self) -> usize {
        self.table.n_cols()
    }

    fn v(&self, r: usize, c: usize) -> f64 {
        self.table.cell(r, c).expect("generated tables are complete")
    }

    fn label(&self, r: usize) -> &str {
        &self.table.row_labels()[r]
    }

    fn header(&self, c: usize) -> &str {
        &self.table.col_headers()[c]
    }

    fn is_pie(&self) -> bool {
        self.chart_type == ChartType::Pie
    }

    fn noun(&self) -> &'static str {
        match self.chart_type {
            ChartType::Bar => "bar",
            ChartType::Line => "point",
            ChartType::Pie => "slice",
        }
    }

    fn color(&self, k: usize) -> &'static str {
        PALETTE[self.colors[k]].0
    }

    /// " for <series>" on multi-series charts.
    fn series(&self, c: usize) -> String {
        if self.cols() > 1 {
            format!(" for {}", self.header(c))
        } else {
            String::new()
        }
    }

    /// Colour adjective for a column on multi-series charts.
    fn col_color(&self, c: usize) -> String {
        if self.cols() > 1 {
            format!("{} ", self.color(c))
        } else {
            String::new()
        }
    }

    fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.v(r, c)).collect()
    }

    fn cartesian(&self) -> bool {
        !self.is_pie()
    }
}

fn two_rows(ctx: &Ctx, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let mut idx: Vec<usize> = (0..ctx.rows()).collect();
    idx.shuffle(rng);
    let (a, b) = (idx[0], idx[1]);
    (a.min(b), a.max(b))
}

fn pick_col(ctx: &Ctx, rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(0..ctx.cols())
}

fn unique_extreme(values: &[f64], max: bool) -> Option<usize> {
    let best = if max {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let hits: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    (hits.len() == 1).then(|| hits[0])
}

/// Rounds away float noise from composed answers (`0.1 + 0.2`).
fn tidy(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn make(question: String, answer: Answer, op: AggregationOp, cells: Vec<(usize, usize)>) -> Option<Generated> {
    let answer = match answer {
        Answer::Number(x) if op == AggregationOp::Difference && x.abs() < 1e-9 => return None,
        Answer::Number(x) => Answer::Number(tidy(x)),
        a => a,
    };
    let target = SupervisionTarget::new(op, CellSelection::new(cells), answer.as_number()).ok()?;
    Some(Generated {
        question,
        answer,
        target,
    })
}

fn yes_no(b: bool) -> (Answer, AggregationOp) {
    if b {
        (Answer::Class(YesNo::Yes), AggregationOp::Yes)
    } else {
        (Answer::Class(YesNo::No), AggregationOp::No)
    }
}

// data retrieval

fn lookup(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let (r, c) = (rng.random_range(0..ctx.rows()), pick_col(ctx, rng));
    let q = if ctx.is_pie() {
        format!("What share does {} have?", ctx.label(r))
    } else {
        format!("What is the value of {}{}?", ctx.label(r), ctx.series(c))
    };
    make(q, Answer::Number(ctx.v(r, c)), AggregationOp::None, vec![(r, c)])
}

fn how_much(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let (r, c) = (rng.random_range(0..ctx.rows()), pick_col(ctx, rng));
    let q = if ctx.cols() > 1 {
        format!("What is the {} value in {}?", ctx.header(c), ctx.label(r))
    } else {
        format!("How much is {}?", ctx.label(r))
    };
    make(q, Answer::Number(ctx.v(r, c)), AggregationOp::None, vec![(r, c)])
}

// visual

fn ordinal_from_left(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    if !ctx.cartesian() {
        return None;
    }
    let k = rng.random_range(0..ctx.rows().min(ORDINALS.len()));
    let c = pick_col(ctx, rng);
    let q = format!(
        "What is the value of the {} {}{} from the left?",
        ORDINALS[k],
        ctx.col_color(c),
        ctx.noun()
    );
    make(q, Answer::Number(ctx.v(k, c)), AggregationOp::None, vec![(k, c)])
}

fn rightmost(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    if !ctx.cartesian() {
        return None;
    }
    let c = pick_col(ctx, rng);
    let r = ctx.rows() - 1;
    let q = format!("What is the value of the rightmost {}{}?", ctx.col_color(c), ctx.noun());
    make(q, Answer::Number(ctx.v(r, c)), AggregationOp::None, vec![(r, c)])
}

fn extreme(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let c = pick_col(ctx, rng);
    let max = rng.random_bool(0.5);
    let r = unique_extreme(&ctx.column(c), max)?;
    let q = match ctx.chart_type {
        ChartType::Bar => format!(
            "What is the value of the {} {}bar?",
            if max { "tallest" } else { "shortest" },
            ctx.col_color(c)
        ),
        ChartType::Line => {
            if max {
                format!("What is the peak value of the {} line?", ctx.color(c))
            } else {
                format!("What is the lowest value of the {} line?", ctx.color(c))
            }
        }
        ChartType::Pie => format!(
            "What is the value of the {} slice?",
            if max { "largest" } else { "smallest" }
        ),
    };
    make(q, Answer::Number(ctx.v(r, c)), AggregationOp::None, vec![(r, c)])
}

fn colored_mark(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    if ctx.is_pie() {
        let r = rng.random_range(0..ctx.rows());
        let q = format!("What is the value of the {} slice?", ctx.color(r));
        return make(q, Answer::Number(ctx.v(r, 0)), AggregationOp::None, vec![(r, 0)]);
    }
    if ctx.cols() < 2 {
        return None;
    }
    let (r, c) = (rng.random_range(0..ctx.rows()), pick_col(ctx, rng));
    let q = format!("What is the value of the {} {} for {}?", ctx.color(c), ctx.noun(), ctx.label(r));
    make(q, Answer::Number(ctx.v(r, c)), AggregationOp::None, vec![(r, c)])
}

// compositional

fn sum_two(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let (a, b) = two_rows(ctx, rng);
    let c = pick_col(ctx, rng);
    let q = format!("What is the sum of {} and {}{}?", ctx.label(a), ctx.label(b), ctx.series(c));
    make(q, Answer::Number(ctx.v(a, c) + ctx.v(b, c)), AggregationOp::Sum, vec![(a, c), (b, c)])
}

fn sum_three(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let mut idx: Vec<usize> = (0..ctx.rows()).collect();
    idx.shuffle(rng);
    let mut rows = idx[..3].to_vec();
    rows.sort_unstable();
    let c = pick_col(ctx, rng);
    let q = format!(
        "What is the total of {}, {} and {}{}?",
        ctx.label(rows[0]),
        ctx.label(rows[1]),
        ctx.label(rows[2]),
        ctx.series(c)
    );
    let total = rows.iter().map(|&r| ctx.v(r, c)).sum();
    make(q, Answer::Number(total), AggregationOp::Sum, rows.iter().map(|&r| (r, c)).collect())
}

fn average_two(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let (a, b) = two_rows(ctx, rng);
    let c = pick_col(ctx, rng);
    let q = format!("What is the average of {} and {}{}?", ctx.label(a), ctx.label(b), ctx.series(c));
    let avg = (ctx.v(a, c) + ctx.v(b, c)) / 2.0;
    make(q, Answer::Number(avg), AggregationOp::Average, vec![(a, c), (b, c)])
}

fn average_all(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let c = pick_col(ctx, rng);
    let q = if ctx.is_pie() {
        "What is the average share across all slices?".to_string()
    } else {
        format!("What is the average value{} across all categories?", ctx.series(c))
    };
    let col = ctx.column(c);
    let avg = col.iter().sum::<f64>() / col.len() as f64;
    make(q, Answer::Number(avg), AggregationOp::Average, (0..ctx.rows()).map(|r| (r, c)).collect())
}

fn difference_rows(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let (a, b) = two_rows(ctx, rng);
    let c = pick_col(ctx, rng);
    let q = format!("What is the difference between {} and {}{}?", ctx.label(a), ctx.label(b), ctx.series(c));
    let d = (ctx.v(a, c) - ctx.v(b, c)).abs();
    make(q, Answer::Number(d), AggregationOp::Difference, vec![(a, c), (b, c)])
}

fn difference_series(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    if ctx.cols() < 2 {
        return None;
    }
    let r = rng.random_range(0..ctx.rows());
    let mut cols: Vec<usize> = (0..ctx.cols()).collect();
    cols.shuffle(rng);
    let (a, b) = (cols[0].min(cols[1]), cols[0].max(cols[1]));
    let q = format!("What is the difference between {} and {} in {}?", ctx.header(a), ctx.header(b), ctx.label(r));
    let d = (ctx.v(r, a) - ctx.v(r, b)).abs();
    make(q, Answer::Number(d), AggregationOp::Difference, vec![(r, a), (r, b)])
}

fn ratio_rows(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let (a, b) = two_rows(ctx, rng);
    let c = pick_col(ctx, rng);
    let q = format!("What is the ratio of {} to {}{}?", ctx.label(a), ctx.label(b), ctx.series(c));
    make(q, Answer::Number(ctx.v(a, c) / ctx.v(b, c)), AggregationOp::Ratio, vec![(a, c), (b, c)])
}

fn count_categories(ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Option<Generated> {
    let q = if ctx.is_pie() {
        "How many slices are there?".to_string()
    } else {
        "How many categories are shown?".to_string()
    };
    make(
        q,
        Answer::Number(ctx.rows() as f64),
        AggregationOp::Count,
        (0..ctx.rows()).map(|r| (r, 0)).collect(),
    )
}

fn count_above(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let c = pick_col(ctx, rng);
    let mut sorted = ctx.column(c);
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 {
        return None;
    }
    let k = rng.random_range(0..sorted.len() - 1);
    let t = ((sorted[k] + sorted[k + 1]) / 2.0 * 10.0).round() / 10.0;
    let cells: Vec<(usize, usize)> = (0..ctx.rows()).filter(|&r| ctx.v(r, c) > t).map(|r| (r, c)).collect();
    if cells.is_empty() || cells.len() == ctx.rows() {
        return None;
    }
    let q = format!(
        "How many {}s have a value above {}{}?",
        ctx.noun(),
        format_value(t),
        ctx.series(c)
    );
    make(q, Answer::Number(cells.len() as f64), AggregationOp::Count, cells)
}

fn greater_than(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let (a, b) = two_rows(ctx, rng);
    let (a, b) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
    let c = pick_col(ctx, rng);
    if ctx.v(a, c) == ctx.v(b, c) {
        return None;
    }
    let q = format!("Is {} greater than {}{}?", ctx.label(a), ctx.label(b), ctx.series(c));
    let (ans, op) = yes_no(ctx.v(a, c) > ctx.v(b, c));
    make(q, ans, op, vec![(a, c), (b, c)])
}

// visual + compositional

fn two_ordinals(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
    let n = ctx.rows().min(ORDINALS.len());
    if !ctx.cartesian() || n < 2 {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    Some((idx[0].min(idx[1]), idx[0].max(idx[1])))
}

fn sum_ordinals(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let (a, b) = two_ordinals(ctx, rng)?;
    let c = pick_col(ctx, rng);
    let q = format!(
        "What is the sum of the {} and {} {}{}s from the left?",
        ORDINALS[a],
        ORDINALS[b],
        ctx.col_color(c),
        ctx.noun()
    );
    make(q, Answer::Number(ctx.v(a, c) + ctx.v(b, c)), AggregationOp::Sum, vec![(a, c), (b, c)])
}

fn difference_ordinals(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let (a, b) = two_ordinals(ctx, rng)?;
    let c = pick_col(ctx, rng);
    let q = format!(
        "What is the difference between the {} and {} {}{}s from the left?",
        ORDINALS[a],
        ORDINALS[b],
        ctx.col_color(c),
        ctx.noun()
    );
    let d = (ctx.v(a, c) - ctx.v(b, c)).abs();
    make(q, Answer::Number(d), AggregationOp::Difference, vec![(a, c), (b, c)])
}

fn ratio_ordinals(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let (a, b) = two_ordinals(ctx, rng)?;
    let c = pick_col(ctx, rng);
    let q = format!(
        "What is the ratio of the {} {}{} to the {} one from the left?",
        ORDINALS[a],
        ctx.col_color(c),
        ctx.noun(),
        ORDINALS[b]
    );
    make(q, Answer::Number(ctx.v(a, c) / ctx.v(b, c)), AggregationOp::Ratio, vec![(a, c), (b, c)])
}

fn ends_sum(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    if !ctx.cartesian() {
        return None;
    }
    let c = pick_col(ctx, rng);
    let last = ctx.rows() - 1;
    let q = format!("What is the sum of the leftmost and rightmost {}{}s?", ctx.col_color(c), ctx.noun());
    make(q, Answer::Number(ctx.v(0, c) + ctx.v(last, c)), AggregationOp::Sum, vec![(0, c), (last, c)])
}

fn color_difference(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    if ctx.is_pie() {
        let (a, b) = two_rows(ctx, rng);
        let q = format!(
            "What is the difference between the {} and {} slices?",
            ctx.color(a),
            ctx.color(b)
        );
        let d = (ctx.v(a, 0) - ctx.v(b, 0)).abs();
        return make(q, Answer::Number(d), AggregationOp::Difference, vec![(a, 0), (b, 0)]);
    }
    if ctx.cols() < 2 {
        return None;
    }
    let r = rng.random_range(0..ctx.rows());
    let mut cols: Vec<usize> = (0..ctx.cols()).collect();
    cols.shuffle(rng);
    let (a, b) = (cols[0].min(cols[1]), cols[0].max(cols[1]));
    let q = format!(
        "What is the difference between the {} and {} {}s for {}?",
        ctx.color(a),
        ctx.color(b),
        ctx.noun(),
        ctx.label(r)
    );
    let d = (ctx.v(r, a) - ctx.v(r, b)).abs();
    make(q, Answer::Number(d), AggregationOp::Difference, vec![(r, a), (r, b)])
}

fn color_average(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    if !ctx.cartesian() {
        return None;
    }
    let c = pick_col(ctx, rng);
    let q = format!("What is the average of the {} {}s?", ctx.color(c), ctx.noun());
    let col = ctx.column(c);
    let avg = col.iter().sum::<f64>() / col.len() as f64;
    make(q, Answer::Number(avg), AggregationOp::Average, (0..ctx.rows()).map(|r| (r, c)).collect())
}

fn extreme_gap(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let c = pick_col(ctx, rng);
    let col = ctx.column(c);
    let hi = unique_extreme(&col, true)?;
    let lo = unique_extreme(&col, false)?;
    let q = match ctx.chart_type {
        ChartType::Bar => format!("What is the difference between the tallest and shortest {}bars?", ctx.col_color(c)),
        ChartType::Line => format!(
            "What is the difference between the highest and lowest points of the {} line?",
            ctx.color(c)
        ),
        ChartType::Pie => "What is the difference between the largest and smallest slices?".to_string(),
    };
    let cells = vec![(hi.min(lo), c), (hi.max(lo), c)];
    make(q, Answer::Number(col[hi] - col[lo]), AggregationOp::Difference, cells)
}

fn two_largest(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let c = pick_col(ctx, rng);
    let col = ctx.column(c);
    let mut order: Vec<usize> = (0..col.len()).collect();
    order.sort_by(|a, b| col[*b].total_cmp(&col[*a]));
    if col.len() > 2 && col[order[1]] == col[order[2]] {
        return None;
    }
    let (a, b) = (order[0].min(order[1]), order[0].max(order[1]));
    let q = match ctx.chart_type {
        ChartType::Pie => "What is the sum of the two largest slices?".to_string(),
        _ => format!("What is the sum of the two largest {}{}s?", ctx.col_color(c), ctx.noun()),
    };
    make(q, Answer::Number(col[a] + col[b]), AggregationOp::Sum, vec![(a, c), (b, c)])
}

fn ordinal_compare(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Option<Generated> {
    let (a, b) = two_ordinals(ctx, rng)?;
    let c = pick_col(ctx, rng);
    if ctx.v(a, c) == ctx.v(b, c) {
        return None;
    }
    let adjective = if ctx.chart_type == ChartType::Bar { "taller" } else { "higher" };
    let q = format!(
        "Is the {} {}{} from the left {} than the {}?",
        ORDINALS[a],
        ctx.col_color(c),
        ctx.noun(),
        adjective,
        ORDINALS[b]
    );
    let (ans, op) = yes_no(ctx.v(a, c) > ctx.v(b, c));
    make(q, ans, op, vec![(a, c), (b, c)])
}

fn templates(kind: QuestionKind) -> &'static [Template] {
    match kind {
        QuestionKind::DataRetrieval => &[lookup, how_much],
        QuestionKind::Visual => &[ordinal_from_left, rightmost, extreme, colored_mark],
        QuestionKind::Compositional => &[
            sum_two,
            sum_three,
            average_two,
            average_all,
            difference_rows,
            difference_series,
            ratio_rows,
            count_categories,
            count_above,
            greater_than,
        ],
        QuestionKind::VisualCompositional => &[
            sum_ordinals,
            difference_ordinals,
            ratio_ordinals,
            ends_sum,
            color_difference,
            color_average,
            extreme_gap,
            two_largest,
            ordinal_compare,
        ],
    }
}

/// One question of `kind`; templates that do not fit the chart are redrawn.
pub(crate) fn generate_question(ctx: &Ctx, kind: QuestionKind, rng: &mut ChaCha8Rng) -> Generated {
    let pool = templates(kind);
    for _ in 0..64 {
        let t = pool.choose(rng).expect("template pools are non-empty");
        if let Some(g) = t(ctx, rng) {
            return g;
        }
    }
    lookup(ctx, rng).expect("lookup always applies")
}

/// A question about a category the chart does not have, answered from a
/// vocabulary disjoint from the table or with a number more than
/// `tol_margin` (relative) away from every cell.
pub(crate) fn unanswerable_question(ctx: &Ctx, tol_margin: f64, rng: &mut ChaCha8Rng) -> (String, Answer) {
    let name = UNANSWERABLE_NAMES.choose(rng).expect("non-empty");
    let question = format!("What is the value of {name}?");
    if rng.random_bool(0.5) {
        let answer = UNANSWERABLE_NAMES.choose(rng).expect("non-empty");
        return (question, Answer::Text(answer.to_string()));
    }
    let values = ctx.table.values();
    let hi = values.iter().copied().fold(1.0, f64::max) * 2.0;
    loop {
        let x = (rng.random_range(0.0..hi) * 10.0).round() / 10.0;
        if x > 0.0 && values.iter().all(|v| (x - v).abs() > tol_margin * v.abs()) {
            return (question, Answer::Number(x));
        }
    }
}
