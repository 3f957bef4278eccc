use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, GeneratedChart, QAExample};
use crate::chart::{rasterize, DataTable};
use crate::extraction::extract_table;
use crate::metrics::{extraction_score, relaxed_match_answers};
use crate::neural::{predict_answer, ModelInput, VisionTapas, Vocab};
use crate::qa::{execute, Answer, CellSelection, SupervisionTarget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Answer from the generator's table.
    GoldTable,
    /// Answer from the table extracted from the chart description.
    ExtractedTable,
}

impl Pipeline {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pipeline::GoldTable => "gold_table",
            Pipeline::ExtractedTable => "extracted_table",
        }
    }
}

pub enum Answerer {
    /// Executes the gold supervision. On extracted tables the supervised
    /// cells are looked up by row label and column header.
    OracleExecutor,
    Neural { model: Box<VisionTapas>, vocab: Vocab },
}

impl Answerer {
    pub fn name(&self) -> &'static str {
        match self {
            Answerer::OracleExecutor => "oracle_executor",
            Answerer::Neural { .. } => "neural_model",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub chart_id: String,
    pub chart_type: String,
    pub kind: String,
    pub pipeline: Pipeline,
    pub question: String,
    pub gold: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<String>,
    pub correct: bool,
    /// Match reason, or the error that prevented an answer.
    pub reason: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

impl Stratum {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += usize::from(correct);
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pipeline: Pipeline,
    pub answerer: String,
    pub total: usize,
    pub correct: usize,
    pub relaxed_accuracy: f64,
    pub by_chart_type: BTreeMap<String, Stratum>,
    pub by_question_kind: BTreeMap<String, Stratum>,
    /// Mean per-chart extraction score; extracted pipeline only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_score: Option<f64>,
    /// Examples that failed with an error instead of an answer.
    pub errors: usize,
    pub examples: Vec<ExampleResult>,
}

impl EvalReport {
    /// One row per example: chart_id, kind, pipeline, correct, reason.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["chart_id", "kind", "pipeline", "correct", "reason"])?;
        for e in &self.examples {
            let correct = if e.correct { "true" } else { "false" };
            out.write_record([e.chart_id.as_str(), &e.kind, e.pipeline.as_str(), correct, &e.reason])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Maps gold-table cells onto `table` by row label and column header,
/// falling back to the same position when the shapes agree.
fn remap(target: &SupervisionTarget, gold: &DataTable, table: &DataTable) -> Result<CellSelection, String> {
    let same_shape = gold.n_rows() == table.n_rows() && gold.n_cols() == table.n_cols();
    let mut out = Vec::with_capacity(target.cells.len());
    for &(r, c) in target.cells.iter() {
        let row = table.row_index(&gold.row_labels()[r]).or(same_shape.then_some(r));
        let col = table
            .col_index(&gold.col_headers()[c])
            .or((gold.n_cols() == table.n_cols()).then_some(c));
        match (row, col) {
            (Some(row), Some(col)) => out.push((row, col)),
            _ => {
                return Err(format!(
                    "cell ({}, {}) not found in extracted table",
                    gold.row_labels()[r],
                    gold.col_headers()[c]
                ))
            }
        }
    }
    Ok(CellSelection::new(out))
}

fn answer_one(
    chart: &GeneratedChart,
    q: &QAExample,
    table: &DataTable,
    pipeline: Pipeline,
    answerer: &Answerer,
) -> Result<Answer, String> {
    match answerer {
        Answerer::OracleExecutor => {
            let target = q.supervision.as_ref().ok_or("no supervision for this question")?;
            let cells = match pipeline {
                Pipeline::GoldTable => target.cells.clone(),
                Pipeline::ExtractedTable => remap(target, &chart.table, table)?,
            };
            execute(target.op, &cells, table).map_err(|e| e.to_string())
        }
        Answerer::Neural { model, vocab } => {
            let raster = rasterize(&chart.spec, model.config().image_size);
            let input = ModelInput::new(model.config(), vocab, &raster, &q.question, table).map_err(|e| e.to_string())?;
            let out = model.forward(&input).map_err(|e| e.to_string())?;
            predict_answer(&out, table).map(|p| p.answer).map_err(|e| e.to_string())
        }
    }
}

struct ChartOutcome {
    results: Vec<ExampleResult>,
    extraction: Option<(String, Vec<f64>, Vec<f64>)>,
}

fn eval_chart(chart: &GeneratedChart, pipeline: Pipeline, answerer: &Answerer, tol: f64) -> ChartOutcome {
    let (table, extraction) = match pipeline {
        Pipeline::GoldTable => (Ok(chart.table.clone()), None),
        Pipeline::ExtractedTable => {
            let t = extract_table(&chart.spec).map(|e| e.table).map_err(|e| format!("extraction failed: {e}"));
            let pred = t.as_ref().map(|t| t.values()).unwrap_or_default();
            (t, Some((chart.chart_id.clone(), chart.table.values(), pred)))
        }
    };
    let results = chart
        .qa
        .iter()
        .map(|q| {
            let answer = table.as_ref().map_err(Clone::clone).and_then(|t| answer_one(chart, q, t, pipeline, answerer));
            let (predicted, correct, reason) = match answer {
                Ok(a) => {
                    let v = relaxed_match_answers(&a, &q.gold_answer, tol);
                    let reason = serde_json::to_value(v.reason)
                        .ok()
                        .and_then(|s| s.as_str().map(String::from))
                        .unwrap_or_default();
                    (Some(a.to_string()), v.correct, reason)
                }
                Err(e) => (None, false, format!("error: {e}")),
            };
            ExampleResult {
                chart_id: chart.chart_id.clone(),
                chart_type: chart.chart_type.to_string(),
                kind: q.kind.to_string(),
                pipeline,
                question: q.question.clone(),
                gold: q.gold_answer.to_string(),
                predicted,
                correct,
                reason,
            }
        })
        .collect();
    ChartOutcome { results, extraction }
}

/// Answers every question in `dataset` and scores it with relaxed matching
/// at relative tolerance `tol`. Failures are recorded per example as
/// incorrect with an `error: ...` reason; they never stop the run.
pub fn run_eval(dataset: &Dataset, pipeline: Pipeline, answerer: &Answerer, tol: f64) -> EvalReport {
    let outcomes: Vec<ChartOutcome> = dataset
        .charts
        .par_iter()
        .map(|c| eval_chart(c, pipeline, answerer, tol))
        .collect();
    let mut by_chart_type: BTreeMap<String, Stratum> = BTreeMap::new();
    let mut by_question_kind: BTreeMap<String, Stratum> = BTreeMap::new();
    let mut examples = Vec::new();
    let mut pairs = Vec::new();
    for o in outcomes {
        for r in &o.results {
            by_chart_type.entry(r.chart_type.clone()).or_default().add(r.correct);
            by_question_kind.entry(r.kind.clone()).or_default().add(r.correct);
        }
        examples.extend(o.results);
        pairs.extend(o.extraction);
    }
    let total = examples.len();
    let correct = examples.iter().filter(|e| e.correct).count();
    let errors = examples.iter().filter(|e| e.predicted.is_none()).count();
    let extraction_score = (!pairs.is_empty())
        .then(|| extraction_score(&pairs).ok().map(|s| s.overall))
        .flatten();
    EvalReport {
        pipeline,
        answerer: answerer.name().to_string(),
        total,
        correct,
        relaxed_accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        by_chart_type,
        by_question_kind,
        extraction_score,
        errors,
        examples,
    }
}
