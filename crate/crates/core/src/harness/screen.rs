use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, Pipeline};
use crate::extraction::extract_table;
use crate::qa::{answer_in_table_filter, AggregationOp, FilterMatch};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRow {
    pub chart_id: String,
    pub question: String,
    pub planted: bool,
    /// The gold answer is a single table cell (NONE supervision).
    pub cell_valued: bool,
    pub kept: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<FilterMatch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub pipeline: Pipeline,
    pub total: usize,
    pub kept: usize,
    pub planted: usize,
    pub planted_dropped: usize,
    pub cell_valued: usize,
    pub cell_valued_kept: usize,
    pub rows: Vec<FilterRow>,
}

impl FilterReport {
    pub fn planted_drop_rate(&self) -> f64 {
        ratio(self.planted_dropped, self.planted)
    }

    pub fn cell_valued_retention(&self) -> f64 {
        ratio(self.cell_valued_kept, self.cell_valued)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

/// Screens every question with the answer-in-table filter against the gold
/// or extracted table. A chart whose extraction fails keeps nothing.
pub fn run_filter(dataset: &Dataset, pipeline: Pipeline, tol: f64) -> FilterReport {
    let rows: Vec<FilterRow> = dataset
        .charts
        .par_iter()
        .flat_map_iter(|chart| {
            let table = match pipeline {
                Pipeline::GoldTable => Some(chart.table.clone()),
                Pipeline::ExtractedTable => extract_table(&chart.spec).ok().map(|e| e.table),
            };
            chart
                .qa
                .iter()
                .map(|q| {
                    let verdict = table.as_ref().map(|t| answer_in_table_filter(&q.gold_answer, t, tol));
                    FilterRow {
                        chart_id: chart.chart_id.clone(),
                        question: q.question.clone(),
                        planted: q.unanswerable,
                        cell_valued: q.supervision.as_ref().is_some_and(|s| s.op == AggregationOp::None),
                        kept: verdict.is_some_and(|v| v.keep),
                        matched: verdict.and_then(|v| v.matched),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let count = |f: &dyn Fn(&FilterRow) -> bool| rows.iter().filter(|r| f(r)).count();
    FilterReport {
        pipeline,
        total: rows.len(),
        kept: count(&|r| r.kept),
        planted: count(&|r| r.planted),
        planted_dropped: count(&|r| r.planted && !r.kept),
        cell_valued: count(&|r| r.cell_valued),
        cell_valued_kept: count(&|r| r.cell_valued && r.kept),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{generate_dataset, DatasetConfig, NoiseModel};

    #[test]
    fn planted_questions_are_dropped() {
        let config = DatasetConfig {
            unanswerable_fraction: 0.2,
            ..DatasetConfig::with_total_charts(30)
        };
        let d = generate_dataset(&config, &NoiseModel::NONE, 9).unwrap();
        let r = run_filter(&d, Pipeline::GoldTable, 0.05);
        assert!(r.planted > 0);
        assert_eq!(r.planted_dropped, r.planted);
        assert_eq!(r.cell_valued_kept, r.cell_valued);
    }
}
