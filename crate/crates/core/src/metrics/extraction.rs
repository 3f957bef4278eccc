use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_assignment, MetricsError};

/// Cost of a gold value with no prediction, or a prediction with no gold.
pub const PAD_COST: f64 = 1.0;

/// Relative distance clamped to `[0, 1]`. A zero gold value is at distance 0
/// from a zero prediction and 1 from anything else.
pub fn value_distance(gt: f64, pr: f64) -> f64 {
    if gt == 0.0 {
        return if pr == 0.0 { 0.0 } else { 1.0 };
    }
    let d = ((gt - pr) / gt).abs();
    if d.is_nan() {
        1.0
    } else {
        d.min(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartScore {
    pub chart_id: String,
    pub cost: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionScore {
    pub overall: f64,
    pub per_chart: Vec<ChartScore>,
}

/// Scores one chart: optimal matching of gold to predicted values over a
/// `max(N, M)` square cost matrix, padded with [`PAD_COST`].
pub fn score_chart(chart_id: &str, gold: &[f64], pred: &[f64]) -> Result<ChartScore, MetricsError> {
    let k = gold.len().max(pred.len());
    if k == 0 {
        return Err(MetricsError::EmptyChart(chart_id.to_string()));
    }
    let matrix: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| match (gold.get(i), pred.get(j)) {
                    (Some(&g), Some(&p)) => value_distance(g, p),
                    _ => PAD_COST,
                })
                .collect()
        })
        .collect();
    let cost = solve_assignment(&matrix)?.cost;
    Ok(ChartScore {
        chart_id: chart_id.to_string(),
        cost,
        k,
        score: (1.0 - cost / k as f64).clamp(0.0, 1.0),
    })
}

/// Mean per-chart score over `(chart_id, gold, predicted)` triples.
pub fn extraction_score<S: AsRef<str> + Sync>(
    charts: &[(S, Vec<f64>, Vec<f64>)],
) -> Result<ExtractionScore, MetricsError> {
    if charts.is_empty() {
        return Err(MetricsError::NoCharts);
    }
    let per_chart = charts
        .par_iter()
        .map(|(id, g, p)| score_chart(id.as_ref(), g, p))
        .collect::<Result<Vec<_>, _>>()?;
    let overall = per_chart.iter().map(|c| c.score).sum::<f64>() / per_chart.len() as f64;
    Ok(ExtractionScore { overall, per_chart })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        assert_eq!(value_distance(10.0, 10.0), 0.0);
        assert_eq!(value_distance(10.0, 15.0), 0.5);
        assert_eq!(value_distance(10.0, 25.0), 1.0);
        assert_eq!(value_distance(0.0, 0.0), 0.0);
        assert_eq!(value_distance(0.0, 3.0), 1.0);
        assert_eq!(value_distance(-10.0, -15.0), 0.5);
    }

    #[test]
    fn chart_scores() {
        assert_eq!(score_chart("a", &[10.0], &[10.0]).unwrap().score, 1.0);
        let s = score_chart("b", &[10.0], &[15.0]).unwrap();
        assert_eq!((s.cost, s.k, s.score), (0.5, 1, 0.5));
        let s = score_chart("c", &[10.0, 20.0], &[10.0]).unwrap();
        assert_eq!((s.cost, s.k, s.score), (1.0, 2, 0.5));
        assert_eq!(score_chart("d", &[], &[]), Err(MetricsError::EmptyChart("d".into())));
    }

    #[test]
    fn overall_is_mean() {
        let charts = vec![
            ("a", vec![10.0], vec![10.0]),
            ("b", vec![10.0], vec![15.0]),
        ];
        let s = extraction_score(&charts).unwrap();
        assert_eq!(s.overall, 0.75);
        assert_eq!(s.per_chart[1].chart_id, "b");
        let json = serde_json::to_value(&s.per_chart[0]).unwrap();
        assert_eq!(json["K"], 1);
        assert!(extraction_score::<&str>(&[]).is_err());
    }
}
