use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Dataset, GeneratedChart, HarnessError, SplitTag};
use crate::chart::{parse_number, rasterize, DataTable, Raster};
use crate::neural::{ModelConfig, ModelInput, TrainExample, VisionTapas, Vocab};
use crate::qa::{linearize, tokenize, AggregationOp, CellSelection, SupervisionTarget};

/// Vocabulary over the question and table words in `dataset`. Numbers are
/// left out and read as the unknown token.
pub fn build_vocab(dataset: &Dataset) -> Vocab {
    let tokens: Vec<String> = dataset
        .examples()
        .flat_map(|(c, q)| linearize(&q.question, &c.table).tokens.into_iter().map(|t| t.text))
        .filter(|t| parse_number(t).is_err())
        .collect();
    Vocab::build(tokens)
}

/// Rasterizes the chart at the model's image size and linearizes the
/// question with `table`.
pub fn model_input(
    config: &ModelConfig,
    vocab: &Vocab,
    chart: &GeneratedChart,
    question: &str,
    table: &DataTable,
) -> Result<ModelInput, HarnessError> {
    let raster = rasterize(&chart.spec, config.image_size);
    Ok(ModelInput::new(config, vocab, &raster, question, table)?)
}

/// Supervised examples on gold tables from charts in `split` (all charts
/// when `None`). Planted questions have no supervision and are skipped.
pub fn training_examples(
    dataset: &Dataset,
    config: &ModelConfig,
    vocab: &Vocab,
    split: Option<SplitTag>,
) -> Result<Vec<TrainExample>, HarnessError> {
    let charts: Vec<&GeneratedChart> = dataset
        .charts
        .iter()
        .filter(|c| split.is_none_or(|s| c.split == s))
        .collect();
    let per_chart = charts
        .par_iter()
        .map(|c| {
            let raster = rasterize(&c.spec, config.image_size);
            c.qa.iter()
                .filter_map(|q| q.supervision.as_ref().map(|t| (q, t)))
                .map(|(q, t)| {
                    Ok(TrainExample {
                        input: ModelInput::new(config, vocab, &raster, &q.question, &c.table)?,
                        target: t.clone(),
                    })
                })
                .collect::<Result<Vec<_>, HarnessError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_chart.into_iter().flatten().collect())
}

/// A fixed 2x2 sample for checking gradients: a noisy raster, a SUM
/// question and its target. Linear-only models target all four cells, the
/// others two cells of one column.
pub fn gradcheck_probe(base: &ModelConfig) -> Result<(VisionTapas, ModelInput, SupervisionTarget), HarnessError> {
    let table = DataTable::new(
        vec!["a".into(), "b".into()],
        vec!["x".into(), "y".into()],
        vec![vec![Some(5.0), Some(-2.5)], vec![Some(7.0), Some(1.0)]],
    )
    .map_err(|e| HarnessError::Config(e.to_string()))?;
    let (question, cells) = if base.linear_only {
        ("sum of all values?", vec![(0, 0), (0, 1), (1, 0), (1, 1)])
    } else {
        ("sum of x and y?", vec![(0, 0), (1, 0)])
    };
    let vocab = Vocab::build(tokenize(question).into_iter().chain(["a", "b", "x", "y", "5", "7", "all"].map(String::from)));
    let config = ModelConfig {
        vocab_size: vocab.len(),
        ..base.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let raster = Raster {
        size: config.image_size,
        data: (0..config.image_size * config.image_size * 3).map(|_| rng.random::<f64>()).collect(),
    };
    let input = ModelInput::new(&config, &vocab, &raster, question, &table)?;
    let target = SupervisionTarget::new(AggregationOp::Sum, CellSelection::new(cells), None)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok((VisionTapas::new(config)?, input, target))
}
