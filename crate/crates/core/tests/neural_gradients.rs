use std::time::Instant;

use chartqa::chart::{DataTable, Raster};
use chartqa::neural::{grad_check, ModelConfig, ModelInput, VisionTapas, Vocab};
use chartqa::qa::{tokenize, AggregationOp, CellSelection, SupervisionTarget};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(config: &ModelConfig, question: &str, cells: Vec<(usize, usize)>) -> (ModelInput, SupervisionTarget, Vocab) {
    let table = DataTable::new(
        vec!["a".into(), "b".into()],
        vec!["x".into(), "y".into()],
        vec![vec![Some(5.0), Some(-2.5)], vec![Some(7.0), Some(1.0)]],
    )
    .unwrap();
    let vocab = Vocab::build(tokenize(question).into_iter().chain(["a", "b", "x", "y", "5", "7", "all"].map(String::from)));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let raster = Raster {
        size: config.image_size,
        data: (0..config.image_size * config.image_size * 3).map(|_| rng.random::<f64>()).collect(),
    };
    let cfg = ModelConfig { vocab_size: vocab.len(), ..config.clone() };
    let input = ModelInput::new(&cfg, &vocab, &raster, question, &table).unwrap();
    let target = SupervisionTarget::new(AggregationOp::Sum, CellSelection::new(cells), None).unwrap();
    (input, target, vocab)
}

#[test]
fn small_model_gradients() {
    let base = ModelConfig {
        vit_layers: 1,
        tapas_layers: 1,
        cross_blocks: 1,
        ..ModelConfig::default()
    };
    let (input, target, vocab) = sample(&base, "sum of x and y?", vec![(0, 0), (1, 0)]);
    let model = VisionTapas::new(ModelConfig { vocab_size: vocab.len(), ..base }).unwrap();
    let t = Instant::now();
    let report = grad_check(&model, &input, &target, 1.0, 1e-5, 200, 1).unwrap();
    println!(
        "max rel error {:.3e} in {} ({} tensors, {:?})",
        report.max_rel_error,
        report.worst_tensor,
        report.per_tensor.len(),
        t.elapsed()
    );
    assert!(report.per_tensor.iter().all(|c| c.checked >= 200 || c.checked == model.params().get(model.params().index_of(&c.name).unwrap()).len()));
    assert!(report.max_rel_error < 1e-4);
}

#[test]
fn linear_only_gradients() {
    let base = ModelConfig::linear_only();
    let (input, target, vocab) = sample(&base, "sum of all values?", vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    let model = VisionTapas::new(ModelConfig { vocab_size: vocab.len(), ..base }).unwrap();
    let report = grad_check(&model, &input, &target, 1.0, 1e-5, 200, 1).unwrap();
    println!("linear-only max rel error {:.3e} in {}", report.max_rel_error, report.worst_tensor);
    assert!(report.max_rel_error < 1e-8);
}
