mod common;

use clonescope::mil::{evaluate, grid_search, train, Bag, BatchMode, Method, MilModel, ModelConfig, TrainParams};
use common::logistic_regression_accuracy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn separable(n_bags: usize, seed: u64) -> Vec<Bag<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Normal::new(0.0, 0.5).unwrap();
    (0..n_bags)
        .map(|i| {
            let label = i % 2;
            let shift = if label == 0 { -1.5 } else { 1.5 };
            let instances: Vec<Vec<f64>> =
                (0..4).map(|_| (0..3).map(|d| g.sample(&mut rng) + if d == 0 { shift } else { 0.0 }).collect()).collect();
            Bag {
                image_id: format!("b{i}"),
                patch_ids: (0..4).map(|k| format!("b{i}_{k}")).collect(),
                instances,
                clone: ["A", "B"][label].into(),
                label,
                isolate: format!("iso{}", i % 6),
                preparation: "p0".into(),
            }
        })
        .collect()
}

fn classes() -> Vec<String> {
    vec!["A".into(), "B".into()]
}

#[test]
fn separable_fixture_is_learned_by_every_method() {
    let bags = separable(40, 1);
    let xs: Vec<Vec<f64>> = bags.iter().flat_map(|b| b.instances.clone()).collect();
    let ys: Vec<bool> = bags.iter().flat_map(|b| vec![b.label == 1; b.len()]).collect();
    assert_eq!(logistic_regression_accuracy(&xs, &ys, 2000, 0.5), 1.0);
    for method in Method::ALL {
        let model = MilModel::<f64>::new(method, classes(), 3, ModelConfig::default(), 7).unwrap();
        let params = TrainParams { steps: 500, decay_every: 1000, ..TrainParams::default() };
        let out = train(model, &bags, &params).unwrap();
        let report = evaluate(&out.model, &bags, method).unwrap();
        assert_eq!(report.accuracy, 1.0, "{method:?}");
    }
}

#[test]
fn grid_picks_working_learning_rate() {
    let (tr, va) = (separable(30, 2), separable(20, 3));
    let model = MilModel::<f64>::new(Method::Abmilp, classes(), 3, ModelConfig::default(), 3).unwrap();
    let base = TrainParams { steps: 300, batch: BatchMode::Full, ..TrainParams::default() };
    let g = grid_search(&model, &tr, &va, &[0.0, 0.05], &[1e-4], &base).unwrap();
    assert_eq!(g.best_lr, 0.05);
}
