mod common;

use common::fixtures::small_dataset;
use cvent_core::cnn::{evaluate, train, ClassifierModel, ModelConfig, TrainOptions};

#[test]
fn memorizes_thirty_two_samples() {
    let ds = small_dataset(3, 11, 13);
    let ds = ds.subset(&(0..32).collect::<Vec<_>>());
    let opts = TrainOptions { batch_size: 32, max_epochs: 500, max_steps: Some(500), shuffle_seed: 1, ..TrainOptions::default() };
    let mut first_perfect = None;
    let (model, report) = train(ClassifierModel::new(ModelConfig::new(3, 7)).unwrap(), &ds, None, &opts, |r| {
        if r.train_accuracy == 1.0 && first_perfect.is_none() {
            first_perfect = Some(r.epoch);
        }
    })
    .unwrap();
    assert!(report.steps <= 500);
    assert!(first_perfect.is_some());
    assert_eq!(evaluate(&model, &ds).unwrap().accuracy, 1.0);
}

#[test]
fn confusion_rows_are_distributions() {
    let ds = small_dataset(4, 3, 2);
    let model = ClassifierModel::new(ModelConfig::new(4, 3)).unwrap();
    let report = evaluate(&model, &ds).unwrap();
    assert_eq!(report.confusion.len(), 5);
    for row in &report.confusion {
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
    }
    let csv = report.confusion_csv();
    assert_eq!(csv.lines().count(), 6);
}
