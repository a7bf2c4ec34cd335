use super::*;
use crate::cnn::net::Real;

fn tiny(parties: usize, sharing: bool) -> ModelConfig {
    ModelConfig {
        grid_size: 8,
        convs: vec![ConvSpec { out_channels: 2, kernel: 3, pool: 2 }, ConvSpec { out_channels: 3, kernel: 3, pool: 2 }],
        sub_dense: 6,
        head: vec![5],
        weight_sharing: sharing,
        ..ModelConfig::new(parties, 3)
    }
}

fn random_inputs<T: Real>(cfg: &ModelConfig, n: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = crate::rng::from_seed(seed);
    (0..n).map(|_| (0..cfg.input_len()).map(|_| T::from_f64(rng.random::<f64>() * 2.0 - 1.0)).collect()).collect()
}

#[test]
fn default_shapes() {
    let cfg = ModelConfig::new(3, 0);
    assert_eq!(cfg.spatial_sizes(), vec![24, 12, 6]);
    assert_eq!(cfg.flatten_len(), 1152);
    assert_eq!(cfg.input_len(), 3 * 4 * 576);
    let sub = (16 * 4 * 9 + 16) + (32 * 16 * 9 + 32) + (1152 * 128 + 128);
    let head = (384 * 128 + 128) + (128 * 3 + 3);
    assert_eq!(cfg.n_params().unwrap(), 3 * sub + head);
    let quad = ModelConfig::new(4, 0);
    assert_eq!(quad.n_classes(), 5);
    let shared = ModelConfig { weight_sharing: true, ..cfg.clone() };
    assert_eq!(shared.n_params().unwrap(), sub + head);
    let bad = ModelConfig { grid_size: 22, ..cfg };
    assert!(bad.validate().is_err());
}

#[test]
fn outputs_are_probabilities() {
    for parties in [3, 4] {
        let cfg = ModelConfig::new(parties, 5);
        let model = ClassifierModel::new(cfg.clone()).unwrap();
        let x: Vec<f32> = random_inputs::<f32>(&cfg, 1, 1).remove(0).iter().map(|v| v.abs() * 0.01).collect();
        let p = model.forward(&x).unwrap();
        assert_eq!(p.len(), cfg.n_classes());
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(p.iter().all(|&v| v >= 0.0));
        let zero = ClassifierModel::zeros(cfg.clone()).unwrap();
        for v in zero.forward(&x).unwrap() {
            assert!((v - 1.0 / cfg.n_classes() as f64).abs() < 1e-7);
        }
        assert!(model.forward(&x[1..]).is_err());
    }
}

#[test]
fn uniform_output_gives_log_k_loss() {
    let cfg = ModelConfig::new(3, 0);
    let layout = cfg.layout().unwrap();
    let params = vec![0.0f64; layout.total];
    let xs = random_inputs::<f64>(&cfg, 2, 2);
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let (loss, _) = loss_and_gradient(&cfg, &layout, &params, &refs, &[0, 2]).unwrap();
    assert!((loss - 3f64.ln()).abs() < 1e-12);
}

fn he_params(cfg: &ModelConfig) -> Vec<f64> {
    let m = ClassifierModel::new(cfg.clone()).unwrap();
    let mut rng = crate::rng::from_seed(99);
    // nonzero biases
    m.params.iter().map(|&p| if p == 0.0 { rng.random::<f64>() * 0.2 - 0.1 } else { p as f64 }).collect()
}

#[test]
fn gradient_matches_finite_differences() {
    for (parties, sharing) in [(3, false), (4, true)] {
        let cfg = tiny(parties, sharing);
        let params = he_params(&cfg);
        let xs = random_inputs::<f64>(&cfg, 3, 7);
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let labels = [0, 1, 2];
        let gc = gradient_check(&cfg, &params, &refs, &labels, 200, 1e-5, 1e-6, 11).unwrap();
        assert_eq!(gc.checked, 200);
        assert_eq!(gc.blocks.len(), cfg.layout().unwrap().blocks().len());
        assert!(gc.max_rel_error <= 1e-4, "{gc:?}");
    }
}

#[test]
fn duplicated_sample_weights_its_gradient() {
    let cfg = tiny(3, false);
    let layout = cfg.layout().unwrap();
    let params = he_params(&cfg);
    let xs = random_inputs::<f64>(&cfg, 2, 8);
    let (_, ga) = loss_and_gradient(&cfg, &layout, &params, &[&xs[0]], &[1]).unwrap();
    let (_, gb) = loss_and_gradient(&cfg, &layout, &params, &[&xs[1]], &[2]).unwrap();
    let (_, g) = loss_and_gradient(&cfg, &layout, &params, &[&xs[0], &xs[0], &xs[1]], &[1, 1, 2]).unwrap();
    for ((a, b), c) in ga.iter().zip(&gb).zip(&g) {
        assert!((c - (2.0 * a + b) / 3.0).abs() < 1e-12);
    }
}

#[test]
fn chunking_does_not_change_the_loss() {
    let cfg = tiny(3, false);
    let layout = cfg.layout().unwrap();
    let params = he_params(&cfg);
    let xs = random_inputs::<f64>(&cfg, 40, 9);
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
    let (loss, _) = loss_and_gradient(&cfg, &layout, &params, &refs, &labels).unwrap();
    let probs = forward_batch(&cfg, &layout, &params, &refs).unwrap();
    let direct: f64 = probs.iter().zip(&labels).map(|(p, &l)| -p[l].ln()).sum::<f64>() / 40.0;
    assert!((loss - direct).abs() < 1e-12);
    for (i, x) in refs.iter().enumerate().step_by(7) {
        let single = forward_batch(&cfg, &layout, &params, &[x]).unwrap();
        for (a, b) in single[0].iter().zip(&probs[i]) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}

#[test]
fn shared_weights_permute_features() {
    let cfg = ModelConfig { weight_sharing: true, ..tiny(3, true) };
    let model = ClassifierModel::new(cfg.clone()).unwrap();
    let x: Vec<f32> = random_inputs::<f32>(&cfg, 1, 4).remove(0);
    let g = cfg.group_len();
    // relabel modes by (1, 2, 0): group k moves to slot perm[k]
    let perm = [1, 2, 0];
    let mut y = vec![0.0f32; x.len()];
    for (k, &p) in perm.iter().enumerate() {
        y[p * g..(p + 1) * g].copy_from_slice(&x[k * g..(k + 1) * g]);
    }
    let fx = model.features(&x).unwrap();
    let fy = model.features(&y).unwrap();
    for (k, &p) in perm.iter().enumerate() {
        assert_eq!(fx[k], fy[p]);
    }
}

#[test]
fn model_file_round_trip() {
    let mut model = ClassifierModel::new(tiny(4, false)).unwrap();
    model.standardization = Standardization { mean: (0..16).map(|i| i as f32 * 0.1).collect(), std: vec![0.5; 16] };
    let bytes = model.to_bytes().unwrap();
    assert_eq!(&bytes[..4], b"CVPM");
    assert_eq!(ClassifierModel::from_bytes(&bytes).unwrap(), model);
    assert!(ClassifierModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(ClassifierModel::from_bytes(&bad).is_err());
    let again = ClassifierModel::new(tiny(4, false)).unwrap();
    assert_eq!(again.params, model.params);
}

#[test]
fn standardization_per_slot() {
    let a: Vec<f32> = (0..8).map(|i| i as f32).collect();
    let b: Vec<f32> = (0..8).map(|i| (i * 2) as f32).collect();
    let st = Standardization::fit(&[&a, &b], 2).unwrap();
    assert!((st.mean[0] - 2.25).abs() < 1e-6);
    let z: Vec<f64> = st.apply(&a);
    assert_eq!(z.len(), 8);
    let za: Vec<f64> = st.apply(&a);
    let zb: Vec<f64> = st.apply(&b);
    let slot0: Vec<f64> = za[..4].iter().chain(&zb[..4]).copied().collect();
    let m: f64 = slot0.iter().sum::<f64>() / 8.0;
    let v: f64 = slot0.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 8.0;
    assert!(m.abs() < 1e-6 && (v - 1.0).abs() < 1e-5);
}

#[test]
fn confusion_rows_are_normalized() {
    let r = confusion_from_predictions(3, &[0, 0, 1, 1, 2, 2], &[0, 0, 1, 1, 2, 2]).unwrap();
    assert_eq!(r.accuracy, 1.0);
    for (i, row) in r.confusion.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v, if i == j { 1.0 } else { 0.0 });
        }
    }
    let r = confusion_from_predictions(3, &[0, 0, 1, 1, 2, 2], &[0; 6]).unwrap();
    assert!((r.accuracy - 1.0 / 3.0).abs() < 1e-12);
    for row in &r.confusion {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(r.confusion_csv().starts_with("true\\predicted,FULLY_SEP,BISEP,FULLY_INSEP\n"));
}

#[test]
fn adam_moves_against_the_gradient() {
    let opts = TrainOptions::default();
    let mut adam = Adam::new(2, &opts);
    let mut p = vec![1.0f32, -1.0];
    adam.step(&mut p, &[0.5, -2.0]);
    // the first bias-corrected step has size lr in every coordinate
    assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-6);
    assert!((p[1] - (-1.0 + 1e-3)).abs() < 1e-6);
}
