use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::forward::sigmoid;
use super::*;
use crate::dataset::{AveragedStep, DatasetSplit, LabeledTrajectory};
use crate::zone_graph::ZoneId;

fn shape(s: usize, h: usize, z: usize, d: usize, layers: usize) -> Shape {
    Shape { input_dim: s, hidden_dim: h, class_dim: z, dense_dim: d, layers }
}

fn random_params(shape: Shape, seed: u64) -> NetParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = NetParams::init(shape, &mut rng);
    for block in p.blocks_mut() {
        for v in block.iter_mut() {
            *v += rand::Rng::random_range(&mut rng, -0.3..0.3);
        }
    }
    p
}

fn scalar_params() -> NetParams {
    let mut p = NetParams::zeros(shape(1, 1, 1, 1, 1));
    let l = &mut p.lstm[0];
    let set = |m: &mut Matrix, v: f64| m.data[0] = v;
    set(&mut l.w_xi, 0.5);
    set(&mut l.w_hi, -0.3);
    set(&mut l.w_ci, 0.2);
    l.b_i[0] = 0.1;
    set(&mut l.w_xf, -0.4);
    set(&mut l.w_hf, 0.6);
    set(&mut l.w_cf, 0.3);
    l.b_f[0] = 0.2;
    set(&mut l.w_xc, 0.7);
    set(&mut l.w_hc, -0.5);
    l.b_c[0] = -0.1;
    set(&mut l.w_xo, 0.3);
    set(&mut l.w_ho, 0.8);
    set(&mut l.w_co, -0.6);
    l.b_o[0] = 0.05;
    p
}

#[test]
fn zero_params_give_zero_state() {
    let p = NetParams::zeros(shape(3, 4, 2, 2, 1));
    let s = lstm_step(&p, &[0.3, -1.0, 2.0], &RecurrentState::zeros(&p));
    assert!(s.h().iter().all(|&v| v == 0.0));
    assert!(s.c().iter().all(|&v| v == 0.0));
}

#[test]
fn scalar_step_matches_hand_evaluation() {
    // Values from a separate scalar evaluation of the five cell equations.
    let p = scalar_params();
    let prev = RecurrentState { layers: vec![CellState { h: vec![0.4], c: vec![-0.7] }] };
    let s = lstm_step(&p, &[0.9], &prev);
    assert!((s.c()[0] - -0.14508933288214895).abs() < 1e-12);
    assert!((s.h()[0] - -0.09713256669280924).abs() < 1e-12);
    // An output gate reading C_{t-1} would give -0.10700666468712229.
    assert!((s.h()[0] - -0.10700666468712229).abs() > 1e-3);
}

#[test]
fn paper_scale_shapes() {
    let cfg = NetConfig::paper_scale();
    let p = NetParams::init((&cfg).into(), &mut ChaCha8Rng::seed_from_u64(0));
    let s = lstm_step(&p, &vec![0.5; 142], &RecurrentState::zeros(&p));
    assert_eq!(s.h().len(), 200);
    assert_eq!(s.c().len(), 200);
    assert_eq!(classify(&p, s.h()).len(), 115);
}

#[test]
fn zero_classifier_is_uniform() {
    let p = NetParams::zeros(shape(2, 3, 5, 4, 1));
    let probs = classify(&p, &[0.1, 0.2, 0.3]);
    assert!(probs.iter().all(|&q| (q - 0.2).abs() < 1e-15));
}

#[test]
fn loss_values() {
    assert_eq!(loss(&[1.0, 0.0], 0), 0.0);
    assert!((loss(&[0.5, 0.5], 1) - 2f64.ln()).abs() < 1e-15);
    let uniform = vec![1.0 / 115.0; 115];
    assert!((loss(&uniform, 7) - 115f64.ln()).abs() < 1e-12);
    assert!((loss(&[1.0, 0.0], 1) - -(1e-12f64).ln()).abs() < 1e-9);
}

#[test]
fn single_step_sequence_is_composition() {
    let p = random_params(shape(3, 4, 3, 4, 1), 1);
    let x = [0.2, 0.7, 0.1];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let seq = forward_sequence(&p, &[x], Mode::Infer, &mut rng);
    let s = lstm_step(&p, &x, &RecurrentState::zeros(&p));
    assert_eq!(seq, vec![classify(&p, s.h())]);
    let l = forward_sequence(&p, &[x; 7], Mode::Infer, &mut rng);
    assert_eq!(l.len(), 7);
    assert_eq!(l.last().unwrap(), &predict_last(&p, &[x; 7]));
}

#[test]
fn repeated_input_settles() {
    let mut p = random_params(shape(3, 4, 3, 4, 1), 2);
    // Shrink recurrent weights so the state map is a contraction.
    let l = &mut p.lstm[0];
    for m in [&mut l.w_hi, &mut l.w_hf, &mut l.w_hc, &mut l.w_ho] {
        m.data.iter_mut().for_each(|v| *v *= 0.2);
    }
    let x = [0.4, 0.1, 0.9];
    let mut s = RecurrentState::zeros(&p);
    let mut outputs = Vec::new();
    for _ in 0..400 {
        s = lstm_step(&p, &x, &s);
        outputs.push(classify(&p, s.h()));
    }
    let tail = &outputs[300..];
    for w in tail.windows(2) {
        let diff = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }
}

#[test]
fn infer_mode_ignores_rng() {
    let p = random_params(shape(3, 4, 3, 4, 1), 3);
    let h = [0.3, -0.2, 0.5, 0.1];
    let a = classifier_forward(&p, &h, Mode::Infer, &mut ChaCha8Rng::seed_from_u64(1));
    let b = classifier_forward(&p, &h, Mode::Infer, &mut ChaCha8Rng::seed_from_u64(2));
    assert_eq!(a, b);
    assert_eq!(a, classify(&p, &h));
    let t = classifier_forward(&p, &h, Mode::Train { dropout: 0.5 }, &mut ChaCha8Rng::seed_from_u64(1));
    assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

fn numeric_gradient(p: &NetParams, inputs: &[Vec<f64>], labels: &[ZoneId], step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut q = p.clone();
    let sizes: Vec<usize> = p.blocks().iter().map(|(_, b)| b.len()).collect();
    for (b, &n) in sizes.iter().enumerate() {
        for i in 0..n {
            let orig = q.blocks_mut()[b][i];
            q.blocks_mut()[b][i] = orig + step;
            let up = sequence_loss(&q, inputs, labels);
            q.blocks_mut()[b][i] = orig - step;
            let down = sequence_loss(&q, inputs, labels);
            q.blocks_mut()[b][i] = orig;
            out.push((up - down) / (2.0 * step));
        }
    }
    out
}

fn check_gradient(shape: Shape, steps: usize, seed: u64) {
    let p = random_params(shape, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let inputs: Vec<Vec<f64>> =
        (0..steps).map(|_| (0..shape.input_dim).map(|_| rand::Rng::random::<f64>(&mut rng)).collect()).collect();
    let labels: Vec<ZoneId> = (0..steps).map(|t| ZoneId(t % shape.class_dim)).collect();
    let g = backward(&p, &inputs, &labels, 0.0, &mut rng);
    assert!((g.loss - sequence_loss(&p, &inputs, &labels)).abs() < 1e-14);
    let analytic: Vec<f64> = g.grad.blocks().into_iter().flat_map(|(_, b)| b.to_vec()).collect();
    let numeric = numeric_gradient(&p, &inputs, &labels, 1e-5);
    for (k, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        // Central differences on an O(1) loss carry ~1e-11 of rounding noise.
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-300);
        assert!((a - n).abs() < 1e-9 || rel < 1e-4, "entry {k}: {a} vs {n} (rel {rel})");
    }
}

#[test]
fn stacked_layers_gradient_matches_finite_differences() {
    check_gradient(shape(3, 3, 3, 3, 2), 4, 11);
}

#[test]
fn single_layer_gradient_matches_finite_differences() {
    check_gradient(shape(4, 3, 2, 3, 1), 5, 12);
}

#[test]
fn window_gradient_ignores_outside_steps() {
    let p = random_params(shape(3, 3, 2, 3, 1), 5);
    let inputs: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64 * 0.1, 0.5, 0.2]).collect();
    let labels = vec![ZoneId(1); 6];
    let window = &inputs[3..];
    let g1 = backward(&p, window, &labels[3..], 0.0, &mut ChaCha8Rng::seed_from_u64(0));
    let mut changed = inputs.clone();
    changed[0] = vec![9.0, 9.0, 9.0];
    let g2 = backward(&p, &changed[3..], &labels[3..], 0.0, &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(g1.grad, g2.grad);
}

fn constant_trajectories(n: usize, len: usize, width: usize, label: usize) -> Vec<LabeledTrajectory> {
    (0..n)
        .map(|k| {
            let steps = (0..len)
                .map(|i| AveragedStep {
                    timestamp: (i + 1) as f64,
                    x: (0..width).map(|j| ((k + i * j) % 7) as f64 / 7.0).collect(),
                    label: Some(ZoneId(label)),
                })
                .collect();
            LabeledTrajectory::new(steps, 1.0).unwrap()
        })
        .collect()
}

fn small_config() -> NetConfig {
    NetConfig {
        input_dim: 4,
        hidden_dim: 6,
        class_dim: 3,
        dense_dim: 6,
        layers: 1,
        lookback: 5,
        dropout_rate: 0.0,
        learning_rate: 0.1,
        epochs: 5,
        seed: 3,
    }
}

#[test]
fn one_zone_training_collapses() {
    let split = DatasetSplit {
        train: constant_trajectories(200, 10, 4, 2),
        validation: constant_trajectories(5, 10, 4, 2),
        test: vec![],
    };
    let report = train(&small_config(), &split).unwrap();
    let last = *report.train_loss.last().unwrap();
    assert!(last < 1e-3, "{:?}", report.train_loss);
    assert_eq!(report.train_loss.len(), 5);
}

#[test]
fn training_is_reproducible_and_selects_argmin() {
    let mut train_set = constant_trajectories(30, 8, 4, 0);
    train_set.extend(constant_trajectories(30, 8, 4, 1).into_iter().map(|mut t| {
        t.steps.iter_mut().for_each(|s| s.x.iter_mut().for_each(|v| *v = 1.0 - *v));
        t
    }));
    let split = DatasetSplit { train: train_set.clone(), validation: train_set[25..35].to_vec(), test: vec![] };
    let cfg = NetConfig { dropout_rate: 0.5, epochs: 6, ..small_config() };
    let a = train(&cfg, &split).unwrap();
    let b = train(&cfg, &split).unwrap();
    assert_eq!(a.train_loss, b.train_loss);
    assert_eq!(a.validation_loss, b.validation_loss);
    assert_eq!(a.selected_params, b.selected_params);
    let argmin = a
        .validation_loss
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i + 1)
        .unwrap();
    assert_eq!(a.selected_epoch, argmin);
    assert!((dataset_loss(&a.selected_params, &split.validation) - a.validation_loss[argmin - 1]).abs() < 1e-15);
}

#[test]
fn training_rejects_bad_input() {
    let split = DatasetSplit { train: constant_trajectories(2, 3, 4, 0), validation: vec![], test: vec![] };
    assert!(train(&small_config(), &split).is_err());
    let split = DatasetSplit {
        train: constant_trajectories(2, 3, 4, 0),
        validation: constant_trajectories(1, 3, 4, 0),
        test: vec![],
    };
    assert!(matches!(train(&NetConfig { epochs: 0, ..small_config() }, &split), Err(NetError::Config(_))));
    assert!(matches!(train(&NetConfig { input_dim: 5, ..small_config() }, &split), Err(NetError::Shape(_))));
}

#[test]
fn model_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let p = random_params(shape(5, 4, 3, 4, 2), 9);
    let model = ModelFile { params: p.clone(), seed: 77, digest: [7; 32] };
    save_params(&model, &path).unwrap();
    let back = load_params(&path).unwrap();
    assert_eq!(back, model);
    for ((_, a), (_, b)) in back.params.blocks().iter().zip(p.blocks()) {
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert!(matches!(load_params_for(&path, 5, 4), Err(NetError::Shape(_))));
    assert!(load_params_for(&path, 5, 3).is_ok());

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(load_params(&path), Err(NetError::Corrupt(_))));
    std::fs::write(&path, &bytes[..20]).unwrap();
    assert!(matches!(load_params(&path), Err(NetError::Corrupt(_))));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(load_params(&path), Err(NetError::Corrupt(_))));
}

proptest! {
    #[test]
    fn gates_and_outputs_bounded(
        xs in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 1..8),
        seed in 0u64..1000,
    ) {
        let p = random_params(shape(3, 4, 5, 4, 1), seed);
        let mut s = RecurrentState::zeros(&p);
        for x in &xs {
            s = lstm_step(&p, x, &s);
            prop_assert!(s.h().iter().all(|v| v.abs() <= 1.0 && v.is_finite()));
            let probs = classify(&p, s.h());
            prop_assert!(probs.iter().all(|&q| q > 0.0));
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
