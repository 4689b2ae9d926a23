mod common;

use avoidnet_core::canet::{
    argmax, evaluate, train_matrices, Architecture, CaNet, Mode, TrainConfig,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use common::gradient_check;

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

#[test]
fn backprop_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = CaNet::<f64>::new(&mut rng);
    let x = gaussian(3, net.input_dim(), &mut rng);
    let labels = [3, 17, 60];
    let worst = gradient_check(&net, &x, &labels, 50, 9);
    assert!(worst < 1e-4, "relative error {worst}");
}

#[test]
fn small_network_memorises_a_hundred_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let arch = Architecture {
        main: vec![40, 64, 64],
        aux_in: 2,
        aux_width: 16,
        classes: 61,
    };
    let mut net = CaNet::<f64>::with_architecture(arch, &mut rng).unwrap();
    let x = gaussian(100, 42, &mut rng);
    let y: Vec<usize> = (0..100).map(|_| rng.random_range(0..61)).collect();
    let cfg = TrainConfig {
        learning_rate: 0.05,
        max_epochs: 300,
        batch_size: 20,
        ..TrainConfig::default()
    };
    let empty = Array2::zeros((0, 42));
    train_matrices(&mut net, x.view(), &y, empty.view(), &[], &cfg, |_| {}).unwrap();
    let (_, acc) = evaluate(&net, x.view(), &y).unwrap();
    assert!(acc > 0.95, "accuracy {acc}");
}

#[test]
fn he_init_keeps_activation_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = CaNet::<f64>::new(&mut rng);
    for layer in &net.main {
        let n = layer.weights.len() as f64;
        let var = layer.weights.iter().map(|w| w * w).sum::<f64>() / n;
        let expected = 2.0 / layer.inputs() as f64;
        assert!(
            (var / expected - 1.0).abs() < 0.05,
            "variance {var} vs {expected}"
        );
        assert!(layer.bias.iter().all(|&b| b == 0.0));
    }
}

#[test]
fn inverted_dropout_preserves_expected_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let arch = Architecture {
        main: vec![30, 50],
        aux_in: 2,
        aux_width: 8,
        classes: 5,
    };
    let net = CaNet::<f64>::with_architecture(arch, &mut rng).unwrap();
    let x = gaussian(1, 32, &mut rng);
    // Compare the concatenated features through the head's logits: the head
    // is linear, so mean logits under dropout must match eval logits.
    let mut logits = |mode| {
        let cache = net.forward_batch(x.view(), mode, &mut rng).unwrap();
        cache.probabilities.mapv(f64::ln)
    };
    let eval = logits(Mode::Eval);
    let runs = 20_000;
    let mut acc = Array2::<f64>::zeros(eval.raw_dim());
    for _ in 0..runs {
        let l = logits(Mode::Train);
        // Log-probabilities differ from logits by a per-row constant.
        let shift = l[[0, 0]];
        acc += &l.mapv(|v| v - shift);
    }
    acc /= runs as f64;
    let eval_shifted = eval.mapv(|v| v - eval[[0, 0]]);
    for (a, b) in acc.iter().zip(eval_shifted.iter()) {
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
}

#[test]
fn argmax_prefers_lowest_index() {
    assert_eq!(argmax(&[0.2, 0.5, 0.5, 0.1]), 1);
    assert_eq!(argmax(&[1.0f32]), 0);
}
