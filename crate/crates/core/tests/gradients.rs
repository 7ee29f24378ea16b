mod common;

use common::*;
use nclab::network::{backward, forward, init_params, MlpArchitecture, NetworkParams};
use nclab::numerics::{Matrix, Rng};

#[test]
fn backprop_matches_central_differences_on_random_nets() {
    let mut rng = Rng::new(11);
    for case in 0..50 {
        let (params, x, y) = random_small_net(&mut rng);
        assert!(min_abs_preactivation(&params, &x) > 1e-3);
        let err = gradient_check(&params, &x, &y, 1e-6);
        assert!(err < 1e-4, "net {case}: relative error {err}");
    }
}

#[test]
fn gradients_of_f32_and_f64_agree() {
    let arch = MlpArchitecture::new(6, vec![8, 5], 3).unwrap();
    let mut rng = Rng::new(3);
    let p32: NetworkParams<f32> = init_params(&arch, &mut rng).unwrap();
    let p64: NetworkParams<f64> = p32.cast();
    let x64 = Matrix::from_vec(10, 6, (0..60).map(|_| rng.standard_normal()).collect()).unwrap();
    let x32: Matrix<f32> = x64.cast();
    let y: Vec<usize> = (0..10).map(|i| i % 3).collect();
    let g32 = backward(&p32, &forward(&p32, &x32).unwrap(), &x32, &y).unwrap();
    let g64 = backward(&p64, &forward(&p64, &x64).unwrap(), &x64, &y).unwrap();
    for (a, b) in g32.iter_values().zip(g64.iter_values()) {
        assert!((a as f64 - b).abs() < 1e-5, "{a} vs {b}");
    }
}

#[test]
fn gradient_of_a_linear_softmax_is_the_textbook_formula() {
    // no hidden layers: dL/dW = X^T (softmax - onehot) / n
    let arch = MlpArchitecture::new(2, vec![], 2).unwrap();
    let mut p: NetworkParams<f64> = NetworkParams::zeros(&arch);
    p.layers[0].weights = Matrix::from_rows(&[vec![0.5, -0.5], vec![1.0, 0.0]]).unwrap();
    let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let y = [0usize, 1];
    let g = backward(&p, &forward(&p, &x).unwrap(), &x, &y).unwrap();
    let s0 = 1.0 / (1.0 + (-1.0f64).exp()); // softmax of logits (0.5, -0.5)
    let s1 = 1.0 / (1.0 + (-1.0f64).exp()); // softmax of logits (1, 0)
    let expected = [(s0 - 1.0) / 2.0, (1.0 - s0) / 2.0, s1 / 2.0, -s1 / 2.0];
    for (a, b) in g.layers[0].weights.as_slice().iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}
