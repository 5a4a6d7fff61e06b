mod common;

use common::{gan_gradient_error, mlp_gradient_error, svm_gradient_error};

#[test]
fn objective_gradient_matches_central_differences() {
    for seed in 0..12 {
        let e = gan_gradient_error(seed);
        assert!(e <= 1e-5, "seed {seed}: relative error {e:.3e}");
    }
}

#[test]
fn mlp_gradients_match_central_differences() {
    for seed in 100..112 {
        let e = mlp_gradient_error(seed);
        assert!(e <= 1e-5, "seed {seed}: relative error {e:.3e}");
    }
}

#[test]
fn svm_decision_gradient_matches_central_differences() {
    for seed in 0..10 {
        let e = svm_gradient_error(seed);
        assert!(e <= 1e-5, "seed {seed}: relative error {e:.3e}");
    }
}
