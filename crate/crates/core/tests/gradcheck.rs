use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spottune::revpred::gradcheck::{logistic_loss_and_grad, seq_loss_and_grad, Example, SeqShape};

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn examples(rng: &mut ChaCha8Rng, n: usize, steps: usize, input: usize, present: usize) -> Vec<Example> {
    (0..n)
        .map(|i| Example {
            history: (0..steps * input).map(|_| rng.random_range(-1.0..1.0)).collect(),
            present: (0..present).map(|_| rng.random_range(-1.0..1.0)).collect(),
            target: (i % 2) as f64,
            weight: if i % 2 == 0 { 0.6 } else { 1.4 },
        })
        .collect()
}

fn check(params: &[f64], f: impl Fn(&[f64]) -> (f64, Vec<f64>)) {
    let (_, grad) = f(params);
    let mut p = params.to_vec();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + STEP;
        let up = f(&p).0;
        p[i] = orig - STEP;
        let down = f(&p).0;
        p[i] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        // Skip parameters whose gradient is numerically zero on both sides.
        if numeric.abs() < 1e-9 && grad[i].abs() < 1e-9 {
            continue;
        }
        let e = rel_err(numeric, grad[i]);
        assert!(e < TOL, "param {i}: analytic {} numeric {numeric} rel {e}", grad[i]);
    }
}

#[test]
fn sequence_network_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let shape = SeqShape { input: 3, hidden: 3, layers: 2, present: 4, dense: 3, dense_layers: 2 };
    let params: Vec<f64> = shape.init(&mut rng).into_iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
    let batch = examples(&mut rng, 3, 5, 3, 4);
    check(&params, |p| seq_loss_and_grad(&shape, p, &batch));
}

#[test]
fn deep_sequence_network_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let shape = SeqShape { input: 6, hidden: 2, layers: 3, present: 7, dense: 2, dense_layers: 3 };
    let params = shape.init(&mut rng);
    let batch = examples(&mut rng, 2, 8, 6, 7);
    check(&params, |p| seq_loss_and_grad(&shape, p, &batch));
}

#[test]
fn logistic_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let params: Vec<f64> = (0..10).map(|_| rng.random_range(-0.5..0.5)).collect();
    let batch = examples(&mut rng, 6, 0, 0, 9);
    check(&params, |p| logistic_loss_and_grad(p, &batch));
}
