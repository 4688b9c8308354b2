use slrprune_core::data::Batch;
use slrprune_core::model::{Activation, LayerSpec, Network};
use slrprune_core::projection::{project_weight_set, SparsityBudget};
use slrprune_core::rng::Rng;
use slrprune_core::slr::{evaluate_augmented_lagrangian, penalized_gradient};
use slrprune_core::{MultiplierSet, Tensor, WeightSet};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_net(i: usize, rng: &mut Rng) -> Network {
    let layers = match i % 4 {
        0 => vec![
            LayerSpec::dense(2, 4, Activation::Relu),
            LayerSpec::dense(4, 2, Activation::Softmax),
        ],
        1 => vec![
            LayerSpec::dense(3, 5, Activation::Relu),
            LayerSpec::dense(5, 4, Activation::Identity),
            LayerSpec::dense(4, 3, Activation::Softmax),
        ],
        2 => vec![
            LayerSpec::conv2d(1, 2, 5, 5, 3, Activation::Relu),
            LayerSpec::dense(18, 3, Activation::Softmax),
        ],
        _ => vec![
            LayerSpec::conv2d(2, 2, 4, 4, 2, Activation::Relu),
            LayerSpec::conv2d(2, 1, 3, 3, 2, Activation::Identity),
            LayerSpec::dense(4, 2, Activation::Softmax),
        ],
    };
    let mut net = Network::new(layers, rng).unwrap();
    for b in net.biases_mut() {
        for v in b.data_mut() {
            *v = rng.uniform(-0.3, 0.3);
        }
    }
    net
}

fn random_batch(net: &Network, rng: &mut Rng) -> Batch {
    let n = 5;
    let d = net.input_dim();
    let inputs = Tensor::from_vec(&[n, d], (0..n * d).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
    let labels = (0..n).map(|_| rng.below(net.num_outputs())).collect();
    Batch::new(inputs, labels).unwrap()
}

fn perturbed(net: &Network, layer: usize, idx: usize, delta: f64) -> Network {
    let mut n = net.clone();
    n.weights_mut().layers_mut()[layer].data_mut()[idx] += delta;
    n
}

#[test]
fn backward_matches_finite_differences() {
    let mut rng = Rng::new(11);
    for i in 0..20 {
        let net = random_net(i, &mut rng);
        let batch = random_batch(&net, &mut rng);
        let (_, grad) = net.backward(&batch).unwrap();
        for (n, g) in grad.weights.layers().iter().enumerate() {
            for (j, &gj) in g.data().iter().enumerate() {
                let fd = (perturbed(&net, n, j, EPS).loss(&batch).unwrap()
                    - perturbed(&net, n, j, -EPS).loss(&batch).unwrap())
                    / (2.0 * EPS);
                let e = rel_err(gj, fd);
                assert!(e < TOL, "net {i} layer {n} entry {j}: {gj} vs {fd} (rel {e:e})");
            }
        }
        for (n, g) in grad.biases.iter().enumerate() {
            for (j, &gj) in g.data().iter().enumerate() {
                let mut up = net.clone();
                up.biases_mut()[n].data_mut()[j] += EPS;
                let mut down = net.clone();
                down.biases_mut()[n].data_mut()[j] -= EPS;
                let fd = (up.loss(&batch).unwrap() - down.loss(&batch).unwrap()) / (2.0 * EPS);
                assert!(rel_err(gj, fd) < TOL, "net {i} bias {n}/{j}: {gj} vs {fd}");
            }
        }
    }
}

#[test]
fn penalized_gradient_matches_lagrangian_differences() {
    let mut rng = Rng::new(12);
    for i in 0..20 {
        let net = random_net(i, &mut rng);
        let batch = random_batch(&net, &mut rng);
        let budget = SparsityBudget::uniform(0.5, net.weights()).unwrap();
        let z = project_weight_set(net.weights(), &budget).unwrap();
        let lambda = MultiplierSet(WeightSet::new(
            net.weights()
                .layers()
                .iter()
                .map(|t| Tensor::from_vec(t.shape(), (0..t.len()).map(|_| rng.uniform(-0.5, 0.5)).collect()).unwrap())
                .collect(),
        ));
        let rho = rng.uniform(0.05, 2.0);
        let (_, grad) = penalized_gradient(&net, &batch, &z, &lambda, rho).unwrap();
        let l = |n: &Network| evaluate_augmented_lagrangian(n, &z, &lambda, rho, &batch, &budget).unwrap();
        for (n, g) in grad.weights.layers().iter().enumerate() {
            for (j, &gj) in g.data().iter().enumerate() {
                let fd = (l(&perturbed(&net, n, j, EPS)) - l(&perturbed(&net, n, j, -EPS))) / (2.0 * EPS);
                let e = rel_err(gj, fd);
                assert!(e < TOL, "net {i} layer {n} entry {j}: {gj} vs {fd} (rel {e:e})");
            }
        }
    }
}

#[test]
fn duplicated_batch_leaves_gradient_unchanged() {
    let mut rng = Rng::new(13);
    let net = random_net(1, &mut rng);
    let batch = random_batch(&net, &mut rng);
    let mut twice = batch.inputs.data().to_vec();
    twice.extend_from_slice(batch.inputs.data());
    let mut labels = batch.labels.clone();
    labels.extend_from_slice(&batch.labels);
    let doubled = Batch::new(Tensor::from_vec(&[2 * batch.len(), net.input_dim()], twice).unwrap(), labels).unwrap();
    let (l1, g1) = net.backward(&batch).unwrap();
    let (l2, g2) = net.backward(&doubled).unwrap();
    assert!((l1 - l2).abs() < 1e-14);
    for (a, b) in g1.weights.layers().iter().zip(g2.weights.layers()) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
