use slrprune_core::data::{Dataset, MiniBatchStream};
use slrprune_core::model::{Activation, LayerSpec, Network, OptimizerConfig, OptimizerKind};
use slrprune_core::projection::SparsityBudget;
use slrprune_core::prune::{evaluate_accuracy, hard_prune, masked_retrain, CompressionReport};
use slrprune_core::rng::Rng;
use slrprune_core::trainer::NetworkTrainer;
use slrprune_core::Tensor;

fn rings(n: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let c = i % 2;
        let r = if c == 0 { 0.5 } else { 1.5 } + 0.1 * rng.normal();
        let t = rng.uniform(0.0, std::f64::consts::TAU);
        x.extend([r * t.cos(), r * t.sin()]);
        y.push(c);
    }
    Dataset::new(Tensor::from_vec(&[n, 2], x).unwrap(), y, 2).unwrap()
}

fn trained(seed: u64, epochs: usize) -> (NetworkTrainer, Dataset) {
    let data = rings(256, seed);
    let net = Network::new(
        vec![
            LayerSpec::dense(2, 10, Activation::Relu),
            LayerSpec::dense(10, 10, Activation::Relu),
            LayerSpec::dense(10, 2, Activation::Softmax),
        ],
        &mut Rng::new(seed).fork(1),
    )
    .unwrap();
    let cfg = OptimizerConfig::new(OptimizerKind::Adam, 0.01, 32).unwrap();
    let stream = MiniBatchStream::new(data.clone(), 32, Rng::new(seed).fork(2)).unwrap();
    let mut t = NetworkTrainer::new(net, cfg, stream, data.as_batch().clone());
    t.train_epochs(epochs).unwrap();
    (t, data)
}

#[test]
fn dense_network_learns_rings() {
    let (t, data) = trained(1, 60);
    let acc = evaluate_accuracy(&t.net, data.as_batch()).unwrap();
    assert!(acc >= 0.99, "train accuracy {acc}");
}

#[test]
fn hard_prune_is_idempotent_and_meets_the_budget() {
    let (t, _) = trained(2, 5);
    let budget = SparsityBudget::uniform(0.7, t.net.weights()).unwrap();
    let (once, mask) = hard_prune(&t.net, &budget).unwrap();
    let (twice, mask2) = hard_prune(&once, &budget).unwrap();
    assert_eq!(once, twice);
    assert_eq!(mask, mask2);
    assert_eq!(once.weights().nonzeros(), budget.limits());
    assert_eq!(once.biases(), t.net.biases());
}

#[test]
fn full_budget_keeps_everything() {
    let (t, _) = trained(3, 1);
    let budget = SparsityBudget::dense(t.net.weights());
    let (pruned, mask) = hard_prune(&t.net, &budget).unwrap();
    assert_eq!(pruned, t.net);
    assert!(mask.layers().iter().all(|m| m.data().iter().all(|&v| v == 1.0)));
    assert_eq!(CompressionReport::from_weights(pruned.weights()).compression_rate, 1.0);
}

#[test]
fn ten_of_a_hundred_is_ten_times() {
    let mut rng = Rng::new(4);
    let net = Network::new(vec![LayerSpec::dense(10, 10, Activation::Softmax)], &mut rng).unwrap();
    let budget = SparsityBudget::uniform(0.9, net.weights()).unwrap();
    assert_eq!(budget.limits(), &[10]);
    let (pruned, _) = hard_prune(&net, &budget).unwrap();
    let report = CompressionReport::from_weights(pruned.weights());
    assert_eq!((report.total_weights, report.nonzero_weights), (100, 10));
    assert_eq!(report.compression_rate, 10.0);
}

#[test]
fn retraining_keeps_masked_weights_at_zero() {
    let (t, data) = trained(5, 5);
    let budget = SparsityBudget::uniform(0.8, t.net.weights()).unwrap();
    let (pruned, mask) = hard_prune(&t.net, &budget).unwrap();
    let cfg = OptimizerConfig::new(OptimizerKind::Adam, 0.01, 32).unwrap();
    let mut stream = MiniBatchStream::new(data, 32, Rng::new(8)).unwrap();

    let mut same = pruned.clone();
    masked_retrain(&mut same, &mask, 0, cfg, &mut stream).unwrap();
    assert_eq!(same, pruned);

    let mut net = pruned.clone();
    masked_retrain(&mut net, &mask, 5, cfg, &mut stream).unwrap();
    assert_ne!(net, pruned);
    assert!(budget.is_feasible(net.weights()));
    for (w, m) in net.weights().layers().iter().zip(mask.layers()) {
        for (v, keep) in w.data().iter().zip(m.data()) {
            if *keep == 0.0 {
                assert_eq!(*v, 0.0);
            }
        }
    }
}

#[test]
fn accuracy_on_duplicated_data_and_constant_output() {
    let (t, data) = trained(6, 3);
    let batch = data.as_batch();
    let mut x = batch.inputs.data().to_vec();
    x.extend_from_slice(batch.inputs.data());
    let mut y = batch.labels.clone();
    y.extend_from_slice(&batch.labels);
    let doubled = Dataset::new(Tensor::from_vec(&[2 * batch.len(), 2], x).unwrap(), y, 2).unwrap();
    assert_eq!(
        evaluate_accuracy(&t.net, batch).unwrap(),
        evaluate_accuracy(&t.net, doubled.as_batch()).unwrap()
    );

    let mut constant = t.net.clone();
    for l in constant.weights_mut().layers_mut() {
        l.data_mut().fill(0.0);
    }
    let acc = evaluate_accuracy(&constant, batch).unwrap();
    assert!((acc - 0.5).abs() < 1e-12, "balanced two-class chance level, got {acc}");
}
