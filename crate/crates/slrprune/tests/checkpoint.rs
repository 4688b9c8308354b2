use slrprune::checkpoint::{load_network, load_run, save_network, save_run};
use slrprune::error::HarnessError;
use slrprune_core::model::{Activation, LayerSpec, Network};
use slrprune_core::projection::SparsityBudget;
use slrprune_core::pruner::{Method, Pruner};
use slrprune_core::rng::Rng;
use slrprune_core::slr::SlrParams;

fn net() -> Network {
    Network::new(
        vec![
            LayerSpec::conv2d(1, 2, 4, 4, 3, Activation::Relu),
            LayerSpec::dense(8, 3, Activation::Softmax),
        ],
        &mut Rng::new(1),
    )
    .unwrap()
}

#[test]
fn network_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    let mut n = net();
    n.biases_mut()[1].data_mut()[0] = 0.1 + 0.2;
    save_network(&path, &n, "slr").unwrap();
    let (back, method) = load_network(&path).unwrap();
    assert_eq!(back, n);
    assert_eq!(method, "slr");
}

#[test]
fn run_round_trip_keeps_method_state() {
    let dir = tempfile::tempdir().unwrap();
    let n = net();
    let budget = SparsityBudget::uniform(0.5, n.weights()).unwrap();
    for method in [Method::Slr(SlrParams::default()), Method::Admm { rho: 0.2, inner_steps: 3 }] {
        let pruner = Pruner::init(&method, n.weights(), &budget).unwrap();
        let path = dir.path().join(format!("{}.json", method.name()));
        save_run(&path, n.weights(), &pruner).unwrap();
        let (w, back) = load_run(&path).unwrap();
        assert_eq!(&w, n.weights());
        assert_eq!(back, pruner);
    }
}

#[test]
fn wrong_format_or_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    save_network(&path, &net(), "admm").unwrap();
    assert!(matches!(load_run(&path), Err(HarnessError::Checkpoint { .. })));

    let text = std::fs::read_to_string(&path).unwrap().replacen("\"version\": 1", "\"version\": 99", 1);
    std::fs::write(&path, text).unwrap();
    assert!(matches!(load_network(&path), Err(HarnessError::Checkpoint { .. })));
}
