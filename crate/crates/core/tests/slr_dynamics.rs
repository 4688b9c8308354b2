use slrprune_core::admm::{admm_init, admm_iterate};
use slrprune_core::data::{Dataset, MiniBatchStream};
use slrprune_core::dual::{random_instance, QuadraticModel};
use slrprune_core::model::{Activation, LayerSpec, Network, OptimizerConfig, OptimizerKind};
use slrprune_core::projection::SparsityBudget;
use slrprune_core::pruner::{Method, Pruner};
use slrprune_core::rng::Rng;
use slrprune_core::slr::{alpha_schedule, slr_init, slr_iterate, solve_loss_subproblem, LossModel, SlrParams};
use slrprune_core::trainer::NetworkTrainer;
use slrprune_core::{MultiplierSet, Result, Tensor, WeightSet};

/// `f ≡ 0`: the loss subproblem is solved exactly by `W = Z − Λ/ρ`, or
/// not at all when `frozen`.
struct ZeroLoss {
    w: WeightSet,
    frozen: bool,
}

impl LossModel for ZeroLoss {
    fn weights(&self) -> &WeightSet {
        &self.w
    }

    fn condition_loss(&self) -> Result<f64> {
        Ok(0.0)
    }

    fn minimize_penalized(&mut self, z: &WeightSet, m: &MultiplierSet, rho: f64, _steps: usize) -> Result<()> {
        if !self.frozen {
            let mut w = z.clone();
            w.add_scaled(-1.0 / rho, m)?;
            self.w = w;
        }
        Ok(())
    }
}

fn scalar(v: f64) -> WeightSet {
    WeightSet::new(vec![Tensor::vector(vec![v]).unwrap()])
}

fn blobs(n: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 2;
        let centre = if c == 0 { -1.0 } else { 1.0 };
        x.push(centre + 0.4 * rng.normal());
        x.push(centre + 0.4 * rng.normal());
        y.push(c);
    }
    Dataset::new(Tensor::from_vec(&[n, 2], x).unwrap(), y, 2).unwrap()
}

fn trainer(seed: u64) -> NetworkTrainer {
    let data = blobs(128, seed);
    let net = Network::new(
        vec![
            LayerSpec::dense(2, 8, Activation::Relu),
            LayerSpec::dense(8, 2, Activation::Softmax),
        ],
        &mut Rng::new(seed).fork(1),
    )
    .unwrap();
    let cfg = OptimizerConfig::new(OptimizerKind::Adam, 0.01, 32).unwrap();
    let condition = data.as_batch().clone();
    let stream = MiniBatchStream::new(data, 32, Rng::new(seed).fork(2)).unwrap();
    NetworkTrainer::new(net, cfg, stream, condition)
}

#[test]
fn feasible_fixed_point_terminates() {
    let w = WeightSet::new(vec![Tensor::vector(vec![1.0, 0.0, -2.0]).unwrap()]);
    let budget = SparsityBudget::new(vec![2], &w).unwrap();
    let mut model = ZeroLoss { w: w.clone(), frozen: false };
    let (mut z, mut m, mut state) = slr_init(&w, &budget, &SlrParams::default()).unwrap();
    assert_eq!(z, w);
    let rec = slr_iterate(&mut model, &mut z, &mut m, &mut state, &budget).unwrap();
    assert_eq!(rec.violation, 0.0);
    assert!(rec.converged && state.converged);
    assert!(!rec.multipliers_changed_w && !rec.multipliers_changed_z);
    assert!(m.layers()[0].data().iter().all(|&x| x == 0.0));
    assert_eq!(model.w, w);
}

#[test]
fn admm_scalar_multiplier_step() {
    let w = scalar(2.0);
    let budget = SparsityBudget::new(vec![0], &w).unwrap();
    let mut model = ZeroLoss { w: w.clone(), frozen: true };
    let (mut z, mut m, mut state) = admm_init(&w, &budget, 1.0, 1).unwrap();
    assert_eq!(z, scalar(0.0));
    let rec = admm_iterate(&mut model, &mut z, &mut m, &mut state, &budget).unwrap();
    assert_eq!(m.layers()[0].data(), &[2.0]);
    assert_eq!(rec.violation, 2.0);
}

#[test]
fn admm_fixed_point_keeps_multipliers() {
    let w = WeightSet::new(vec![Tensor::vector(vec![3.0, 0.0]).unwrap()]);
    let budget = SparsityBudget::new(vec![1], &w).unwrap();
    let mut model = ZeroLoss { w: w.clone(), frozen: false };
    let (mut z, mut m, mut state) = admm_init(&w, &budget, 0.5, 1).unwrap();
    for _ in 0..3 {
        let rec = admm_iterate(&mut model, &mut z, &mut m, &mut state, &budget).unwrap();
        assert!(rec.converged);
    }
    assert_eq!(model.w, w);
    assert!(m.layers()[0].data().iter().all(|&x| x == 0.0));
}

#[test]
fn zero_loss_sgd_step_is_the_penalty_gradient() {
    // Zero inputs and biases give zero loss gradients for every weight.
    let net = Network::new(
        vec![
            LayerSpec::dense(2, 3, Activation::Relu),
            LayerSpec::dense(3, 2, Activation::Softmax),
        ],
        &mut Rng::new(4),
    )
    .unwrap();
    let data = Dataset::new(Tensor::zeros(&[4, 2]).unwrap(), vec![0, 1, 0, 1], 2).unwrap();
    let lr = 0.05;
    let cfg = OptimizerConfig::new(OptimizerKind::Sgd, lr, 4).unwrap();
    let stream = MiniBatchStream::new(data.clone(), 4, Rng::new(1)).unwrap();
    let mut t = NetworkTrainer::new(net.clone(), cfg, stream, data.as_batch().clone());
    let budget = SparsityBudget::uniform(0.5, net.weights()).unwrap();
    let z = slrprune_core::projection::project_weight_set(net.weights(), &budget).unwrap();
    let mut rng = Rng::new(9);
    let m = MultiplierSet(WeightSet::new(
        net.weights()
            .layers()
            .iter()
            .map(|l| Tensor::from_vec(l.shape(), (0..l.len()).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap())
            .collect(),
    ));
    let rho = 0.3;
    solve_loss_subproblem(&mut t, &z, &m, rho, 1).unwrap();
    for n in 0..2 {
        let (w0, zn, mn) = (&net.weights().layers()[n], &z.layers()[n], &m.layers()[n]);
        for i in 0..w0.len() {
            let (w, zz, l) = (w0.data()[i], zn.data()[i], mn.data()[i]);
            let expected = w - lr * (l + rho * (w - zz));
            assert!((t.net.weights().layers()[n].data()[i] - expected).abs() < 1e-15);
        }
    }
}

#[test]
fn no_relaxation_reduces_to_plain_training() {
    let mut a = trainer(3);
    let mut b = a.clone();
    a.train_epochs(2).unwrap();
    let zero = WeightSet::zeros_like(b.net.weights());
    let steps = 2 * b.steps_per_epoch();
    b.minimize_penalized(&zero, &MultiplierSet::zeros_like(&zero), 0.0, steps).unwrap();
    assert_eq!(a.net, b.net);

    let before = b.net.clone();
    solve_loss_subproblem(&mut b, &zero, &MultiplierSet::zeros_like(&zero), 0.1, 0).unwrap();
    assert_eq!(before, b.net);
}

fn network_run(method: Method, iterations: usize) -> (Vec<slrprune_core::slr::RunRecord>, Vec<bool>) {
    let mut t = trainer(21);
    t.train_epochs(5).unwrap();
    let budget = SparsityBudget::new(vec![4, 4], t.net.weights()).unwrap();
    let mut pruner = Pruner::init(&method, t.net.weights(), &budget).unwrap();
    let mut records = Vec::new();
    let mut changed = Vec::new();
    for _ in 0..iterations {
        let before = pruner.multipliers.clone();
        let rec = pruner.iterate(&mut t, &budget).unwrap();
        assert!(budget.is_feasible(&pruner.z), "Z infeasible at k={}", rec.k);
        changed.push(before != pruner.multipliers);
        records.push(rec);
    }
    (records, changed)
}

#[test]
fn slr_multipliers_move_only_under_the_surrogate_conditions() {
    let params = SlrParams {
        inner_steps: 4,
        ..SlrParams::default()
    };
    let (records, changed) = network_run(Method::Slr(params), 30);
    for (r, c) in records.iter().zip(&changed) {
        assert_eq!(*c, r.multipliers_changed_w || r.multipliers_changed_z, "k={}", r.k);
        assert!(!r.multipliers_changed_w || r.soc_w);
        assert!(!r.multipliers_changed_z || r.soc_z);
        assert!(r.alpha < 1.0 && r.s > 0.0 && r.s_prime > 0.0);
    }
    assert!(changed.iter().any(|&c| c));
}

#[test]
fn identical_seeds_give_identical_records() {
    let slr = Method::Slr(SlrParams {
        inner_steps: 4,
        ..SlrParams::default()
    });
    assert_eq!(network_run(slr, 15).0, network_run(slr, 15).0);
    let admm = Method::Admm { rho: 0.1, inner_steps: 4 };
    assert_eq!(network_run(admm, 15).0, network_run(admm, 15).0);
}

#[test]
fn stepsizes_decrease_over_a_long_run() {
    let inst = random_instance(&mut Rng::new(77), 6, 2, 0.1).unwrap();
    let mut model = QuadraticModel::new(&inst);
    let budget = inst.sparsity_budget();
    let (mut z, mut m, mut state) = slr_init(model.weights(), &budget, &SlrParams::default()).unwrap();
    let mut s = Vec::new();
    for _ in 0..500 {
        let rec = slr_iterate(&mut model, &mut z, &mut m, &mut state, &budget).unwrap();
        assert!(budget.is_feasible(&z));
        if rec.converged {
            break;
        }
        s.push(rec.s);
    }
    let median = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let half = s.len() / 2;
    assert!(half > 10);
    assert!(median(&s[half..]) < median(&s[..half]), "stepsizes did not decrease");
}

#[test]
fn alpha_schedule_at_paper_settings() {
    assert_eq!(alpha_schedule(1, 300.0, 0.1).unwrap(), 1.0 - 1.0 / 300.0);
    assert!((alpha_schedule(4, 5.0, 0.5).unwrap() - 0.9).abs() < 1e-15);
    let mut prev = 0.0;
    for k in 1..=10_000 {
        let a = alpha_schedule(k, 300.0, 0.1).unwrap();
        assert!(a > prev && a < 1.0, "k={k}: {a}");
        prev = a;
    }
}

