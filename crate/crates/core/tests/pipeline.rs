use ojrs_core::allocator;
use ojrs_core::bench;
use ojrs_core::config::ExperimentConfig;
use ojrs_core::drl::{self, one_hot, policy_loss_with_grad};
use ojrs_core::model::{channel_at, OffloadDecision};
use ojrs_core::neural::{Activation, AdamState, Network};
use ojrs_core::rng::{self, Stream};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.scenario.n_ues = 6;
    cfg.scenario.n_mecs = 2;
    cfg.sae.dims = vec![10, 8];
    cfg.sae.t_sae = 50;
    cfg.sae.pretrain_samples = 100;
    cfg.drl.dims = vec![20];
    cfg.drl.t_drl = 120;
    cfg.bench.eval_channels = 10;
    cfg.bench.replications = vec![4];
    cfg.bench.pso.iterations = 20;
    cfg.bench.pso.particles = 10;
    cfg
}

#[test]
fn training_is_reproducible() {
    let cfg = small();
    let (_, a) = bench::train(&cfg).unwrap();
    let (_, b) = bench::train(&cfg).unwrap();
    assert_eq!(a.len(), 120);
    assert_eq!(a, b);
    assert!(a.iter().all(|l| l.decision_ms == 0.0 && l.asa_ms == 0.0));
}

#[test]
fn zero_epochs_is_empty() {
    let mut cfg = small();
    cfg.drl.t_drl = 0;
    let (_, logs) = bench::train(&cfg).unwrap();
    assert!(logs.is_empty());
}

#[test]
fn loss_column_and_decrease() {
    let cfg = small();
    let (_, logs) = bench::train(&cfg).unwrap();
    let phi = cfg.drl.phi;
    let mut prev: Option<f64> = None;
    for l in &logs {
        if l.epoch % phi != 0 {
            assert_eq!(l.delta_loss, 0.0);
            assert_eq!(l.loss, prev);
            continue;
        }
        let loss = l.loss.expect("loss after a training event");
        match prev {
            None => assert_eq!(l.delta_loss, 0.0),
            Some(p) => assert!((l.delta_loss - (p - loss)).abs() < 1e-12),
        }
        prev = Some(loss);
    }
    assert!(logs[..phi as usize - 1].iter().all(|l| l.loss.is_none()));
}

#[test]
fn rewards_match_allocator() {
    let cfg = small();
    let (agent, logs) = bench::train(&cfg).unwrap();
    let sc = agent.scenario();
    let last = logs.last().unwrap();
    let ch = channel_at(sc, last.epoch, cfg.seed);
    let d = agent.decide(&ch).unwrap();
    let a = allocator::evaluate(&d, sc, &ch).unwrap();
    assert!((a.reward * a.latency - 1.0).abs() < 1e-12);
    assert!(logs
        .iter()
        .all(|l| (l.reward * l.latency - 1.0).abs() < 1e-12));
}

#[test]
fn policy_memorises_one_transition() {
    let specs = Network::chain(&[4, 16, 9], Activation::Relu, Activation::Sigmoid);
    let mut net = Network::new(&specs, 0, &mut rng::stream(0, Stream::PolicyInit)).unwrap();
    let target = one_hot(&OffloadDecision::new(vec![2, 0, 1], 2).unwrap(), 2);
    let batch = vec![(vec![0.3, 0.9, 0.1, 0.5], target)];
    let mut adam = AdamState::new(&net, 1e-2);
    for _ in 0..2000 {
        let (_, g) = policy_loss_with_grad(&net, &batch, 0.0).unwrap();
        adam.step(&mut net, &g);
    }
    let loss = drl::policy_loss(&net, &batch, 0.0).unwrap();
    assert!(loss < 0.01, "loss {loss}");
}

#[test]
fn benchmark_reproducible_without_timing() {
    let mut cfg = small();
    cfg.bench.timing = false;
    let a = bench::run_benchmark(&cfg, None).unwrap();
    let b = bench::run_benchmark(&cfg, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 4);
    for r in &a.rows {
        assert_eq!(r.decision_s, 0.0);
        assert!(r.nrr > 0.0 && r.nrr <= 1.0001);
    }
}

#[test]
fn config_round_trip() {
    let mut cfg = small();
    let sc = cfg.scenario.build(cfg.seed).unwrap();
    cfg.scenario = cfg.scenario.pinned(&sc);
    let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
    let rebuilt = back.scenario.build(99).unwrap();
    assert_eq!(rebuilt.ues, sc.ues);
    assert_eq!(rebuilt.mecs, sc.mecs);
}

#[test]
fn desk_config_parses() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let cfg = ExperimentConfig::load(&path).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.scenario.n_ues, 10);
}
