use oodbench_core::harness::generate_synthetic;
use oodbench_core::refmodel::{checkpoint_to_string, parse_checkpoint, ModelConfig};
use oodbench_core::runtime::{
    deterministic_infer, mcd_infer, prepare_graphs, train, train_graphs, TrainConfig,
};
use oodbench_core::splitting::{random_split, SplitTask};
use oodbench_core::LabeledDataset;

fn small_model(seed: u64) -> ModelConfig {
    ModelConfig {
        embed_dim: 16,
        n_layers: 2,
        n_rbf: 12,
        seed,
        ..ModelConfig::default()
    }
}

#[test]
fn training_reduces_loss_on_synthetic_data() {
    let data = generate_synthetic(200, 1).unwrap();
    let task = random_split(200, &[40], 2).unwrap().tasks.remove(0);
    let tcfg = TrainConfig {
        epochs: 50,
        patience: 100,
        seed: 3,
        ..TrainConfig::default()
    };
    let out = train(&data, &task, &small_model(4), &tcfg).unwrap();
    assert_eq!(out.history.len(), 51);
    let first = out.history[0].train_loss;
    let last = out.history.last().unwrap().train_loss;
    assert!(last < first, "train loss {first} -> {last}");
    let best = out.best().val_d_mae;
    assert!(out.history.iter().all(|h| h.val_d_mae >= best));
    assert_eq!(
        out.history.iter().position(|h| h.val_d_mae == best),
        Some(out.best_epoch)
    );
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let data = generate_synthetic(60, 5).unwrap();
    let task = random_split(60, &[12], 6).unwrap().tasks.remove(0);
    let mcfg = small_model(7);
    let tcfg = TrainConfig {
        epochs: 6,
        batch_size: 8,
        seed: 8,
        ..TrainConfig::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train(&data, &task, &mcfg, &tcfg).unwrap())
    };
    let a = run(1);
    let b = run(1);
    let c = run(3);
    assert_eq!(a.history, b.history);
    assert_eq!(a.weights, b.weights);
    assert_eq!(a.history, c.history);
    assert_eq!(a.weights, c.weights);
    let text = checkpoint_to_string(&mcfg, &a.weights);
    let (cfg_back, w_back) = parse_checkpoint(&text, "mem").unwrap();
    assert_eq!(cfg_back, mcfg);
    assert_eq!(w_back, a.weights);
}

#[test]
fn stopping_waits_for_patience() {
    let data = generate_synthetic(40, 9).unwrap();
    let task = random_split(40, &[8], 1).unwrap().tasks.remove(0);
    let tcfg = TrainConfig {
        epochs: 200,
        patience: 3,
        seed: 2,
        ..TrainConfig::default()
    };
    let out = train(&data, &task, &small_model(1), &tcfg).unwrap();
    let last = out.history.last().unwrap().epoch;
    assert!(last < 200);
    assert_eq!(last - out.best_epoch, 3);
}

#[test]
fn empty_train_set_is_rejected() {
    let data = generate_synthetic(20, 1).unwrap();
    let graphs = prepare_graphs(&data, &small_model(0)).unwrap();
    let task = SplitTask {
        name: "empty".into(),
        train: vec![],
        val: vec![1, 2],
        test: vec![0],
    };
    let err = train(&data, &task, &small_model(0), &TrainConfig::default()).unwrap_err();
    assert!(matches!(err.kind(), "argument" | "validation"), "{err}");
    assert!(train_graphs(&graphs, data.targets(), &task, &small_model(0), &TrainConfig::default()).is_err());
}

#[test]
fn non_finite_loss_names_the_epoch() {
    let base = generate_synthetic(30, 2).unwrap();
    let mut targets = base.targets().to_vec();
    targets[0] = 1e200;
    let data = LabeledDataset::new(base.structures().to_vec(), targets, "huge").unwrap();
    let mut task = random_split(30, &[6], 1).unwrap().tasks.remove(0);
    if !task.train.contains(&0) {
        task.test.retain(|&i| i != 0);
        task.val.retain(|&i| i != 0);
        task.train.push(0);
        task.train.sort_unstable();
    }
    let err = train(&data, &task, &small_model(3), &TrainConfig::default()).unwrap_err();
    assert_eq!(err.kind(), "training");
    assert!(err.to_string().contains("epoch 0"), "{err}");
}

#[test]
fn inference_contracts() {
    let data = generate_synthetic(30, 3).unwrap();
    let idx: Vec<usize> = (0..30).step_by(3).collect();
    let mcfg = small_model(5);
    let w = oodbench_core::refmodel::init_weights(&mcfg).unwrap();

    let passes = mcd_infer(&data, &idx, &w, &mcfg, 8, 11).unwrap();
    assert_eq!((passes.passes(), passes.samples()), (8, idx.len()));
    assert_eq!(passes, mcd_infer(&data, &idx, &w, &mcfg, 8, 11).unwrap());
    assert_ne!(passes.row(0), passes.row(1));

    let off = ModelConfig {
        dropout_rate: 0.0,
        ..mcfg
    };
    let flat = mcd_infer(&data, &idx, &w, &off, 5, 11).unwrap();
    let det = deterministic_infer(&data, &idx, &w, &off).unwrap();
    for t in 0..5 {
        assert_eq!(flat.row(t), &det[..]);
    }
    assert_eq!(deterministic_infer(&data, &idx, &w, &mcfg).unwrap(), det);
    assert!(mcd_infer(&data, &[30], &w, &mcfg, 2, 0).is_err());
    assert!(mcd_infer(&data, &idx, &w, &mcfg, 0, 0).is_err());
}
