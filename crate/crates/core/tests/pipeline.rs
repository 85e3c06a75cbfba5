use intrasplit::baselines::continue_cae;
use intrasplit::datasets::{minmax_scale, synthetic, ImageSet};
use intrasplit::matrix::squared_distance;
use intrasplit::nn::checkpoint;
use intrasplit::pipeline::{self, extract_features, stage1_train, Stage, TrainConfig};
use intrasplit::{Error, Matrix};

fn normal_class(class: u8, n: usize) -> ImageSet {
    let set = minmax_scale(&synthetic::digits(n, 21).unwrap());
    set.subset(&set.indices_of(class))
}

fn config(seed: u64) -> TrainConfig {
    TrainConfig {
        stage1_epochs: 3,
        stage3_epochs: 4,
        batch_size: 16,
        channels: [4, 8, 8],
        latent_dim: 8,
        seed,
        ..TrainConfig::default()
    }
}

fn mean_pair_distance(z: &Matrix) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..z.rows() {
        for j in 0..i {
            total += squared_distance(z.row(i), z.row(j)).sqrt();
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn same_seed_same_network() {
    let train = normal_class(6, 60);
    let a = pipeline::run(&train, &config(4)).unwrap();
    let b = pipeline::run(&train, &config(4)).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.assignment, b.assignment);
    let c = pipeline::run(&train, &config(5)).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn thread_count_does_not_change_results() {
    let train = normal_class(2, 60);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| pipeline::run(&train, &config(1)).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.params, four.params);
    assert_eq!(one.assignment.scores, four.assignment.scores);
}

#[test]
fn history_covers_both_stages() {
    let train = normal_class(0, 60);
    let cfg = config(0);
    let out = pipeline::run(&train, &cfg).unwrap();
    assert_eq!(out.history.len(), cfg.stage1_epochs + cfg.stage3_epochs);
    let (s1, s3) = out.history.split_at(cfg.stage1_epochs);
    assert!(s1.iter().all(|h| h.stage == Stage::Reconstruction && h.cls == 0.0));
    assert!(s3.iter().all(|h| h.stage == Stage::Joint && h.cls > 0.0 && h.disp1 < 0.0 && h.disp2 < 0.0));
    assert!(s1.last().unwrap().rec < s1[0].rec);
    assert_eq!(out.assignment.atypical().len(), (0.1 * train.len() as f64).round() as usize);
}

#[test]
fn closeness_pulls_normal_latents_together() {
    let train = normal_class(8, 80);
    let cfg = TrainConfig {
        stage3_epochs: 6,
        ..config(3)
    };
    let stage1 = stage1_train(&train, &cfg).unwrap();
    let ours = pipeline::continue_from_stage1(stage1.clone(), &train).unwrap();
    let cae = continue_cae(stage1, &train).unwrap();
    let spread_ours = mean_pair_distance(&extract_features(&ours.params, &train).unwrap());
    let spread_cae = mean_pair_distance(&extract_features(cae.params(), &train).unwrap());
    assert!(spread_ours < spread_cae, "ours {spread_ours} vs cae {spread_cae}");
}

#[test]
fn checkpoint_preserves_features() {
    let train = normal_class(5, 40);
    let out = pipeline::run(&train, &config(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ckpt");
    checkpoint::save(&out.params, &path).unwrap();
    let restored = checkpoint::load(&path).unwrap();
    assert_eq!(restored, out.params);
    assert_eq!(
        extract_features(&restored, &train).unwrap(),
        extract_features(&out.params, &train).unwrap()
    );
}

#[test]
fn invalid_configurations_are_rejected() {
    let train = normal_class(1, 40);
    for cfg in [
        TrainConfig { batch_size: 1, ..config(0) },
        TrainConfig { rho: 150.0, ..config(0) },
        TrainConfig { stage1_epochs: 0, ..config(0) },
        TrainConfig { l2: -1.0, ..config(0) },
    ] {
        assert!(matches!(stage1_train(&train, &cfg), Err(Error::Config(_))), "{cfg:?}");
    }
}
