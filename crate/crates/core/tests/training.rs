mod common;

use common::tiny_config;
use cpnet::checkpoint::Checkpoint;
use cpnet::config::TrainConfig;
use cpnet::data::Image;
use cpnet::nn::Tensor;
use cpnet::train::{prepare_clips, read_log, train, Trainer};
use cpnet::Error;

#[test]
fn ten_iterations_write_one_checkpoint_and_a_full_log() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let (clips, _) = prepare_clips(&config).unwrap();
    let outcome = train(&config, clips, None).unwrap();
    assert_eq!(outcome.checkpoints.len(), 1);
    assert_eq!(outcome.checkpoints[0], dir.path().join("ckpt_0000010.safetensors"));
    assert!(outcome.checkpoints[0].exists());
    assert!(dir.path().join("config.toml").exists());
    let rows = read_log(&outcome.log_path).unwrap();
    assert_eq!(rows.iter().map(|r| r.iteration).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
    assert!(rows.iter().all(|r| r.total.is_finite() && r.l_p.is_some() && r.l_t.is_some()));
    assert_eq!(rows, outcome.rows);
    assert_eq!(TrainConfig::load(&dir.path().join("config.toml")).unwrap(), config);
}

#[test]
fn resume_reproduces_the_uninterrupted_run() {
    let full_dir = tempfile::tempdir().unwrap();
    let mut config = tiny_config(full_dir.path());
    config.checkpoint_interval = 5;
    let (clips, _) = prepare_clips(&config).unwrap();
    let full = train(&config, clips.clone(), None).unwrap();
    assert_eq!(full.checkpoints.len(), 2);

    let resumed_dir = tempfile::tempdir().unwrap();
    let mut resumed_config = config.clone();
    resumed_config.output_dir = resumed_dir.path().to_path_buf();
    let resumed = train(&resumed_config, clips, Some(&full.checkpoints[0])).unwrap();
    assert_eq!(resumed.rows.first().unwrap().iteration, 6);
    assert_eq!(resumed.rows, full.rows[5..]);
    assert_eq!(resumed.final_checkpoint.params, full.final_checkpoint.params);
    assert_eq!(resumed.final_checkpoint.adam, full.final_checkpoint.adam);
}

#[test]
fn resuming_in_place_keeps_the_earlier_log() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_config(dir.path());
    config.iterations = 6;
    config.checkpoint_interval = 3;
    let (clips, _) = prepare_clips(&config).unwrap();
    let first = train(&config, clips.clone(), None).unwrap();
    let again = train(&config, clips, Some(&first.checkpoints[0])).unwrap();
    assert_eq!(read_log(&again.log_path).unwrap(), first.rows);
}

#[test]
fn same_seed_gives_identical_loss_logs() {
    let run = |seed| {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(dir.path());
        config.iterations = 100;
        config.seed = seed;
        let (clips, _) = prepare_clips(&config).unwrap();
        train(&config, clips, None).unwrap().rows
    };
    let a = run(3);
    assert_eq!(a.len(), 100);
    assert_eq!(a, run(3));
    assert_ne!(a, run(4));
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_config(dir.path());
    config.iterations = 3;
    let (clips, _) = prepare_clips(&config).unwrap();
    let outcome = train(&config, clips, None).unwrap();
    let path = &outcome.checkpoints[0];
    let original = std::fs::read(path).unwrap();
    let copy = dir.path().join("copy.safetensors");
    Checkpoint::load(path).unwrap().save(&copy).unwrap();
    assert_eq!(std::fs::read(&copy).unwrap(), original);
    assert_eq!(Checkpoint::load(&copy).unwrap().to_bytes(), original);
}

#[test]
fn generator_update_ignores_the_predictor_when_its_term_is_off() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_config(dir.path());
    config.loss.weights.lambda_p = 0.0;
    let (clips, _) = prepare_clips(&config).unwrap();
    let mut a = Trainer::new(&config, clips.clone()).unwrap();
    let mut b = Trainer::new(&config, clips).unwrap();
    for (k, v) in a.params.clone().iter().filter(|(k, _)| k.starts_with("predictor/")) {
        *b.params.get_mut(k).unwrap() = v.map(|x| x * -3.0 + 0.5);
    }
    let predictor_before = b.params.clone();
    for it in 1..=3 {
        let (ba, bb) = (a.batch(it).unwrap(), b.batch(it).unwrap());
        let (ra, rb) = (a.train_step(&ba).unwrap(), b.train_step(&bb).unwrap());
        assert_eq!(ra, rb);
        assert!(ra.l_p.is_none() && ra.l_dmp.is_none());
    }
    for ns in ["generator", "condenser"] {
        let pa: Vec<_> = a.params.namespace(ns).collect();
        let pb: Vec<_> = b.params.namespace(ns).collect();
        assert_eq!(pa, pb, "{ns}");
    }
    let untouched = |s: &cpnet::nn::ParamStore<f32>| s.namespace("predictor").map(|(_, t)| t.clone()).collect::<Vec<_>>();
    assert_eq!(untouched(&b.params), untouched(&predictor_before));
}

#[test]
fn frozen_backbones_stay_bit_identical() {
    let fixtures = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let dir = tempfile::tempdir().unwrap();
    let config = TrainConfig::from_toml(&format!(
        "{}\n[condenser]\nprovider = \"clip_vit\"\nweights = {:?}\n\n[perceptual]\nbackend = \"vgg\"\nweights = {:?}\n",
        tiny_config(dir.path()).to_toml().split("[condenser]").next().unwrap(),
        fixtures.join("tiny_clip"),
        fixtures.join("tiny_vgg/model.safetensors"),
    ))
    .unwrap();
    let (clips, _) = prepare_clips(&config).unwrap();
    let mut trainer = Trainer::new(&config, clips).unwrap();
    let probe = Image::new(3, 32, 32, (0..3072).map(|i| (i % 17) as f32 / 16.0).collect()).unwrap();
    let embed = |t: &Trainer| t.model.provider.embed(&probe).unwrap();
    let feats = |t: &Trainer| {
        let g = cpnet::nn::Graph::<f32>::new();
        let x = g.constant(probe.to_tensor::<f32>().reshape(&[1, 3, 32, 32]).unwrap());
        t.model.extractor.features(x).unwrap().iter().map(|f| (*f.value()).clone()).collect::<Vec<Tensor<f32>>>()
    };
    let (e0, f0) = (embed(&trainer), feats(&trainer));
    for it in 1..=3 {
        let batch = trainer.batch(it).unwrap();
        trainer.train_step(&batch).unwrap();
    }
    assert_eq!(embed(&trainer), e0);
    assert_eq!(feats(&trainer), f0);
    assert!(trainer.params.iter().all(|(k, _)| cpnet::checkpoint::NAMESPACES.contains(&k.split('/').next().unwrap())));
}

#[test]
fn non_finite_losses_name_the_term() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let (clips, _) = prepare_clips(&config).unwrap();
    let mut trainer = Trainer::new(&config, clips).unwrap();
    let w = trainer.params.get_mut("disc_frame/out/bias").unwrap();
    *w = w.map(|_| f32::NAN);
    let batch = trainer.batch(1).unwrap();
    match trainer.train_step(&batch) {
        Err(Error::NonFinite { term, iteration }) => assert_eq!((term, iteration), ("d_adv", 1)),
        other => panic!("expected a non-finite error, got {other:?}"),
    }
}

#[test]
fn bad_configs_are_config_errors() {
    for text in [
        "learning_rate = -1.0",
        "iterations = 0",
        "no_such_field = 1",
        "[loss]\nno_such_weight = 1.0",
        "[loss]\nlambda_r = -5.0",
        "[generator]\nbase_width = 2",
    ] {
        match TrainConfig::from_toml(text) {
            Err(Error::Config(_)) => {}
            other => panic!("{text:?} gave {other:?}"),
        }
    }
    let c = TrainConfig::from_toml("[loss]\nlambda_p = 0.5").unwrap();
    assert_eq!(c.loss.weights.lambda_p, 0.5);
    assert_eq!(c.loss.weights.lambda_r, 5.0);
}

#[test]
fn short_clips_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_config(dir.path());
    config.data.toy.frames = 8;
    let (clips, _) = prepare_clips(&config).unwrap();
    assert!(matches!(Trainer::new(&config, clips), Err(Error::InvalidArgument(_))));
}
