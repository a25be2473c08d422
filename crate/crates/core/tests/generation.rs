mod common;

use common::tiny_config;
use cpnet::config::TrainConfig;
use cpnet::data::{FrameClip, Image, LandmarkSet};
use cpnet::inference::TrainedModel;
use cpnet::metrics::{evaluate_corpus, FrameGenerator, Metric, PSNR_CAP_DB};
use cpnet::train::{prepare_clips, train};
use cpnet::Error;

/// A model after a few updates, plus the clips it was trained on.
fn trained(config: &TrainConfig) -> (TrainedModel, Vec<FrameClip>) {
    let (clips, _) = prepare_clips(config).unwrap();
    let outcome = train(config, clips.clone(), None).unwrap();
    (TrainedModel::from_checkpoint(&outcome.final_checkpoint).unwrap(), clips)
}

fn mean_frame_delta(clip: &FrameClip) -> f64 {
    let f = clip.frames();
    f.windows(2).map(|w| w[0].mean_abs_diff(&w[1])).sum::<f64>() / (f.len() - 1) as f64
}

/// Thirty landmark sets taken from the clips in order, wrapping around.
fn long_track(clips: &[FrameClip]) -> Vec<LandmarkSet> {
    clips.iter().flat_map(|c| c.landmarks().iter().cloned()).cycle().take(30).collect()
}

#[test]
fn thirty_frame_track_gives_twenty_four_frames_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (model, clips) = trained(&tiny_config(dir.path()));
    let track = long_track(&clips);
    let a = model.generate_video("a", &track, None, 25.0).unwrap();
    assert_eq!(a.len(), 24);
    assert_eq!(a.landmarks(), &track[3..27]);
    let b = model.generate_video("b", &track, None, 25.0).unwrap();
    assert_eq!(a.frames(), b.frames());
    assert!(a.frames().iter().all(|f| f.data().iter().all(|v| (0.0..=1.0).contains(v))));
}

#[test]
fn frozen_track_gives_static_output() {
    let dir = tempfile::tempdir().unwrap();
    let (model, clips) = trained(&tiny_config(dir.path()));
    let moving = clips[0].landmarks().to_vec();
    let frozen = vec![moving[5].clone(); moving.len()];
    let still = model.generate_video("still", &frozen, None, 25.0).unwrap();
    let talking = model.generate_video("talking", &moving, None, 25.0).unwrap();
    assert_eq!(mean_frame_delta(&still), 0.0);
    assert!(mean_frame_delta(&talking) > 0.0);
}

#[test]
fn autoregressive_model_needs_bootstrap_frames_and_settles_on_a_frozen_track() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_config(dir.path());
    config.teacher_forcing = true;
    let (model, clips) = trained(&config);
    assert!(model.uses_prior_frames());
    let moving = clips[0].landmarks().to_vec();
    let frozen = vec![moving[5].clone(); moving.len()];
    let boot = &clips[0].frames()[..3];
    assert!(matches!(
        model.generate_video("x", &moving, None, 25.0),
        Err(Error::InvalidArgument(_))
    ));
    let still = model.generate_video("still", &frozen, Some(&vec![boot[0].clone(); 3]), 25.0).unwrap();
    let talking = model.generate_video("talking", &moving, Some(boot), 25.0).unwrap();
    assert_eq!(still.len(), moving.len() - 6);
    assert!(
        mean_frame_delta(&still) < mean_frame_delta(&talking),
        "{} vs {}",
        mean_frame_delta(&still),
        mean_frame_delta(&talking)
    );
}

#[test]
fn short_tracks_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let model = TrainedModel::new(
        cpnet::model::Cpnet::from_config(&config).unwrap(),
        cpnet::model::Cpnet::from_config(&config).unwrap().init_params(),
    );
    let track = vec![LandmarkSet::empty(); 6];
    assert!(matches!(model.generate_video("x", &track, None, 25.0), Err(Error::InvalidArgument(_))));
}

/// Returns the ground truth it is asked to reproduce.
struct Oracle;

impl FrameGenerator for Oracle {
    fn generate_clip(&self, clip: &FrameClip) -> cpnet::Result<Vec<Image>> {
        Ok(clip.frames()[3..clip.len() - 3].to_vec())
    }
}

#[test]
fn ground_truth_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let (clips, _) = prepare_clips(&tiny_config(dir.path())).unwrap();
    let report = evaluate_corpus(&Oracle, &clips, &[Metric::Ssim, Metric::Psnr]).unwrap();
    assert!((report.ssim - 1.0).abs() < 1e-9);
    assert_eq!(report.psnr, PSNR_CAP_DB);
    assert_eq!(report.clips.len(), clips.len());
}

#[test]
fn trained_model_evaluates_to_finite_scores() {
    let dir = tempfile::tempdir().unwrap();
    let (model, clips) = trained(&tiny_config(dir.path()));
    let report = evaluate_corpus(&model, &clips, &[Metric::Ssim, Metric::Psnr]).unwrap();
    assert!(report.ssim.is_finite() && report.psnr.is_finite());
    assert!(report.table().contains("mean"));
}
