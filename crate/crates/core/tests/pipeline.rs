//! End-to-end pipeline: synthetic scenario -> tracklets -> training ->
//! embedding -> clustering -> leave-one-out evaluation.

use polycount_core::clustering::ClusterAlgorithm;
use polycount_core::evaluation::{loocv, Grids, PairImpurity, VideoData};
use polycount_core::loss::{LossConfig, LossMode};
use polycount_core::synth::{self, ScenarioConfig};
use polycount_core::tracklets::{build_tracklets, FragmentConfig};
use polycount_core::trainer::{build_training_data, embed_videos, train, OptimizerKind, TrainerConfig};
use polycount_core::{ClusteringConfig, Scenario};

fn desk_trainer(seed: u64, mode: LossMode) -> (LossConfig, TrainerConfig) {
    (
        LossConfig {
            tau: 0.1,
            lambda: 1.0,
            mode,
        },
        TrainerConfig {
            batch_size: 16,
            views_per_polyp: 4,
            polyps_per_batch: 3,
            epochs: 30,
            learning_rate: 0.01,
            seed,
            optimizer: OptimizerKind::Adam,
            output_dim: 8,
            hidden_dim: None,
        },
    )
}

fn small_grids() -> Grids {
    Grids::desk()
}

fn videos_from(
    scenario: &Scenario,
    head: &polycount_core::EmbeddingHead,
    fragment_cfg: &FragmentConfig,
) -> Vec<VideoData> {
    let tracklets = build_tracklets(&scenario.detections, fragment_cfg).unwrap();
    let embedded = embed_videos(head, &tracklets, fragment_cfg, &scenario.video_lengths()).unwrap();
    embedded
        .into_iter()
        .map(|(video_id, (descriptors, skipped))| {
            assert!(skipped.is_empty(), "planted tracklets should all embed");
            let truth = scenario.truth[&video_id].clone();
            VideoData {
                video_id,
                descriptors,
                truth,
            }
        })
        .collect()
}

#[test]
fn easy_scenario_recovers_planted_entities() {
    let fragment_cfg = FragmentConfig::default();
    let scenario_cfg = synth::preset("easy").unwrap();
    let scenario = synth::generate(&scenario_cfg, &fragment_cfg).unwrap();

    let tracklets = build_tracklets(&scenario.detections, &fragment_cfg).unwrap();
    let data = build_training_data(&tracklets, &fragment_cfg, &scenario.video_lengths()).unwrap();
    let (loss_cfg, trainer_cfg) = desk_trainer(3, LossMode::TemporallyAware);
    let outcome = train(&data, &loss_cfg, &trainer_cfg).unwrap();

    let videos = videos_from(&scenario, &outcome.head, &fragment_cfg);
    assert_eq!(videos.len(), 6);

    let report = loocv(
        &videos,
        ClusterAlgorithm::TemporalAp,
        &small_grids(),
        &ClusteringConfig::default(),
        0.05,
        &PairImpurity,
    )
    .unwrap();
    assert_eq!(report.folds.len(), 6);
    for fold in &report.folds {
        assert_eq!(
            fold.metrics.fr, 1.0,
            "fold {} fr {:?}",
            fold.held_out, fold.metrics
        );
        assert_eq!(fold.metrics.fpr, 0.0, "fold {}", fold.held_out);
    }
}

#[test]
fn noisy_scenario_stays_reasonable_with_threshold_clustering() {
    let fragment_cfg = FragmentConfig::default();
    let scenario_cfg = ScenarioConfig {
        n_videos: 4,
        ..synth::preset("noisy").unwrap()
    };
    let scenario = synth::generate(&scenario_cfg, &fragment_cfg).unwrap();
    let tracklets = build_tracklets(&scenario.detections, &fragment_cfg).unwrap();
    let data = build_training_data(&tracklets, &fragment_cfg, &scenario.video_lengths()).unwrap();
    let (loss_cfg, trainer_cfg) = desk_trainer(5, LossMode::Supervised);
    let outcome = train(&data, &loss_cfg, &trainer_cfg).unwrap();

    let videos = videos_from(&scenario, &outcome.head, &fragment_cfg);
    let report = loocv(
        &videos,
        ClusterAlgorithm::Threshold,
        &small_grids(),
        &ClusteringConfig::default(),
        0.05,
        &PairImpurity,
    )
    .unwrap();
    // noisy data: not necessarily perfect, but bounded and finite
    assert!(report.aggregate.fr_mean >= 1.0 / 4.0);
    assert!(report.aggregate.fr_mean.is_finite());
    assert!((0.0..=1.0).contains(&report.aggregate.fpr_mean));
}

#[test]
fn self_supervised_mode_trains_end_to_end() {
    let fragment_cfg = FragmentConfig::default();
    let scenario_cfg = ScenarioConfig {
        n_videos: 2,
        ..synth::preset("drift").unwrap()
    };
    let scenario = synth::generate(&scenario_cfg, &fragment_cfg).unwrap();
    let tracklets = build_tracklets(&scenario.detections, &fragment_cfg).unwrap();
    let data = build_training_data(&tracklets, &fragment_cfg, &scenario.video_lengths()).unwrap();
    let (loss_cfg, trainer_cfg) = desk_trainer(7, LossMode::SelfSupervised);
    let outcome = train(&data, &loss_cfg, &trainer_cfg).unwrap();
    assert!(outcome.epoch_mean_loss.iter().all(|l| l.is_finite()));
}
