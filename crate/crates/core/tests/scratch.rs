//! Temporary debugging helper; removed before release.

use polycount_core::clustering::ClusterAlgorithm;
use polycount_core::evaluation::{loocv, Grids, PairImpurity, VideoData};
use polycount_core::loss::{LossConfig, LossMode};
use polycount_core::synth::{self, ScenarioConfig};
use polycount_core::tracklets::{build_tracklets, FragmentConfig};
use polycount_core::trainer::{
    build_training_data, embed_videos, train, OptimizerKind, TrainerConfig,
};
use polycount_core::{ClusteringConfig, EmbeddingHead};

fn drift_grids() -> Grids {
    Grids {
        thresholds: vec![0.3, 0.5, 0.7, 0.8, 0.9, 0.95],
        preferences: vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0],
        gammas: vec![0.5, 1.0, 2.0, 4.0, 8.0],
        alphas: vec![0.4, 0.6, 0.8, 1.0],
    }
}

fn run_mode(
    scenario: &polycount_core::Scenario,
    mode: LossMode,
    algorithm: ClusterAlgorithm,
    train_seed: u64,
) -> f64 {
    let fragment_cfg = FragmentConfig::default();
    let tracklets = build_tracklets(&scenario.detections, &fragment_cfg).unwrap();
    let data = build_training_data(&tracklets, &fragment_cfg, &scenario.video_lengths()).unwrap();
    let loss_cfg = LossConfig {
        tau: 0.1,
        lambda: 1.0,
        mode,
    };
    let trainer_cfg = TrainerConfig {
        batch_size: 16,
        views_per_polyp: 4,
        polyps_per_batch: 3,
        epochs: 40,
        learning_rate: 0.01,
        seed: train_seed,
        optimizer: OptimizerKind::Adam,
        output_dim: 8,
        hidden_dim: None,
    };
    let head: EmbeddingHead = train(&data, &loss_cfg, &trainer_cfg).unwrap().head;
    let embedded = embed_videos(&head, &tracklets, &fragment_cfg, &scenario.video_lengths()).unwrap();
    let videos: Vec<VideoData> = embedded
        .into_iter()
        .map(|(video_id, (descriptors, _))| {
            let truth = scenario.truth[&video_id].clone();
            VideoData {
                video_id,
                descriptors,
                truth,
            }
        })
        .collect();
    let report = loocv(
        &videos,
        algorithm,
        &drift_grids(),
        &ClusteringConfig::default(),
        0.05,
        &PairImpurity,
    )
    .unwrap();
    report.aggregate.fr_mean
}

#[test]
#[ignore]
fn drift_knob_sweep() {
    let seeds = [11u64, 22, 33, 44, 55, 66, 77];
    for (beta, sigma, min_dist, entities) in [
        (4.0, 0.15, 1.0, (3usize, 4usize)),
        (6.0, 0.30, 0.8, (3, 4)),
        (5.0, 0.25, 0.9, (3, 4)),
        (5.0, 0.20, 1.0, (3, 4)),
    ] {
        let mut sums = [0.0f64; 4];
        for &seed in &seeds {
            let cfg = ScenarioConfig {
                seed,
                temporal_drift: beta,
                intra_entity_noise: sigma,
                inter_entity_min_distance: min_dist,
                entities_per_video: entities,
                tracklets_per_entity: (3, 5),
                ..synth::preset("drift").unwrap()
            };
            let scenario = synth::generate(&cfg, &FragmentConfig::default()).unwrap();
            sums[0] += run_mode(&scenario, LossMode::TemporallyAware, ClusterAlgorithm::TemporalAp, seed);
            sums[1] += run_mode(&scenario, LossMode::Supervised, ClusterAlgorithm::TemporalAp, seed);
            sums[2] += run_mode(&scenario, LossMode::SelfSupervised, ClusterAlgorithm::TemporalAp, seed);
            sums[3] += run_mode(&scenario, LossMode::TemporallyAware, ClusterAlgorithm::Ap, seed);
        }
        let n = seeds.len() as f64;
        println!(
            "beta={beta} sigma={sigma} dist={min_dist} ent={entities:?} | ta={:.3} sup={:.3} self={:.3} ap={:.3} | ok: loss={} {} clust={}",
            sums[0] / n,
            sums[1] / n,
            sums[2] / n,
            sums[3] / n,
            sums[0] <= sums[1],
            sums[1] <= sums[2],
            sums[0] <= sums[3],
        );
    }
}
