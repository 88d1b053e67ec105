use featmem_bench::config::{DatasetSource, ExperimentConfig, ModelMode};
use featmem_bench::experiment::{evaluate_corruption, load_items, sweep_models};
use featmem_bench::report::{read_json_report, Report};
use featmem_bench::run_retrieval_experiment;
use featmem_core::corrupt::CorruptionKind;
use featmem_core::features::{FeatureMap, SemanticMemory};
use featmem_core::memory::{AssociativeMemory, Separation, Similarity};
use featmem_core::nn::{Activation, Mlp};

fn synthetic(count: usize) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSource::Synthetic { count, seed: 5 },
        ..ExperimentConfig::default()
    }
}

#[test]
fn clean_queries_with_exact_similarity_never_miss() {
    let config = ExperimentConfig {
        similarities: vec![Similarity::NegL2, Similarity::NegL1, Similarity::Cosine],
        separation: Separation::Max,
        corruptions: vec!["none".parse().unwrap()],
        ..synthetic(60)
    };
    let report = run_retrieval_experiment(&config).unwrap();
    assert_eq!(report.cells.len(), 3);
    for cell in &report.cells {
        assert_eq!((cell.queries, cell.errors), (60, 0), "{cell:?}");
    }
    assert_eq!(report.metadata.count, 60);
    assert_eq!(report.metadata.dim, 784);
}

#[test]
fn constant_feature_map_is_chance_level() {
    let items = load_items(&DatasetSource::Synthetic { count: 40, seed: 1 }, None).unwrap();
    // Zero weights with a unit bias send every image to the same embedding.
    let mut params = vec![0.0; 784 * 3];
    params.extend([1.0, 1.0, 1.0]);
    let model = Mlp::from_params(&[784, 3], &[Activation::Linear], params).unwrap();
    let memory = SemanticMemory::new(items.clone(), FeatureMap::MlpEncoder(model)).unwrap();
    let cells = evaluate_corruption(
        &memory,
        &items,
        &CorruptionKind::gaussian(0.0, 0.0),
        &[Similarity::Cosine],
        &Separation::Max,
        0,
        true,
    )
    .unwrap();
    // Ties go to index 0, so every query but the first misses.
    assert_eq!(cells[0].errors, 39);
    assert!((cells[0].error_rate - (1.0 - 1.0 / 40.0)).abs() < 1e-12);
}

#[test]
fn zero_mean_sweep_point_matches_the_plain_cell() {
    let items = load_items(&DatasetSource::Synthetic { count: 50, seed: 2 }, None).unwrap();
    let kinds = [Similarity::Dot, Similarity::NegL2];
    let sep = Separation::softmax(50.0).unwrap();
    let plain = evaluate_corruption(
        &items,
        &items,
        &CorruptionKind::gaussian(0.0, 0.3),
        &kinds,
        &sep,
        9,
        true,
    )
    .unwrap();
    let models: [(&str, &dyn AssociativeMemory); 1] = [("uhn", &items)];
    let points = sweep_models(&models, &items, &kinds, &sep, &[0.0, 0.2], 0.3, 9, true).unwrap();
    assert_eq!(points.len(), 4);
    for (cell, point) in plain.iter().zip(points.iter().filter(|p| p.mean == 0.0)) {
        assert_eq!(cell.similarity, point.similarity);
        assert_eq!(cell.error_rate, point.error_rate);
    }
}

#[test]
fn reports_are_reproducible_and_thread_independent() {
    let base = ExperimentConfig {
        similarities: vec![Similarity::Cosine, Similarity::Dot],
        corruptions: vec![
            CorruptionKind::mask(),
            CorruptionKind::salt_pepper(),
            CorruptionKind::rotation(),
        ],
        seed: 17,
        ..synthetic(80)
    };
    let a = run_retrieval_experiment(&base).unwrap();
    let b = run_retrieval_experiment(&base).unwrap();
    let serial = run_retrieval_experiment(&ExperimentConfig {
        parallel: false,
        ..base.clone()
    })
    .unwrap();
    assert_eq!(a.without_timings(), b.without_timings());
    assert_eq!(a.without_timings(), serial.without_timings());

    let other_seed = run_retrieval_experiment(&ExperimentConfig { seed: 18, ..base }).unwrap();
    assert_ne!(a.without_timings().cells, other_seed.without_timings().cells);
}

#[test]
fn semantic_identity_mode_matches_pixel_mode() {
    let base = ExperimentConfig {
        similarities: vec![Similarity::Cosine, Similarity::NegL2],
        corruptions: vec![CorruptionKind::gaussian(0.1, 0.2), CorruptionKind::crop()],
        ..synthetic(40)
    };
    let pixel = run_retrieval_experiment(&base).unwrap();
    for mode in [ModelMode::Semantic, ModelMode::FullySemantic] {
        let other = run_retrieval_experiment(&ExperimentConfig { mode, ..base.clone() }).unwrap();
        let errors =
            |r: &featmem_bench::ExperimentReport| r.cells.iter().map(|c| c.errors).collect::<Vec<_>>();
        assert_eq!(errors(&pixel), errors(&other), "{mode}");
    }
}

#[test]
fn json_report_round_trips_through_a_file() {
    let report = run_retrieval_experiment(&synthetic(20)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    std::fs::write(&path, report.to_json().unwrap()).unwrap();
    assert_eq!(read_json_report(&path).unwrap(), report);
}

#[test]
fn empty_similarity_grid_is_rejected() {
    let config = ExperimentConfig {
        similarities: vec![],
        ..synthetic(5)
    };
    assert!(matches!(
        run_retrieval_experiment(&config),
        Err(featmem_bench::BenchError::EmptyGrid(_))
    ));
}
