//! Retrieval experiments: corrupt every stored item with a per-item seed,
//! retrieve, and count exact-index mismatches.
//!
//! Query `i` is corrupted with seed `derive_seed(seed, i)` whatever the thread
//! count, and results are gathered in index order, so reports are identical
//! between serial and parallel runs apart from timings.

use std::time::Instant;

use featmem_core::corrupt::{corrupt, derive_seed, CorruptionKind};
use featmem_core::datasets::{load_mnist, synthetic_digits};
use featmem_core::features::{build_embedding_store, ExternalTable, FeatureMap, SemanticMemory};
use featmem_core::format::{load_dataset, load_embeddings, load_model};
use featmem_core::fully_semantic::{FullySemanticMemory, GenerativeMap};
use featmem_core::memory::{AssociativeMemory, MemoryStore, Separation, Similarity};
use featmem_core::vector::DataVector;
use rayon::prelude::*;

use crate::config::{DatasetSource, ExperimentConfig, FeatureSource, ModelMode};
use crate::error::{BenchError, Result};
use crate::report::{
    Cell, ExperimentReport, Metadata, SweepPoint, SweepReport, TimingReport, TimingRow, ENGINE_VERSION,
};

/// Loads the stored items, keeping the first `subset` when given.
pub fn load_items(source: &DatasetSource, subset: Option<usize>) -> Result<MemoryStore> {
    let store = match source {
        DatasetSource::File(p) => load_dataset(p)?,
        DatasetSource::Synthetic { count, seed } => synthetic_digits(*count, *seed)?.images,
        DatasetSource::Mnist { dir, split } => load_mnist(dir, split)?.images,
    };
    match subset {
        Some(n) if n > store.len() => Err(BenchError::SubsetTooLarge {
            subset: n,
            available: store.len(),
        }),
        Some(n) => Ok(store.truncated(n)?),
        None => Ok(store),
    }
}

/// A memory of any of the three model families.
#[derive(Debug, Clone)]
pub enum BuiltMemory {
    Pixel(MemoryStore),
    Semantic(SemanticMemory),
    FullySemantic(FullySemanticMemory),
}

impl BuiltMemory {
    pub fn as_memory(&self) -> &dyn AssociativeMemory {
        match self {
            BuiltMemory::Pixel(m) => m,
            BuiltMemory::Semantic(m) => m,
            BuiltMemory::FullySemantic(m) => m,
        }
    }

    pub fn feature_map_id(&self) -> String {
        match self {
            BuiltMemory::Pixel(m) => format!("identity:{}", m.dim()),
            BuiltMemory::Semantic(m) => m.map().id(),
            BuiltMemory::FullySemantic(m) => m.encoder().id(),
        }
    }
}

fn feature_map(source: &FeatureSource, items: &MemoryStore) -> Result<FeatureMap> {
    Ok(match source {
        FeatureSource::Identity => FeatureMap::Identity { dim: items.dim() },
        FeatureSource::Model(p) => FeatureMap::MlpEncoder(load_model(p)?),
        FeatureSource::Table { stored, queries } => {
            let table = load_embeddings(stored)?;
            let queries = queries.as_ref().map(load_embeddings).transpose()?;
            let name = stored.display().to_string();
            FeatureMap::ExternalTable(ExternalTable::new(items.dim(), table, queries, name)?)
        }
    })
}

/// Builds the configured memory over `items`.
pub fn build_memory(config: &ExperimentConfig, items: &MemoryStore) -> Result<BuiltMemory> {
    Ok(match config.mode {
        ModelMode::Uhn => BuiltMemory::Pixel(items.clone()),
        ModelMode::Semantic => {
            let mem = SemanticMemory::new(items.clone(), feature_map(&config.features, items)?)?;
            BuiltMemory::Semantic(if config.normalize { mem.normalized()? } else { mem })
        }
        ModelMode::FullySemantic => {
            let encoder = feature_map(&config.features, items)?;
            let embeddings = build_embedding_store(&encoder, items)?;
            let decoder = match &config.decoder {
                Some(p) => GenerativeMap::MlpDecoder(load_model(p)?),
                None => GenerativeMap::Identity {
                    dim: embeddings.dim(),
                },
            };
            let mut mem = FullySemanticMemory::new(embeddings, encoder, decoder)?;
            if let Some(shape) = items.shape() {
                mem = mem.with_shape(shape)?;
            }
            BuiltMemory::FullySemantic(mem)
        }
    })
}

fn map_indices<T, F>(n: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Corrupts item `i` of `items` with seed `derive_seed(seed, i)`.
pub fn corrupted_query(
    items: &MemoryStore,
    i: usize,
    corruption: &CorruptionKind,
    seed: u64,
) -> Result<DataVector> {
    Ok(corrupt(
        &items.item(i),
        &corruption.with_seed(derive_seed(seed, i as u64)),
    )?)
}

/// Error counts for every similarity under one corruption. `items` are the
/// clean versions of the stored memories, in storage order.
pub fn evaluate_corruption(
    memory: &dyn AssociativeMemory,
    items: &MemoryStore,
    corruption: &CorruptionKind,
    kinds: &[Similarity],
    sep: &Separation,
    seed: u64,
    parallel: bool,
) -> Result<Vec<Cell>> {
    if items.len() != memory.len() {
        return Err(featmem_core::Error::DimensionMismatch {
            expected: memory.len(),
            actual: items.len(),
        }
        .into());
    }
    let queries = map_indices(items.len(), parallel, |i| {
        corrupted_query(items, i, corruption, seed)
    })?;

    let start = Instant::now();
    let encoded = map_indices(queries.len(), parallel, |i| Ok(memory.encode_query(&queries[i])?))?;
    let embed_seconds = start.elapsed().as_secs_f64();

    let mut cells = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let start = Instant::now();
        let hits = map_indices(encoded.len(), parallel, |i| {
            Ok(memory.retrieve_encoded(&encoded[i], kind, sep)?.top_index == i)
        })?;
        let score_seconds = start.elapsed().as_secs_f64();
        let errors = hits.iter().filter(|&&ok| !ok).count();
        cells.push(Cell {
            corruption: corruption.to_string(),
            similarity: kind.to_string(),
            queries: hits.len(),
            errors,
            error_rate: errors as f64 / hits.len() as f64,
            embed_seconds,
            score_seconds,
        });
    }
    Ok(cells)
}

/// Full (corruption × similarity) grid.
pub fn evaluate_grid(
    memory: &dyn AssociativeMemory,
    items: &MemoryStore,
    corruptions: &[CorruptionKind],
    kinds: &[Similarity],
    sep: &Separation,
    seed: u64,
    parallel: bool,
) -> Result<Vec<Cell>> {
    let mut cells = Vec::with_capacity(corruptions.len() * kinds.len());
    for c in corruptions {
        cells.extend(evaluate_corruption(memory, items, c, kinds, sep, seed, parallel)?);
    }
    Ok(cells)
}

fn metadata(config: &ExperimentConfig, items: &MemoryStore, memory: &BuiltMemory) -> Metadata {
    Metadata {
        mode: config.mode.to_string(),
        dataset: config.dataset.to_string(),
        feature_map: memory.feature_map_id(),
        separation: config.separation.to_string(),
        dim: items.dim(),
        count: items.len(),
        embedding_dim: memory.as_memory().score_dim(),
        seed: config.seed,
        engine_version: ENGINE_VERSION.to_string(),
    }
}

pub fn run_retrieval_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let items = load_items(&config.dataset, config.subset)?;
    let memory = build_memory(config, &items)?;
    let cells = evaluate_grid(
        memory.as_memory(),
        &items,
        &config.corruptions,
        &config.similarities,
        &config.separation,
        config.seed,
        config.parallel,
    )?;
    Ok(ExperimentReport {
        metadata: metadata(config, &items, &memory),
        cells,
    })
}

/// Error rate against Gaussian noise of each mean, for each named model.
#[allow(clippy::too_many_arguments)]
pub fn sweep_models(
    models: &[(&str, &dyn AssociativeMemory)],
    items: &MemoryStore,
    kinds: &[Similarity],
    sep: &Separation,
    means: &[f64],
    variance: f64,
    seed: u64,
    parallel: bool,
) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::new();
    for (name, memory) in models {
        for &mean in means {
            let noise = CorruptionKind::gaussian(mean, variance);
            for cell in evaluate_corruption(*memory, items, &noise, kinds, sep, seed, parallel)? {
                points.push(SweepPoint {
                    model: name.to_string(),
                    similarity: cell.similarity,
                    mean,
                    variance,
                    error_rate: cell.error_rate,
                });
            }
        }
    }
    Ok(points)
}

/// Sweeps Gaussian means for the pixel-space memory and, unless the
/// configured mode is already pixel space, the configured memory.
pub fn run_mean_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let items = load_items(&config.dataset, config.subset)?;
    let memory = build_memory(config, &items)?;
    let mut models: Vec<(&str, &dyn AssociativeMemory)> = vec![("uhn", &items)];
    let mode = config.mode.to_string();
    if config.mode != ModelMode::Uhn {
        models.push((&mode, memory.as_memory()));
    }
    let points = sweep_models(
        &models,
        &items,
        &config.similarities,
        &config.separation,
        &config.means,
        config.variance,
        config.seed,
        config.parallel,
    )?;
    Ok(SweepReport {
        metadata: metadata(config, &items, &memory),
        points,
    })
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn timed<F: FnMut() -> Result<()>>(warmup: usize, reps: usize, mut f: F) -> Result<f64> {
    for _ in 0..warmup {
        f()?;
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        f()?;
        samples.push(start.elapsed().as_secs_f64());
    }
    Ok(median(&mut samples))
}

/// Median single-threaded timings over `reps` repetitions after one warm-up
/// pass, for each similarity.
pub fn time_memory(
    space: &str,
    memory: &dyn AssociativeMemory,
    queries: &[DataVector],
    kinds: &[Similarity],
    sep: &Separation,
    reps: usize,
) -> Result<Vec<TimingRow>> {
    let reps = reps.max(5);
    let mut encoded = Vec::new();
    let encode_seconds = timed(1, reps, || {
        encoded = queries
            .iter()
            .map(|q| memory.encode_query(q))
            .collect::<featmem_core::Result<Vec<_>>>()?;
        Ok(())
    })?;
    let mut rows = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let score_seconds = timed(1, reps, || {
            for z in &encoded {
                std::hint::black_box(memory.score_encoded(z, kind)?);
            }
            Ok(())
        })?;
        let retrieve_seconds = timed(1, reps, || {
            for z in &encoded {
                std::hint::black_box(memory.retrieve_encoded(z, kind, sep)?);
            }
            Ok(())
        })?;
        rows.push(TimingRow {
            space: space.to_string(),
            similarity: kind.to_string(),
            dim: memory.score_dim(),
            count: memory.len(),
            queries: queries.len(),
            encode_seconds,
            score_seconds,
            retrieve_seconds,
        });
    }
    Ok(rows)
}

/// Timings of pixel-space scoring and, unless the mode is pixel space, of the
/// configured memory, on up to 100 corrupted queries.
pub fn run_timing(config: &ExperimentConfig) -> Result<TimingReport> {
    config.validate()?;
    let items = load_items(&config.dataset, config.subset)?;
    let memory = build_memory(config, &items)?;
    let corruption = config.corruptions[0];
    let queries = (0..items.len().min(100))
        .map(|i| corrupted_query(&items, i, &corruption, config.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = time_memory(
        "pixel",
        &items,
        &queries,
        &config.similarities,
        &config.separation,
        config.reps,
    )?;
    if config.mode != ModelMode::Uhn {
        rows.extend(time_memory(
            "embedding",
            memory.as_memory(),
            &queries,
            &config.similarities,
            &config.separation,
            config.reps,
        )?);
    }
    Ok(TimingReport {
        reps: config.reps.max(5),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn subset_larger_than_dataset_is_rejected() {
        let src = DatasetSource::Synthetic { count: 5, seed: 0 };
        assert!(matches!(
            load_items(&src, Some(6)),
            Err(BenchError::SubsetTooLarge {
                subset: 6,
                available: 5
            })
        ));
        assert_eq!(load_items(&src, Some(3)).unwrap().len(), 3);
    }
}
