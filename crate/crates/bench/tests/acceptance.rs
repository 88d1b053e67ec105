//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p featmem-bench --test acceptance`; extra arguments
//! after `--` select criteria whose name contains any of them. Set
//! `FEATMEM_MNIST_DIR` to a directory holding the MNIST IDX files to run the
//! autoencoder replication on real digits instead of synthetic ones.

use std::process::ExitCode;
use std::time::Instant;

use featmem_bench::experiment::{evaluate_corruption, sweep_models, time_memory};
use featmem_core::corrupt::{corrupt, derive_seed, AugmentationPipeline, CorruptionKind, MaskRegion};
use featmem_core::datasets::{load_mnist, random_images, synthetic_digits};
use featmem_core::features::{build_embedding_store, semantic_retrieve, FeatureMap, SemanticMemory};
use featmem_core::format::{
    decode_aemb, decode_amdl, decode_amem, encode_aemb, encode_amdl, encode_amem, load_dataset,
    load_embeddings, load_model, save_dataset, save_embeddings, save_model,
};
use featmem_core::fully_semantic::{fs_retrieve, FullySemanticMemory, GenerativeMap};
use featmem_core::memory::{separate, uhn_retrieve, AssociativeMemory, MemoryStore, Separation, Similarity};
use featmem_core::nn::{
    mse_loss_grad, nt_xent_loss_grad, train_autoencoder, train_contrastive, Activation, AutoencoderOptions,
    ContrastiveBatch, ContrastiveSimilarity, Denominator, Mlp, Optimizer, TrainConfig,
    DEFAULT_AUTOENCODER_DIMS,
};
use featmem_core::vector::{DataVector, Shape};
use featmem_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// Oracle equivalence

fn brute_force_nearest(q: &[f64], store: &MemoryStore, kind: Similarity) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..store.len() {
        let x = store.column(i);
        let s = match kind {
            Similarity::Dot => q.iter().zip(x).map(|(a, b)| a * b).sum(),
            Similarity::Cosine => {
                let dot: f64 = q.iter().zip(x).map(|(a, b)| a * b).sum();
                let nq = q.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                dot / (nq * nx)
            }
            Similarity::NegL2 => -q.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
            Similarity::NegL1 => -q.iter().zip(x).map(|(a, b)| (a - b).abs()).sum::<f64>(),
            Similarity::NegHamming => -(q.iter().zip(x).filter(|(a, b)| a != b).count() as f64),
        };
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

fn random_store(rng: &mut ChaCha8Rng, n: usize, d: usize, binary: bool) -> MemoryStore {
    let data = (0..n * d)
        .map(|_| {
            if binary {
                rng.random_range(0..2) as f64
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    MemoryStore::from_flat(d, n, data).unwrap()
}

fn random_query(rng: &mut ChaCha8Rng, d: usize, binary: bool) -> DataVector {
    let v = (0..d)
        .map(|_| {
            if binary {
                rng.random_range(0..2) as f64
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    DataVector::new(v).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut compared = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=128);
        let d = rng.random_range(1..=64);
        let real = random_store(&mut rng, n, d, false);
        let binary = random_store(&mut rng, n, d, true);
        let (qr, qb) = (random_query(&mut rng, d, false), random_query(&mut rng, d, true));
        for kind in Similarity::ALL {
            let (store, q) = if kind == Similarity::NegHamming {
                (&binary, &qb)
            } else {
                (&real, &qr)
            };
            let got = uhn_retrieve(q, store, kind, &Separation::Max)
                .map_err(err)?
                .top_index;
            let want = brute_force_nearest(q.values(), store, kind);
            ensure(got == want, || {
                format!("{kind}: top {got}, brute force {want} (N={n}, d={d})")
            })?;
            compared += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!(
        "{compared} comparisons over 1000 instances agree, {secs:.2} s"
    ))
}

// ---------------------------------------------------------------------------
// Reduction identities

fn reduction_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seps = [
        Separation::Max,
        Separation::Softmax { beta: 3.0 },
        Separation::Softmax { beta: 50.0 },
        Separation::Threshold { cut: 0.0 },
        Separation::RectPolynomial { degree: 2 },
    ];
    for trial in 0..100 {
        let n = rng.random_range(1..=64);
        let d = rng.random_range(1..=32);
        let binary = trial % 5 == 4;
        let store = random_store(&mut rng, n, d, binary);
        let q = random_query(&mut rng, d, binary);
        let kind = Similarity::ALL[trial % 5];
        let sep = &seps[trial % seps.len()];
        let id = FeatureMap::Identity { dim: d };
        let emb = build_embedding_store(&id, &store).map_err(err)?;
        let fs = FullySemanticMemory::new(emb.clone(), id.clone(), GenerativeMap::Identity { dim: d })
            .map_err(err)?;
        let base = uhn_retrieve(&q, &store, kind, sep).map_err(err)?;
        let semantic = semantic_retrieve(&q, &store, &emb, &id, kind, sep).map_err(err)?;
        let fully = fs_retrieve(&q, &fs, kind, sep).map_err(err)?;
        ensure(semantic == base, || {
            format!("config {trial}: semantic differs ({kind}, {sep})")
        })?;
        ensure(fully == base, || {
            format!("config {trial}: fully-semantic differs ({kind}, {sep})")
        })?;
    }
    Ok("100 configurations bit-exact for semantic and fully-semantic".into())
}

// ---------------------------------------------------------------------------
// Separation

fn separation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let soft = Separation::Softmax { beta: 1e4 };
    let mut gapped = 0;
    let mut worst_sum = 0.0f64;
    let mut worst_onehot = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=64);
        let scale = [1.0, 10.0, 1e3][rng.random_range(0..3)];
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        let p = separate(&scores, &soft).map_err(err)?;
        worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());

        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if n == 1 || sorted[0] - sorted[1] >= 0.01 {
            gapped += 1;
            let hard = separate(&scores, &Separation::Max).map_err(err)?;
            let diff = p
                .iter()
                .zip(&hard)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst_onehot = worst_onehot.max(diff);
        }
    }
    ensure(worst_sum <= 1e-12, || format!("softmax sum off by {worst_sum:e}"))?;
    ensure(worst_onehot <= 1e-6, || {
        format!("softmax vs one-hot off by {worst_onehot:e}")
    })?;
    Ok(format!(
        "sum error {worst_sum:.1e}, one-hot error {worst_onehot:.1e} over {gapped} gapped vectors"
    ))
}

// ---------------------------------------------------------------------------
// Gradient checks

fn central_difference<F: Fn(&[f64]) -> f64>(params: &[f64], step: f64, f: F) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + step;
            let up = f(&p);
            p[i] = orig - step;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn gradient_checks() -> Outcome {
    const STEP: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_mse = 0.0f64;
    let mut models = 0;
    while models < 50 {
        let depth = rng.random_range(1..4);
        let dims: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..7)).collect();
        let acts: Vec<Activation> = (0..depth)
            .map(|l| {
                if l + 1 == depth {
                    Activation::Sigmoid
                } else {
                    Activation::Relu
                }
            })
            .collect();
        let mut model = Mlp::he_uniform(&dims, &acts, &mut rng).map_err(err)?;
        for l in 0..model.layer_count() {
            for b in model.bias_mut(l) {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        let data: Vec<(Vec<f64>, Vec<f64>)> = (0..3)
            .map(|_| {
                let x = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
                let t = (0..dims[depth]).map(|_| rng.random_range(0.0..1.0)).collect();
                (x, t)
            })
            .collect();
        if data
            .iter()
            .any(|(x, _)| model.min_relu_margin(x).unwrap() <= 1e-3)
        {
            continue;
        }
        let pairs: Vec<(&[f64], &[f64])> = data.iter().map(|(x, t)| (&x[..], &t[..])).collect();
        let (_, analytic) = mse_loss_grad(&model, &pairs).map_err(err)?;
        let numeric = central_difference(model.params(), STEP, |p| {
            let m = Mlp::from_params(model.dims(), model.activations(), p.to_vec()).unwrap();
            mse_loss_grad(&m, &pairs).unwrap().0
        });
        worst_mse = worst_mse.max(max_rel_error(&analytic, &numeric));
        models += 1;
    }
    ensure(worst_mse <= 1e-4, || format!("MSE relative error {worst_mse:e}"))?;

    let mut worst_xent = 0.0f64;
    for trial in 0..50 {
        let b = rng.random_range(2..6);
        let dim = rng.random_range(2..6);
        let views: Vec<Vec<f64>> = (0..2 * b)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let sim = [ContrastiveSimilarity::Cosine, ContrastiveSimilarity::Dot][trial % 2];
        let tau = [1.0, 0.5][trial / 2 % 2];
        let loss = |flat: &[f64]| {
            let vs = flat.chunks(dim).map(<[f64]>::to_vec).collect();
            nt_xent_loss_grad(
                &ContrastiveBatch::new(vs).unwrap(),
                sim,
                tau,
                Denominator::AllOthers,
            )
            .unwrap()
            .0
        };
        let batch = ContrastiveBatch::new(views.clone()).map_err(err)?;
        let (_, grads) = nt_xent_loss_grad(&batch, sim, tau, Denominator::AllOthers).map_err(err)?;
        let numeric = central_difference(&views.concat(), STEP, loss);
        worst_xent = worst_xent.max(max_rel_error(&grads.concat(), &numeric));
    }
    ensure(worst_xent <= 1e-4, || {
        format!("NT-Xent relative error {worst_xent:e}")
    })?;

    let single = ContrastiveBatch::new(vec![vec![0.2, -0.7, 1.1], vec![0.9, 0.4, -0.3]]).map_err(err)?;
    let (l1, _) = nt_xent_loss_grad(
        &single,
        ContrastiveSimilarity::Cosine,
        1.0,
        Denominator::AllOthers,
    )
    .map_err(err)?;
    ensure(l1.abs() <= 1e-9, || format!("B = 1 loss {l1}"))?;
    for b in 1..=8usize {
        let same = ContrastiveBatch::new(vec![vec![0.5, -0.25, 2.0]; 2 * b]).map_err(err)?;
        let (l, _) = nt_xent_loss_grad(&same, ContrastiveSimilarity::Cosine, 1.0, Denominator::AllOthers)
            .map_err(err)?;
        let want = ((2 * b - 1) as f64).ln();
        ensure((l - want).abs() <= 1e-9, || {
            format!("identical views B = {b}: {l} vs {want}")
        })?;
    }
    Ok(format!(
        "MSE max rel error {worst_mse:.1e} (50 models), NT-Xent {worst_xent:.1e} (50 batches), reference losses exact"
    ))
}

// ---------------------------------------------------------------------------
// Corruption invariants

fn corruption_invariants() -> Outcome {
    let start = Instant::now();
    let shapes = [(1, 28, 28), (3, 32, 32), (2, 5, 5)];
    let mut images = Vec::new();
    for (k, &(c, h, w)) in shapes.iter().enumerate() {
        let store = random_images(20, Shape::new(c, h, w).map_err(err)?, k as u64).map_err(err)?;
        images.extend((0..store.len()).map(|i| store.item(i)));
    }

    for (i, x) in images.iter().enumerate() {
        let quarter: CorruptionKind = "rotation:angle=90".parse().map_err(err)?;
        let mut y = x.clone();
        for r in 0..4 {
            y = corrupt(&y, &quarter.with_seed(r)).map_err(err)?;
        }
        ensure(y.values() == x.values(), || {
            format!("image {i}: four rotations differ")
        })?;

        let shape = x.shape().unwrap();
        for region in [
            MaskRegion::Bottom,
            MaskRegion::Top,
            MaskRegion::Left,
            MaskRegion::Right,
        ] {
            let kind = CorruptionKind::Mask {
                fraction: 0.5,
                region,
            };
            let m = corrupt(x, &kind.with_seed(0)).map_err(err)?;
            for ch in 0..shape.channels {
                for r in 0..shape.height {
                    for col in 0..shape.width {
                        let kept = match region {
                            MaskRegion::Bottom => r < shape.height / 2,
                            MaskRegion::Top => r >= shape.height - shape.height / 2,
                            MaskRegion::Left => col >= shape.width - shape.width / 2,
                            MaskRegion::Right => col < shape.width / 2,
                        };
                        let at = shape.index(ch, r, col);
                        if kept {
                            ensure(m.values()[at].to_bits() == x.values()[at].to_bits(), || {
                                format!("image {i}: unmasked pixel ({ch},{r},{col}) changed under {region:?}")
                            })?;
                        }
                    }
                }
            }
        }
    }

    let p = 0.1;
    let side = 64;
    let values: Vec<f64> = (0..side * side)
        .map(|k| 0.05 + 0.9 * ((k * 37) % 101) as f64 / 100.0)
        .collect();
    let gray = DataVector::with_shape(values, Shape::new(1, side, side).map_err(err)?).map_err(err)?;
    let n = (side * side) as f64;
    let sigma = (p * (1.0 - p) / n).sqrt();
    for seed in 0..50 {
        let y = corrupt(&gray, &CorruptionKind::SaltPepper { p }.with_seed(seed)).map_err(err)?;
        let changed: Vec<f64> = y
            .values()
            .iter()
            .zip(gray.values())
            .filter(|(a, b)| a != b)
            .map(|(a, _)| *a)
            .collect();
        ensure(changed.iter().all(|&v| v == 0.0 || v == 1.0), || {
            format!("seed {seed}: changed pixel not in {{0,1}}")
        })?;
        let frac = changed.len() as f64 / n;
        ensure((frac - p).abs() <= 3.0 * sigma, || {
            format!("seed {seed}: changed fraction {frac} vs {p} ± {}", 3.0 * sigma)
        })?;
    }

    for kind in CorruptionKind::standard_suite() {
        for x in images.iter().take(20) {
            for seed in [0, 7, u64::MAX] {
                let spec = kind.with_seed(seed);
                let a = corrupt(x, &spec).map_err(err)?;
                let b = corrupt(x, &spec).map_err(err)?;
                ensure(a == b, || format!("{kind} not deterministic at seed {seed}"))?;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("suite took {secs:.2} s"))?;
    Ok(format!(
        "rotation, mask, salt-and-pepper, and determinism checks hold, {secs:.2} s"
    ))
}

// ---------------------------------------------------------------------------
// Autoencoder replication

const AE_TRAIN: usize = 5000;
const AE_HELD_OUT: usize = 1000;
const AE_EPOCHS: usize = 150;
const AE_MIN_ACCURACY: f64 = 0.80;

fn replication_data() -> Result<(MemoryStore, MemoryStore, String), String> {
    if let Ok(dir) = std::env::var("FEATMEM_MNIST_DIR") {
        let train = load_mnist(&dir, "train")
            .map_err(err)?
            .images
            .truncated(AE_TRAIN)
            .map_err(err)?;
        let test = load_mnist(&dir, "t10k")
            .map_err(err)?
            .images
            .truncated(AE_HELD_OUT)
            .map_err(err)?;
        return Ok((train, test, format!("MNIST from {dir}")));
    }
    let train = synthetic_digits(AE_TRAIN, 11).map_err(err)?.images;
    let test = synthetic_digits(AE_HELD_OUT, 12).map_err(err)?.images;
    Ok((train, test, "synthetic digits".into()))
}

fn accuracy(
    memory: &dyn AssociativeMemory,
    items: &MemoryStore,
    noise: CorruptionKind,
) -> Result<f64, String> {
    let cells = evaluate_corruption(
        memory,
        items,
        &noise,
        &[Similarity::Cosine],
        &Separation::Softmax { beta: 50.0 },
        3,
        true,
    )
    .map_err(err)?;
    Ok(1.0 - cells[0].error_rate)
}

fn autoencoder_replication() -> Outcome {
    let start = Instant::now();
    let (train, test, source) = replication_data()?;
    let config = TrainConfig {
        epochs: AE_EPOCHS,
        batch_size: 50,
        optimizer: Optimizer::Adam,
        weight_decay: 0.3,
        seed: 5,
        ..TrainConfig::autoencoder()
    };
    let opts = AutoencoderOptions {
        bottleneck: Activation::Linear,
        ..AutoencoderOptions::default()
    };
    let trained = train_autoencoder(&train, &DEFAULT_AUTOENCODER_DIMS, &config, opts).map_err(err)?;
    let embeddings = build_embedding_store(&trained.encoder, &test).map_err(err)?;
    let memory = FullySemanticMemory::new(embeddings, trained.encoder, trained.decoder)
        .map_err(err)?
        .with_shape(test.shape().unwrap())
        .map_err(err)?;

    let clamped = accuracy(&memory, &test, CorruptionKind::gaussian(0.0, 0.2))?;
    let unclamped = accuracy(
        &memory,
        &test,
        CorruptionKind::Gaussian {
            mean: 0.0,
            variance: 0.2,
            clamp: false,
        },
    )?;
    let clean = accuracy(&memory, &test, CorruptionKind::gaussian(0.0, 0.0))?;
    let pixel = accuracy(&test, &test, CorruptionKind::gaussian(0.0, 0.2))?;
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "{source}, {AE_EPOCHS} epochs, final MSE {:.4}: accuracy {:.1}% (unclamped noise {:.1}%, clean {:.1}%, pixel-space {:.1}%), {secs:.0} s",
        trained.history.last().copied().unwrap_or(f64::NAN),
        100.0 * clamped,
        100.0 * unclamped,
        100.0 * clean,
        100.0 * pixel,
    );
    ensure(clamped >= AE_MIN_ACCURACY, || {
        format!("{detail}; need ≥ {:.0}%", 100.0 * AE_MIN_ACCURACY)
    })?;
    ensure(secs < 900.0, || format!("{detail}; over the 15 min budget"))?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// Timing

fn timing() -> Outcome {
    let (d, e, n, q) = (3072, 512, 10_000, 20);
    let data = random_images(n, Shape::new(3, 32, 32).map_err(err)?, 6).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let encoder = Mlp::he_uniform(&[d, e], &[Activation::Linear], &mut rng).map_err(err)?;
    let semantic = SemanticMemory::new(data.clone(), FeatureMap::MlpEncoder(encoder)).map_err(err)?;
    let queries: Vec<DataVector> = (0..q)
        .map(|i| {
            corrupt(
                &data.item(i),
                &CorruptionKind::gaussian(0.0, 0.1).with_seed(derive_seed(6, i as u64)),
            )
        })
        .collect::<Result<_, Error>>()
        .map_err(err)?;
    let sep = Separation::Softmax { beta: 50.0 };
    let pixel = time_memory("pixel", &data, &queries, &[Similarity::Cosine], &sep, 5).map_err(err)?;
    let embedded =
        time_memory("embedding", &semantic, &queries, &[Similarity::Cosine], &sep, 5).map_err(err)?;
    let (tp, te) = (pixel[0].encode_and_score(), embedded[0].encode_and_score());
    let ratio = tp / te;
    let detail = format!(
        "{q} cosine queries, N={n}: pixel {:.1} ms/query, embedding {:.1} ms/query (forward {:.1}), ratio {ratio:.2}",
        1e3 * tp / q as f64,
        1e3 * te / q as f64,
        1e3 * embedded[0].encode_seconds / q as f64
    );
    ensure(ratio >= 1.5, || format!("{detail}; need ≥ 1.5"))?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// Mean sweep

fn mean_sweep() -> Outcome {
    let start = Instant::now();
    let train = synthetic_digits(2000, 21).map_err(err)?.images;
    let test = synthetic_digits(500, 22).map_err(err)?.images;
    let config = TrainConfig {
        epochs: 30,
        seed: 7,
        temperature: 0.5,
        ..TrainConfig::contrastive()
    };
    let trained = train_contrastive(
        &train,
        &AugmentationPipeline::standard(),
        &[784, 256, 64],
        &config,
    )
    .map_err(err)?;
    let semantic = SemanticMemory::new(test.clone(), trained.encoder).map_err(err)?;
    let models: [(&str, &dyn AssociativeMemory); 2] = [("uhn", &test), ("semantic", &semantic)];
    let points = sweep_models(
        &models,
        &test,
        &[Similarity::Cosine],
        &Separation::Softmax { beta: 50.0 },
        &[0.0, 0.5],
        0.1,
        8,
        true,
    )
    .map_err(err)?;
    let at = |model: &str, mean: f64| {
        points
            .iter()
            .find(|p| p.model == model && p.mean == mean)
            .map(|p| p.error_rate)
            .unwrap()
    };
    let (pix0, pix5, sem0, sem5) = (
        at("uhn", 0.0),
        at("uhn", 0.5),
        at("semantic", 0.0),
        at("semantic", 0.5),
    );
    let detail = format!(
        "cosine error at mean 0 / 0.5: pixel {:.1}% / {:.1}%, semantic {:.1}% / {:.1}%, {:.0} s",
        100.0 * pix0,
        100.0 * pix5,
        100.0 * sem0,
        100.0 * sem5,
        start.elapsed().as_secs_f64()
    );
    ensure(sem5 < pix5, || {
        format!("{detail}; semantic not below pixel at mean 0.5")
    })?;
    ensure(pix5 > pix0, || {
        format!("{detail}; pixel error does not grow with the mean")
    })?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// Formats

fn format_round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let f32_exact = |s: &MemoryStore| {
        let data = s.as_slice().iter().map(|&v| v as f32 as f64).collect();
        MemoryStore::from_flat(s.dim(), s.len(), data).unwrap()
    };

    let images = random_images(17, Shape::new(3, 6, 5).map_err(err)?, 9).map_err(err)?;
    let images = f32_exact(&images)
        .with_shape(images.shape().unwrap())
        .map_err(err)?;
    let amem = dir.path().join("a.amem");
    save_dataset(&images, &amem).map_err(err)?;
    let back = load_dataset(&amem).map_err(err)?;
    ensure(back == images, || "AMEM payload changed".into())?;
    ensure(
        encode_amem(&back).map_err(err)? == std::fs::read(&amem).map_err(err)?,
        || "AMEM bytes differ".into(),
    )?;

    let table =
        f32_exact(&MemoryStore::from_flat(11, 17, images.as_slice()[..11 * 17].to_vec()).map_err(err)?);
    let aemb = dir.path().join("a.aemb");
    save_embeddings(&table, &aemb).map_err(err)?;
    let back = load_embeddings(&aemb).map_err(err)?;
    ensure(back == table, || "AEMB payload changed".into())?;
    ensure(
        encode_aemb(&back).map_err(err)? == std::fs::read(&aemb).map_err(err)?,
        || "AEMB bytes differ".into(),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = Mlp::he_uniform(
        &[12, 5, 3, 12],
        &[Activation::Relu, Activation::Linear, Activation::Sigmoid],
        &mut rng,
    )
    .map_err(err)?;
    let params = model.params().iter().map(|&v| v as f32 as f64).collect();
    let model = Mlp::from_params(model.dims(), model.activations(), params).map_err(err)?;
    let amdl = dir.path().join("a.amdl");
    save_model(&model, &amdl).map_err(err)?;
    let back = load_model(&amdl).map_err(err)?;
    ensure(back == model, || "AMDL payload changed".into())?;
    let amdl_bytes = std::fs::read(&amdl).map_err(err)?;
    ensure(encode_amdl(&back).map_err(err)? == amdl_bytes, || {
        "AMDL bytes differ".into()
    })?;

    let amem_bytes = encode_amem(&images).map_err(err)?;
    let aemb_bytes = encode_aemb(&table).map_err(err)?;
    ensure(
        matches!(decode_amem(&aemb_bytes), Err(Error::BadMagic { .. })),
        || "AMEM accepted AEMB magic".into(),
    )?;
    ensure(
        matches!(decode_aemb(&amem_bytes), Err(Error::BadMagic { .. })),
        || "AEMB accepted AMEM magic".into(),
    )?;
    ensure(
        matches!(decode_amdl(&amem_bytes), Err(Error::BadMagic { .. })),
        || "AMDL accepted AMEM magic".into(),
    )?;
    let mut version = amem_bytes.clone();
    version[4] = 9;
    ensure(
        matches!(decode_amem(&version), Err(Error::Unsupported { .. })),
        || "unknown AMEM version accepted".into(),
    )?;
    ensure(
        matches!(decode_amem(&amem_bytes[..10]), Err(Error::Truncated { .. })),
        || "truncated AMEM accepted".into(),
    )?;
    ensure(
        matches!(
            decode_amdl(&amdl_bytes[..amdl_bytes.len() - 1]),
            Err(Error::Truncated { .. })
        ),
        || "truncated AMDL accepted".into(),
    )?;
    let mut trailing = aemb_bytes;
    trailing.push(0);
    ensure(
        matches!(decode_aemb(&trailing), Err(Error::TrailingBytes(1))),
        || "trailing AEMB byte accepted".into(),
    )?;
    Ok("AMEM, AEMB, and AMDL round-trip byte-identically; bad magic, version, truncation, and trailing bytes rejected".into())
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 9] = [
        ("oracle_equivalence", oracle_equivalence),
        ("reduction_identities", reduction_identities),
        ("separation", separation),
        ("gradient_checks", gradient_checks),
        ("corruption_invariants", corruption_invariants),
        ("autoencoder_replication", autoencoder_replication),
        ("timing", timing),
        ("mean_sweep", mean_sweep),
        ("format_round_trips", format_round_trips),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
