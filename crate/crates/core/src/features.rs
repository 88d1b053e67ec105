//! Feature maps and the semantic memory model.
//!
//! A semantic memory keeps the original points for projection but scores
//! queries against their embeddings: `μ_D = π_D ∘ α ∘ κ_φ(D) ∘ φ`. With the
//! identity map it is exactly a pixel-space universal Hopfield network.

use crate::error::{Error, Result};
use crate::memory::{
    argmax, project, score_slice, separate, AssociativeMemory, MemoryStore, RetrievalResult, Separation,
    Similarity,
};
use crate::nn::Mlp;
use crate::vector::{normalize_in_place, DataVector};

/// Default embedding width of the MNIST-scale encoders.
pub const DEFAULT_MLP_EMBEDDING: usize = 12;
/// Embedding widths of imported ResNet18 and ResNet50 tables.
pub const RESNET18_EMBEDDING: usize = 512;
pub const RESNET50_EMBEDDING: usize = 2048;

/// Embeddings computed outside the engine, looked up by dataset index.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalTable {
    input_dim: usize,
    stored: MemoryStore,
    queries: Option<MemoryStore>,
    name: String,
}

impl ExternalTable {
    pub fn new(
        input_dim: usize,
        stored: MemoryStore,
        queries: Option<MemoryStore>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if let Some(q) = &queries {
            if q.dim() != stored.dim() {
                return Err(Error::DimensionMismatch {
                    expected: stored.dim(),
                    actual: q.dim(),
                });
            }
        }
        Ok(Self {
            input_dim,
            stored,
            queries,
            name: name.into(),
        })
    }

    pub fn stored(&self) -> &MemoryStore {
        &self.stored
    }

    pub fn queries(&self) -> Option<&MemoryStore> {
        self.queries.as_ref()
    }
}

/// Embedding function `φ: R^d → R^e`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    Identity {
        dim: usize,
    },
    MlpEncoder(Mlp),
    /// Index lookup. Keyed queries read the query table when one is loaded and
    /// the stored table otherwise.
    ExternalTable(ExternalTable),
}

impl FeatureMap {
    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::MlpEncoder(m) => m.input_dim(),
            FeatureMap::ExternalTable(t) => t.input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::MlpEncoder(m) => m.output_dim(),
            FeatureMap::ExternalTable(t) => t.stored.dim(),
        }
    }

    /// Parameter count (zero for maps without trainable weights).
    pub fn num_params(&self) -> usize {
        match self {
            FeatureMap::MlpEncoder(m) => m.num_params(),
            _ => 0,
        }
    }

    /// Provenance label recorded alongside embedding stores.
    pub fn id(&self) -> String {
        match self {
            FeatureMap::Identity { dim } => format!("identity:{dim}"),
            FeatureMap::MlpEncoder(m) => m.describe(),
            FeatureMap::ExternalTable(t) => format!("external:{}", t.name),
        }
    }

    pub fn embed(&self, x: &DataVector) -> Result<DataVector> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let values = match self {
            FeatureMap::Identity { .. } => return Ok(x.clone()),
            FeatureMap::MlpEncoder(m) => m.forward(x.values())?,
            FeatureMap::ExternalTable(t) => {
                let key = x.key().ok_or(Error::MissingIndex)?;
                let table = t.queries.as_ref().unwrap_or(&t.stored);
                if key >= table.len() {
                    return Err(Error::UnknownIndex {
                        index: key,
                        len: table.len(),
                    });
                }
                table.column(key).to_vec()
            }
        };
        let out = DataVector::new(values)?;
        Ok(match x.key() {
            Some(k) => out.keyed(k),
            None => out,
        })
    }
}

/// `φ(D)`: one embedding column per stored point, with the map it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    matrix: MemoryStore,
    feature_map_id: String,
}

impl EmbeddingStore {
    pub fn new(matrix: MemoryStore, feature_map_id: impl Into<String>) -> Result<Self> {
        if let Some(i) = matrix.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            matrix,
            feature_map_id: feature_map_id.into(),
        })
    }

    pub fn matrix(&self) -> &MemoryStore {
        &self.matrix
    }

    pub fn into_matrix(self) -> MemoryStore {
        self.matrix
    }

    pub fn feature_map_id(&self) -> &str {
        &self.feature_map_id
    }

    /// Embedding width `e`.
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn l2_normalized(&self) -> Result<Self> {
        Ok(Self {
            matrix: self.matrix.l2_normalized()?,
            feature_map_id: self.feature_map_id.clone(),
        })
    }
}

/// Embeds every stored column.
pub fn build_embedding_store(map: &FeatureMap, store: &MemoryStore) -> Result<EmbeddingStore> {
    if map.input_dim() != store.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.input_dim(),
            actual: store.dim(),
        });
    }
    let matrix = match map {
        FeatureMap::ExternalTable(t) => {
            if t.stored.len() != store.len() {
                return Err(Error::DimensionMismatch {
                    expected: store.len(),
                    actual: t.stored.len(),
                });
            }
            t.stored.clone()
        }
        FeatureMap::Identity { .. } => {
            MemoryStore::from_flat(store.dim(), store.len(), store.as_slice().to_vec())?
        }
        FeatureMap::MlpEncoder(m) => {
            let mut data = Vec::with_capacity(m.output_dim() * store.len());
            for col in store.columns() {
                data.extend(m.forward(col)?);
            }
            MemoryStore::from_flat(m.output_dim(), store.len(), data)?
        }
    };
    EmbeddingStore::new(matrix, map.id())
}

/// Scores `embed(query)` against `emb_store` and projects through the pixel
/// store.
pub fn semantic_retrieve(
    query: &DataVector,
    pixel_store: &MemoryStore,
    emb_store: &EmbeddingStore,
    map: &FeatureMap,
    kind: Similarity,
    sep: &Separation,
) -> Result<RetrievalResult> {
    check_pairing(pixel_store, emb_store)?;
    if query.len() != pixel_store.dim() {
        return Err(Error::DimensionMismatch {
            expected: pixel_store.dim(),
            actual: query.len(),
        });
    }
    let z = map.embed(query)?;
    retrieve_with_embedding(z.values(), pixel_store, emb_store, kind, sep)
}

fn check_pairing(pixel_store: &MemoryStore, emb_store: &EmbeddingStore) -> Result<()> {
    if pixel_store.len() != emb_store.len() {
        return Err(Error::DimensionMismatch {
            expected: pixel_store.len(),
            actual: emb_store.len(),
        });
    }
    Ok(())
}

fn retrieve_with_embedding(
    z: &[f64],
    pixel_store: &MemoryStore,
    emb_store: &EmbeddingStore,
    kind: Similarity,
    sep: &Separation,
) -> Result<RetrievalResult> {
    let scores = score_slice(z, emb_store.matrix(), kind)?;
    let weights = separate(&scores, sep)?;
    let vector = project(pixel_store, &weights)?;
    Ok(RetrievalResult {
        vector,
        top_index: argmax(&weights),
        weights,
        iterations: 1,
        converged: true,
    })
}

/// Semantic memory model: pixel-space store, embedding-space scores.
#[derive(Debug, Clone)]
pub struct SemanticMemory {
    pixels: MemoryStore,
    embeddings: EmbeddingStore,
    map: FeatureMap,
    normalize: bool,
}

impl SemanticMemory {
    pub fn new(pixels: MemoryStore, map: FeatureMap) -> Result<Self> {
        let embeddings = build_embedding_store(&map, &pixels)?;
        Self::from_parts(pixels, embeddings, map)
    }

    pub fn from_parts(pixels: MemoryStore, embeddings: EmbeddingStore, map: FeatureMap) -> Result<Self> {
        check_pairing(&pixels, &embeddings)?;
        if embeddings.dim() != map.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: map.output_dim(),
                actual: embeddings.dim(),
            });
        }
        Ok(Self {
            pixels,
            embeddings,
            map,
            normalize: false,
        })
    }

    /// Scales stored and query embeddings to unit norm before scoring.
    pub fn normalized(mut self) -> Result<Self> {
        if !self.normalize {
            self.embeddings = self.embeddings.l2_normalized()?;
            self.normalize = true;
        }
        Ok(self)
    }

    pub fn pixels(&self) -> &MemoryStore {
        &self.pixels
    }

    pub fn embeddings(&self) -> &EmbeddingStore {
        &self.embeddings
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }
}

impl AssociativeMemory for SemanticMemory {
    fn len(&self) -> usize {
        self.pixels.len()
    }

    fn score_dim(&self) -> usize {
        self.embeddings.dim()
    }

    fn encode_query(&self, query: &DataVector) -> Result<DataVector> {
        if query.len() != self.pixels.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.pixels.dim(),
                actual: query.len(),
            });
        }
        let z = self.map.embed(query)?;
        if self.normalize {
            let mut values = z.values().to_vec();
            normalize_in_place(&mut values)?;
            return Ok(z.replace_values(values));
        }
        Ok(z)
    }

    fn score_encoded(&self, encoded: &DataVector, kind: Similarity) -> Result<Vec<f64>> {
        score_slice(encoded.values(), self.embeddings.matrix(), kind)
    }

    fn retrieve_encoded(
        &self,
        encoded: &DataVector,
        kind: Similarity,
        sep: &Separation,
    ) -> Result<RetrievalResult> {
        retrieve_with_embedding(encoded.values(), &self.pixels, &self.embeddings, kind, sep)
    }
}
