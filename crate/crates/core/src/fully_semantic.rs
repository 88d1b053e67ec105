//! Fully-semantic memory: only embeddings are stored, outputs are generated.
//!
//! Retrieval runs a universal Hopfield network on `φ(D)` and decodes the
//! projected embedding: `μ = ψ ∘ π_φ(D) ∘ α ∘ κ_φ(D) ∘ φ`.

use crate::error::{Error, Result};
use crate::features::{EmbeddingStore, FeatureMap};
use crate::memory::{
    argmax, project_slice, score_slice, separate, AssociativeMemory, RetrievalResult, Separation, Similarity,
};
use crate::nn::Mlp;
use crate::vector::{DataVector, Shape};

/// Generative map `ψ: R^e → R^d`.
#[derive(Debug, Clone, PartialEq)]
pub enum GenerativeMap {
    Identity { dim: usize },
    MlpDecoder(Mlp),
}

impl GenerativeMap {
    pub fn input_dim(&self) -> usize {
        match self {
            GenerativeMap::Identity { dim } => *dim,
            GenerativeMap::MlpDecoder(m) => m.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            GenerativeMap::Identity { dim } => *dim,
            GenerativeMap::MlpDecoder(m) => m.output_dim(),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            GenerativeMap::Identity { .. } => 0,
            GenerativeMap::MlpDecoder(m) => m.num_params(),
        }
    }

    pub fn generate(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: z.len(),
            });
        }
        match self {
            GenerativeMap::Identity { .. } => Ok(z.to_vec()),
            GenerativeMap::MlpDecoder(m) => m.forward(z),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FullySemanticMemory {
    embeddings: EmbeddingStore,
    encoder: FeatureMap,
    decoder: GenerativeMap,
    shape: Option<Shape>,
}

impl FullySemanticMemory {
    pub fn new(embeddings: EmbeddingStore, encoder: FeatureMap, decoder: GenerativeMap) -> Result<Self> {
        if encoder.output_dim() != embeddings.dim() {
            return Err(Error::DimensionMismatch {
                expected: embeddings.dim(),
                actual: encoder.output_dim(),
            });
        }
        if decoder.input_dim() != embeddings.dim() {
            return Err(Error::DimensionMismatch {
                expected: embeddings.dim(),
                actual: decoder.input_dim(),
            });
        }
        if encoder.input_dim() != decoder.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: encoder.input_dim(),
                actual: decoder.output_dim(),
            });
        }
        Ok(Self {
            embeddings,
            encoder,
            decoder,
            shape: None,
        })
    }

    /// Tags generated outputs with an image layout.
    pub fn with_shape(mut self, shape: Shape) -> Result<Self> {
        if shape.len() != self.decoder.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.decoder.output_dim(),
                actual: shape.len(),
            });
        }
        self.shape = Some(shape);
        Ok(self)
    }

    pub fn embeddings(&self) -> &EmbeddingStore {
        &self.embeddings
    }

    pub fn encoder(&self) -> &FeatureMap {
        &self.encoder
    }

    pub fn decoder(&self) -> &GenerativeMap {
        &self.decoder
    }

    /// Same memory with a different generative map.
    pub fn with_decoder(&self, decoder: GenerativeMap) -> Result<Self> {
        let mem = Self::new(self.embeddings.clone(), self.encoder.clone(), decoder)?;
        Ok(Self {
            shape: self.shape,
            ..mem
        })
    }

    fn wrap(&self, values: Vec<f64>) -> Result<DataVector> {
        match self.shape {
            Some(shape) => DataVector::with_shape(values, shape),
            None => DataVector::new(values),
        }
    }
}

/// Retrieval in embedding space followed by decoding.
pub fn fs_retrieve(
    query: &DataVector,
    mem: &FullySemanticMemory,
    kind: Similarity,
    sep: &Separation,
) -> Result<RetrievalResult> {
    mem.retrieve(query, kind, sep)
}

impl AssociativeMemory for FullySemanticMemory {
    fn len(&self) -> usize {
        self.embeddings.len()
    }

    fn score_dim(&self) -> usize {
        self.embeddings.dim()
    }

    fn encode_query(&self, query: &DataVector) -> Result<DataVector> {
        if query.len() != self.decoder.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.decoder.output_dim(),
                actual: query.len(),
            });
        }
        self.encoder.embed(query)
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
        let matrix = self.embeddings.matrix();
        let scores = self.score_encoded(encoded, kind)?;
        let weights = separate(&scores, sep)?;
        let z = project_slice(matrix, &weights)?;
        let vector = self.wrap(self.decoder.generate(&z)?)?;
        Ok(RetrievalResult {
            vector,
            top_index: argmax(&weights),
            weights,
            iterations: 1,
            converged: true,
        })
    }
}

/// Storage cost of a fully-semantic memory, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Footprint {
    pub embeddings: usize,
    pub encoder_params: usize,
    pub decoder_params: usize,
    pub total: usize,
}

/// Byte counts at `bytes_per_float` bytes per stored number.
pub fn memory_footprint(mem: &FullySemanticMemory, bytes_per_float: usize) -> Footprint {
    let embeddings = mem.embeddings.dim() * mem.embeddings.len() * bytes_per_float;
    let encoder_params = mem.encoder.num_params() * bytes_per_float;
    let decoder_params = mem.decoder.num_params() * bytes_per_float;
    Footprint {
        embeddings,
        encoder_params,
        decoder_params,
        total: embeddings + encoder_params + decoder_params,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_embedding_store;
    use crate::memory::{uhn_retrieve, MemoryStore};
    use crate::nn::Activation;

    fn store(n: usize, dim: usize) -> MemoryStore {
        let data = (0..n * dim)
            .map(|i| ((i * 37 % 17) as f64) / 17.0 + 0.01)
            .collect();
        MemoryStore::from_flat(dim, n, data).unwrap()
    }

    #[test]
    fn identity_maps_reduce_to_uhn() {
        let s = store(6, 4);
        let enc = FeatureMap::Identity { dim: 4 };
        let e = build_embedding_store(&enc, &s).unwrap();
        let mem = FullySemanticMemory::new(e, enc, GenerativeMap::Identity { dim: 4 }).unwrap();
        let q = DataVector::new(vec![0.3, 0.9, 0.1, 0.5]).unwrap();
        for sep in [Separation::Max, Separation::Softmax { beta: 2.0 }] {
            let a = fs_retrieve(&q, &mem, Similarity::Cosine, &sep).unwrap();
            let b = uhn_retrieve(&q, &s, Similarity::Cosine, &sep).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn one_hot_output_is_decoded_embedding() {
        let s = store(5, 6);
        let mut m = Mlp::zeros(&[3, 6], &[Activation::Sigmoid]).unwrap();
        m.params_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, p)| *p = (i as f64 * 0.37).sin());
        let dec = GenerativeMap::MlpDecoder(m);
        let mut em = Mlp::zeros(&[6, 3], &[Activation::Linear]).unwrap();
        em.params_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, p)| *p = (i as f64 * 0.11).cos());
        let enc = FeatureMap::MlpEncoder(em);
        let e = build_embedding_store(&enc, &s).unwrap();
        let mem = FullySemanticMemory::new(e.clone(), enc, dec.clone()).unwrap();
        let q = s.item(2);
        let r = fs_retrieve(&q, &mem, Similarity::NegL2, &Separation::Max).unwrap();
        assert_eq!(r.top_index, 2);
        assert_eq!(
            r.vector.values(),
            dec.generate(e.matrix().column(2)).unwrap().as_slice()
        );
    }

    #[test]
    fn footprint_arithmetic() {
        let e = EmbeddingStore::new(
            MemoryStore::from_flat(12, 10_000, vec![0.5; 120_000]).unwrap(),
            "test",
        )
        .unwrap();
        let enc = FeatureMap::ExternalTable(
            crate::features::ExternalTable::new(12, e.matrix().clone(), None, "t").unwrap(),
        );
        let mem = FullySemanticMemory::new(e, enc, GenerativeMap::Identity { dim: 12 }).unwrap();
        let fp = memory_footprint(&mem, 4);
        assert_eq!(fp.embeddings, 480_000);
        assert_eq!(fp.encoder_params, 0);
        assert_eq!(fp.decoder_params, 0);
        assert_eq!(fp.total, 480_000);
    }

    #[test]
    fn dimension_checks() {
        let s = store(3, 4);
        let enc = FeatureMap::Identity { dim: 4 };
        let e = build_embedding_store(&enc, &s).unwrap();
        assert!(
            FullySemanticMemory::new(e.clone(), enc.clone(), GenerativeMap::Identity { dim: 3 }).is_err()
        );
        let mem = FullySemanticMemory::new(e, enc, GenerativeMap::Identity { dim: 4 }).unwrap();
        let q = DataVector::new(vec![1.0; 5]).unwrap();
        assert!(fs_retrieve(&q, &mem, Similarity::Dot, &Separation::Max).is_err());
    }
}
