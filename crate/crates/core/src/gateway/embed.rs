use super::EmbedError;

/// Maps texts to unit vectors; empty texts map to the zero vector.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;

    /// Tokens charged for an embedding call. Defaults to `ceil(chars / 4)`.
    fn token_estimate(&self, texts: &[String]) -> u64 {
        let chars: usize = texts.iter().map(|t| t.chars().count()).sum();
        (chars as u64).div_ceil(4)
    }
}

pub const HASH_V1_DIM: usize = 16;

/// Deterministic bag-of-tokens embedder (`hash-v1`).
///
/// Lowercase the text, split on whitespace, add 1.0 at index
/// `(sum of the token's UTF-8 bytes) mod 16` for every token, then
/// L2-normalize.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashEmbedder;

impl HashEmbedder {
    pub fn embed_one(text: &str) -> Vec<f64> {
        let mut v = vec![0.0; HASH_V1_DIM];
        for token in text.to_lowercase().split_whitespace() {
            let sum: u64 = token.bytes().map(u64::from).sum();
            v[(sum % HASH_V1_DIM as u64) as usize] += 1.0;
        }
        normalize(&mut v);
        v
    }
}

impl Embedder for HashEmbedder {
    fn name(&self) -> &str {
        "hash-v1"
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| Self::embed_one(t)).collect())
    }

    /// Local computation; no model tokens are consumed.
    fn token_estimate(&self, _texts: &[String]) -> u64 {
        0
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `v` to unit length in place; the zero vector is left unchanged.
pub fn normalize(v: &mut [f64]) {
    let norm = l2_norm(v);
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// `dot(a, b) / (|a| * |b|)` with sums taken in index order; 0 when either
/// vector is zero or the dimensions differ.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}
