//! Embedding provision: key-value embedding caches, the trainable vision
//! adapter over frozen image embeddings, and deterministic mock encoders
//! used by the synthetic scenes.
//!
//! Binary cache layout (little-endian):
//!
//! ```text
//! magic   8 bytes  "AFFEMB1\0"
//! dim     u32
//! count   u64
//! count x { key_len u16, key utf-8 bytes, dim x f32 }
//! ```
//!
//! Entries are written in sorted key order. A JSON-lines form with one
//! `{"key": ..., "v": [...]}` record per line is also accepted on load.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scalar::Real;
use crate::seed::rng_for;

pub const CACHE_MAGIC: &[u8; 8] = b"AFFEMB1\0";

/// Fixed-dimension embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Vec<f32>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    /// Cosine similarity; zero when either vector is zero.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(&a, &b)| a as f64 * b as f64).sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            dot / denom
        }
    }

    pub fn from_f64(values: &[f64]) -> Self {
        Embedding(values.iter().map(|&v| v as f32).collect())
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn gaussian_vector(seed: u64, label: &str, dim: usize) -> Vec<f64> {
    let mut rng = rng_for(seed, label);
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingCache {
    dimension: usize,
    entries: BTreeMap<String, Embedding>,
}

impl EmbeddingCache {
    pub fn new(dimension: usize) -> Self {
        Self { dimension, entries: BTreeMap::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, key: impl Into<String>, embedding: Embedding) -> Result<()> {
        let key = key.into();
        if embedding.dim() != self.dimension {
            return Err(Error::Shape { expected: self.dimension, actual: embedding.dim() });
        }
        if embedding.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::CacheFormat(format!("non-finite value for key {key:?}")));
        }
        self.entries.insert(key, embedding);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<&Embedding> {
        self.entries.get(key).ok_or_else(|| Error::MissingEmbedding(key.to_string()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Embedding)> {
        self.entries.iter()
    }

    /// Encodes the cache in the binary layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dim = u32::try_from(self.dimension).map_err(|_| Error::CacheFormat("dimension exceeds u32".into()))?;
        let mut out = Vec::with_capacity(20 + self.entries.len() * (8 + 4 * self.dimension));
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (key, emb) in &self.entries {
            let len = u16::try_from(key.len())
                .map_err(|_| Error::CacheFormat(format!("key too long: {} bytes", key.len())))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(key.as_bytes());
            for v in &emb.0 {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = ByteReader { bytes, pos: 0 };
        if reader.take(8)? != CACHE_MAGIC {
            return Err(Error::CacheFormat("magic mismatch".into()));
        }
        let dim = u32::from_le_bytes(reader.take(4)?.try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(reader.take(8)?.try_into().unwrap());
        let mut cache = EmbeddingCache::new(dim);
        for i in 0..count {
            let len = u16::from_le_bytes(reader.take(2)?.try_into().unwrap()) as usize;
            let key = std::str::from_utf8(reader.take(len)?)
                .map_err(|_| Error::CacheFormat(format!("entry {i}: key is not utf-8")))?
                .to_string();
            let raw = reader.take(4 * dim)?;
            let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            if cache.contains(&key) {
                return Err(Error::CacheFormat(format!("duplicate key {key:?}")));
            }
            cache.insert(key, Embedding(values))?;
        }
        if reader.pos != bytes.len() {
            return Err(Error::CacheFormat(format!(
                "{} trailing bytes after {count} entries",
                bytes.len() - reader.pos
            )));
        }
        Ok(cache)
    }

    fn from_jsonl(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Record {
            key: String,
            v: Vec<f32>,
        }
        let mut cache: Option<EmbeddingCache> = None;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(line).map_err(|e| Error::CacheFormat(format!("line {}: {e}", lineno + 1)))?;
            let cache = cache.get_or_insert_with(|| EmbeddingCache::new(rec.v.len()));
            if cache.contains(&rec.key) {
                return Err(Error::CacheFormat(format!("line {}: duplicate key {:?}", lineno + 1, rec.key)));
            }
            cache
                .insert(rec.key, Embedding(rec.v))
                .map_err(|e| Error::CacheFormat(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cache.unwrap_or_default())
    }

    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            key: &'a str,
            v: &'a [f32],
        }
        let mut out = String::new();
        for (key, emb) in &self.entries {
            out.push_str(&serde_json::to_string(&Record { key, v: &emb.0 }).unwrap());
            out.push('\n');
        }
        out
    }

    /// Order-independent checksum over keys and value bits.
    pub fn checksum(&self) -> u64 {
        // FNV-1a over the canonical byte encoding
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.to_bytes().unwrap_or_default() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::CacheFormat(format!(
                "truncated: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }
}

pub fn load_cache(path: impl AsRef<Path>) -> Result<EmbeddingCache> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(CACHE_MAGIC) {
        return EmbeddingCache::from_bytes(&bytes);
    }
    match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'{') => {
            let text =
                std::str::from_utf8(&bytes).map_err(|_| Error::CacheFormat("jsonl cache is not utf-8".into()))?;
            EmbeddingCache::from_jsonl(text)
        }
        _ => Err(Error::CacheFormat("magic mismatch".into())),
    }
}

pub fn save_cache(cache: &EmbeddingCache, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = cache.to_bytes()?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Source of frozen language embeddings.
pub trait TextEncoder {
    fn dimension(&self) -> usize;
    fn encode_text(&self, query: &str) -> Result<Embedding>;
}

impl TextEncoder for EmbeddingCache {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn encode_text(&self, query: &str) -> Result<Embedding> {
        self.get(query).cloned()
    }
}

/// Affine map `weight * e + bias` over frozen image embeddings. Parameters
/// are stored flat: the `dim x dim` weight in row-major order, then the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct VisionAdapter<T: Real = f32> {
    dim: usize,
    params: Vec<T>,
    pub trainable: bool,
}

impl<T: Real> VisionAdapter<T> {
    pub fn identity(dim: usize) -> Self {
        let mut params = vec![T::zero(); dim * dim + dim];
        for i in 0..dim {
            params[i * dim + i] = T::one();
        }
        Self { dim, params, trainable: false }
    }

    pub fn from_params(dim: usize, params: Vec<T>, trainable: bool) -> Result<Self> {
        if params.len() != dim * dim + dim {
            return Err(Error::Shape { expected: dim * dim + dim, actual: params.len() });
        }
        Ok(Self { dim, params, trainable })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn weight(&self) -> ndarray::ArrayView2<'_, T> {
        ndarray::ArrayView2::from_shape((self.dim, self.dim), &self.params[..self.dim * self.dim])
            .expect("adapter weight shape")
    }

    pub fn bias(&self) -> &[T] {
        &self.params[self.dim * self.dim..]
    }

    pub fn apply(&self, input: &[T]) -> Result<Vec<T>> {
        if input.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, actual: input.len() });
        }
        let w = self.weight();
        Ok(w.rows()
            .into_iter()
            .zip(self.bias())
            .map(|(row, &b)| row.iter().zip(input).fold(b, |acc, (&wi, &xi)| acc + wi * xi))
            .collect())
    }

    pub fn cast<U: Real>(&self) -> VisionAdapter<U> {
        VisionAdapter {
            dim: self.dim,
            params: self.params.iter().map(|v| U::of(v.to_f64_lossless())).collect(),
            trainable: self.trainable,
        }
    }
}

/// Image embedding through the adapter. With an identity adapter this is
/// exactly the cached vector.
pub fn encode_image(image_key: &str, cache: &EmbeddingCache, adapter: &VisionAdapter<f32>) -> Result<Embedding> {
    let raw = cache.get(image_key)?;
    Ok(Embedding(adapter.apply(&raw.0)?))
}

/// Mock language encoder: every canonical string maps to a seeded unit
/// vector; rephrasings perturb the canonical vector with isotropic noise of
/// per-component standard deviation `noise` and renormalize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockTextEncoder {
    pub seed: u64,
    pub dim: usize,
    pub noise: f64,
}

impl MockTextEncoder {
    pub const DEFAULT_NOISE: f64 = 0.01;

    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim, noise: Self::DEFAULT_NOISE }
    }

    pub fn canonical_f64(&self, text: &str) -> Vec<f64> {
        normalize(gaussian_vector(self.seed, &format!("text:{text}"), self.dim))
    }

    /// Perturbs `base` with noise seeded by `phrase`.
    pub fn perturb(&self, base: &[f64], phrase: &str) -> Vec<f64> {
        let noise = gaussian_vector(self.seed, &format!("rephrase:{phrase}"), self.dim);
        normalize(base.iter().zip(noise).map(|(b, n)| b + self.noise * n).collect())
    }

    pub fn rephrased(&self, canonical: &str, phrase: &str) -> Embedding {
        Embedding::from_f64(&self.perturb(&self.canonical_f64(canonical), phrase))
    }
}

impl TextEncoder for MockTextEncoder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn encode_text(&self, query: &str) -> Result<Embedding> {
        Ok(Embedding::from_f64(&self.canonical_f64(query)))
    }
}

/// Field of view half-angle used by the mock vision encoder.
pub const MOCK_FOV_HALF_ANGLE: f64 = PI / 3.0;
const POSE_WAVELENGTHS: [f64; 4] = [8.0, 4.0, 2.0, 1.0];
const POSE_FEATURES: usize = 4 * POSE_WAVELENGTHS.len() + 4;

/// Mock vision encoder for synthetic scenes. An embedding is a fixed random
/// projection of the concatenation of
/// - the appearance mixture of the stations in view, and
/// - a sinusoidal encoding of the viewer's `(x, y, yaw)`.
#[derive(Debug, Clone)]
pub struct MockVisionEncoder {
    dim: usize,
    appearance_dim: usize,
    projection: Vec<f64>,
    /// Norm of the pose encoding relative to a pure appearance vector.
    pub pose_weight: f64,
}

impl MockVisionEncoder {
    pub fn new(seed: u64, dim: usize, appearance_dim: usize) -> Self {
        let input = appearance_dim + POSE_FEATURES;
        let scale = 1.0 / (input as f64).sqrt();
        let projection =
            gaussian_vector(seed, "vision-projection", dim * input).into_iter().map(|v| v * scale).collect();
        Self { dim, appearance_dim, projection, pose_weight: 1.0 }
    }

    pub fn with_pose_weight(mut self, pose_weight: f64) -> Self {
        self.pose_weight = pose_weight;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn appearance_dim(&self) -> usize {
        self.appearance_dim
    }

    /// Seeded unit appearance vector for a station.
    pub fn appearance(&self, appearance_seed: u64) -> Vec<f64> {
        normalize(gaussian_vector(appearance_seed, "appearance", self.appearance_dim))
    }

    fn project(&self, input: &[f64]) -> Vec<f64> {
        let cols = self.appearance_dim + POSE_FEATURES;
        (0..self.dim)
            .map(|r| self.projection[r * cols..(r + 1) * cols].iter().zip(input).map(|(p, x)| p * x).sum())
            .collect()
    }

    /// Unit direction that an appearance vector occupies in embedding space.
    pub fn appearance_direction(&self, appearance: &[f64]) -> Vec<f64> {
        let mut input = appearance.to_vec();
        input.resize(self.appearance_dim + POSE_FEATURES, 0.0);
        normalize(self.project(&input))
    }

    pub fn encode(&self, mixture: &[f64], x: f64, y: f64, yaw: f64) -> Embedding {
        debug_assert_eq!(mixture.len(), self.appearance_dim);
        let mut input = Vec::with_capacity(self.appearance_dim + POSE_FEATURES);
        input.extend_from_slice(mixture);
        let scale = self.pose_weight / ((POSE_FEATURES / 2) as f64).sqrt();
        for wavelength in POSE_WAVELENGTHS {
            let k = 2.0 * PI / wavelength;
            input.extend([(k * x).sin() * scale, (k * x).cos() * scale, (k * y).sin() * scale, (k * y).cos() * scale]);
        }
        input.extend([yaw.sin() * scale, yaw.cos() * scale, (2.0 * yaw).sin() * scale, (2.0 * yaw).cos() * scale]);
        Embedding::from_f64(&self.project(&input))
    }
}

/// Appearance mixture seen from `(position, yaw)`. Each station within the
/// field of view contributes its appearance with weight
/// `cos(bearing) / (1 + distance)`; weights are normalized to sum to one.
/// Returns zeros when nothing is in view.
pub fn appearance_mixture(position: Vec2, yaw: f64, stations: &[(Vec2, &[f64])], appearance_dim: usize) -> Vec<f64> {
    let mut mixture = vec![0.0; appearance_dim];
    let mut total = 0.0;
    for (anchor, appearance) in stations {
        let offset = anchor - position;
        let distance = offset.norm();
        let bearing = if distance == 0.0 { 0.0 } else { crate::geometry::wrap_angle(offset.y.atan2(offset.x) - yaw) };
        if bearing.abs() > MOCK_FOV_HALF_ANGLE {
            continue;
        }
        let w = bearing.cos() / (1.0 + distance);
        total += w;
        mixture.iter_mut().zip(appearance.iter()).for_each(|(m, a)| *m += w * a);
    }
    if total > 0.0 {
        mixture.iter_mut().for_each(|m| *m /= total);
    }
    mixture
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn sample_cache() -> EmbeddingCache {
        let mut c = EmbeddingCache::new(3);
        c.insert("frame-000", Embedding(vec![1.0, -2.5, 0.125])).unwrap();
        c.insert("heat the skillet", Embedding(vec![0.0, 1e-7, -3.0])).unwrap();
        c
    }

    #[test]
    fn binary_roundtrip_via_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.cache");
        let c = sample_cache();
        save_cache(&c, &path).unwrap();
        assert_eq!(load_cache(&path).unwrap(), c);
    }

    #[test]
    fn binary_layout_is_exact() {
        let mut c = EmbeddingCache::new(2);
        c.insert("ab", Embedding(vec![1.0, -1.0])).unwrap();
        let bytes = c.to_bytes().unwrap();
        let mut expected = b"AFFEMB1\0".to_vec();
        expected.extend([2, 0, 0, 0]);
        expected.extend([1, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend([2, 0, b'a', b'b']);
        expected.extend(1.0f32.to_le_bytes());
        expected.extend((-1.0f32).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn truncated_and_bad_magic_are_rejected() {
        let bytes = sample_cache().to_bytes().unwrap();
        for cut in [3, 12, 19, bytes.len() - 1] {
            assert!(matches!(EmbeddingCache::from_bytes(&bytes[..cut]), Err(Error::CacheFormat(_))));
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(EmbeddingCache::from_bytes(&bad), Err(Error::CacheFormat(_))));
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let mut c = EmbeddingCache::new(1);
        c.insert("k", Embedding(vec![1.0])).unwrap();
        let mut bytes = c.to_bytes().unwrap();
        bytes[12] = 2; // count
        bytes.extend([1, 0, b'k']);
        bytes.extend(2.0f32.to_le_bytes());
        let err = EmbeddingCache::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn empty_cache_is_valid() {
        let c = EmbeddingCache::new(512);
        let loaded = EmbeddingCache::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(loaded.len(), 0);
        assert_eq!(loaded.dimension(), 512);
    }

    #[test]
    fn jsonl_fixture_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        fs::write(&path, sample_cache().to_jsonl()).unwrap();
        assert_eq!(load_cache(&path).unwrap(), sample_cache());
        fs::write(&path, "{\"key\":\"a\",\"v\":[1]}\n{\"key\":\"a\",\"v\":[2]}\n").unwrap();
        assert!(load_cache(&path).is_err());
    }

    #[test]
    fn missing_key_names_the_key() {
        let err = sample_cache().encode_text("wash the dishes").unwrap_err();
        assert!(matches!(err, Error::MissingEmbedding(ref k) if k == "wash the dishes"));
    }

    #[test]
    fn text_encoding_is_deterministic() {
        let c = sample_cache();
        let a = c.encode_text("heat the skillet").unwrap();
        let b = c.encode_text("heat the skillet").unwrap();
        assert_eq!(a, b);
        let m = MockTextEncoder::new(3, 64);
        let x = m.encode_text("s0-t1").unwrap();
        assert_eq!(x, m.encode_text("s0-t1").unwrap());
        assert!((x.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mock_rephrasings_stay_close() {
        for seed in 0..100 {
            let m = MockTextEncoder::new(seed, 64);
            let canonical = m.encode_text("s1-t4").unwrap();
            let r = m.rephrased("s1-t4", &format!("please do task four ({seed})"));
            assert!(canonical.cosine(&r) >= 0.99, "seed {seed}: {}", canonical.cosine(&r));
        }
    }

    #[test]
    fn identity_adapter_returns_raw_embedding() {
        let c = sample_cache();
        let adapter = VisionAdapter::identity(3);
        assert_eq!(encode_image("frame-000", &c, &adapter).unwrap(), *c.get("frame-000").unwrap());
        assert!(matches!(encode_image("nope", &c, &adapter), Err(Error::MissingEmbedding(_))));
    }

    #[test]
    fn zero_weight_adapter_returns_bias() {
        let c = sample_cache();
        let adapter =
            VisionAdapter::from_params(3, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, -1.0, 2.0], true)
                .unwrap();
        for key in ["frame-000", "heat the skillet"] {
            assert_eq!(encode_image(key, &c, &adapter).unwrap().0, vec![0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn adapter_weight_gradient_matches_finite_differences() {
        let dim = 4;
        let mut rng = rng_for(11, "adapter-grad");
        let params: Vec<f64> = (0..dim * dim + dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let input: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let adapter = VisionAdapter::from_params(dim, params, true).unwrap();
        let h = 1e-4;
        for out in 0..dim {
            for p in 0..dim * dim {
                // analytic: d out_r / d W[r][c] = input[c] when r == out
                let (r, c) = (p / dim, p % dim);
                let analytic = if r == out { input[c] } else { 0.0 };
                let mut plus = adapter.clone();
                plus.params_mut()[p] += h;
                let mut minus = adapter.clone();
                minus.params_mut()[p] -= h;
                let numeric = (plus.apply(&input).unwrap()[out] - minus.apply(&input).unwrap()[out]) / (2.0 * h);
                let scale = analytic.abs().max(numeric.abs()).max(1e-12);
                assert!((analytic - numeric).abs() / scale < 1e-5 || (analytic - numeric).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixture_respects_field_of_view() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let stations = [(Vec2::new(2.0, 0.0), &a[..]), (Vec2::new(-2.0, 0.0), &b[..])];
        let m = appearance_mixture(Vec2::zeros(), 0.0, &stations, 2);
        assert_eq!(m, vec![1.0, 0.0]);
        let m = appearance_mixture(Vec2::zeros(), PI / 2.0, &stations, 2);
        assert_eq!(m, vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn cache_bytes_roundtrip(entries in proptest::collection::btree_map(
            "[a-z0-9 ]{0,12}", proptest::collection::vec(-1e3f32..1e3, 5), 0..20)
        ) {
            let mut c = EmbeddingCache::new(5);
            for (k, v) in entries {
                c.insert(k, Embedding(v)).unwrap();
            }
            prop_assert_eq!(EmbeddingCache::from_bytes(&c.to_bytes().unwrap()).unwrap(), c);
        }

        #[test]
        fn mock_encoders_are_pure(seed in 0u64..1000, text in "[a-z ]{1,20}") {
            let m = MockTextEncoder::new(seed, 16);
            prop_assert_eq!(m.encode_text(&text).unwrap(), m.encode_text(&text).unwrap());
            let v = MockVisionEncoder::new(seed, 16, 8);
            let mix = v.appearance(seed);
            prop_assert_eq!(v.encode(&mix, 1.0, 2.0, 0.3), v.encode(&mix, 1.0, 2.0, 0.3));
        }
    }
}
