//! Whole-scene nearest-neighbour baseline: retrieve the frame whose image
//! embedding best matches the task text and predict the viewer's position.

use crate::dataset::PreparedVideo;
use crate::encoders::{Embedding, EmbeddingCache, TextEncoder};
use crate::error::{Error, Result};
use crate::geometry::{GravityAlignedPose, GroundGaussian};

/// Raw frame embeddings, frame poses and the mean task sigma of one scene.
#[derive(Debug, Clone)]
pub struct SceneIndex {
    pub scene_id: String,
    /// Unit-normalized frame embeddings in f64 (zero vectors stay zero).
    units: Vec<Vec<f64>>,
    pub poses: Vec<GravityAlignedPose>,
    pub sigma: f64,
}

fn unit(values: &[f32]) -> Vec<f64> {
    let norm = values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    if norm == 0.0 {
        vec![0.0; values.len()]
    } else {
        values.iter().map(|&v| v as f64 / norm).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SceneIndex {
    pub fn new(
        scene_id: impl Into<String>,
        embeddings: &[Embedding],
        poses: Vec<GravityAlignedPose>,
        task_sigmas: &[f64],
    ) -> Result<Self> {
        if embeddings.is_empty() || task_sigmas.is_empty() {
            return Err(Error::EmptyScene);
        }
        if embeddings.len() != poses.len() {
            return Err(Error::Shape { expected: poses.len(), actual: embeddings.len() });
        }
        Ok(Self {
            scene_id: scene_id.into(),
            units: embeddings.iter().map(|e| unit(&e.0)).collect(),
            poses,
            sigma: task_sigmas.iter().sum::<f64>() / task_sigmas.len() as f64,
        })
    }

    /// Indexes every frame of the video, filtered or not.
    pub fn build(prepared: &PreparedVideo, vision: &EmbeddingCache) -> Result<Self> {
        let embeddings: Vec<Embedding> =
            prepared.video.frames.iter().map(|f| vision.get(&f.image_key).cloned()).collect::<Result<_>>()?;
        let sigmas: Vec<f64> = prepared.regions.values().map(|r| r.region.sigma).collect();
        Self::new(&prepared.video.scene_id, &embeddings, prepared.aligned.clone(), &sigmas)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Frame position with the highest cosine similarity; ties go to the
    /// lowest position.
    pub fn best_frame(&self, query: &Embedding) -> usize {
        let q = unit(&query.0);
        let mut best = (0, f64::NEG_INFINITY);
        for (i, u) in self.units.iter().enumerate() {
            let c = dot(u, &q);
            if c > best.1 {
                best = (i, c);
            }
        }
        best.0
    }

    /// World-frame region for a query embedding.
    pub fn predict_embedding(&self, query: &Embedding) -> GroundGaussian {
        let c = self.best_frame(query);
        GroundGaussian::new(self.poses[c].position, self.sigma)
    }
}

/// World-frame baseline prediction for a text query.
pub fn baseline_predict(index: &SceneIndex, query: &str, text: &dyn TextEncoder) -> Result<GroundGaussian> {
    if index.is_empty() {
        return Err(Error::EmptyScene);
    }
    Ok(index.predict_embedding(&text.encode_text(query)?))
}

/// Candidate with the highest cosine similarity to the image; ties go to the
/// first candidate.
pub fn baseline_ground(image: &Embedding, candidates: &[Embedding]) -> usize {
    let v = unit(&image.0);
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let s = dot(&unit(&c.0), &v);
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::seed::rng_for;
    use proptest::prelude::*;
    use rand::Rng;

    fn pose(x: f64) -> GravityAlignedPose {
        GravityAlignedPose::new(Vec3::new(x, 0.0, 1.5), 0.0)
    }

    #[test]
    fn retrieves_the_aligned_frame() {
        let idx = SceneIndex::new(
            "s",
            &[Embedding(vec![1.0, 0.0]), Embedding(vec![0.0, 1.0])],
            vec![pose(1.0), pose(2.0)],
            &[0.1, 0.3],
        )
        .unwrap();
        let g = idx.predict_embedding(&Embedding(vec![0.0, 1.0]));
        assert_eq!(g.mean, Vec3::new(2.0, 0.0, 1.5));
        assert!((g.sigma - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_the_lowest_frame() {
        let mut embs = vec![Embedding(vec![0.0, 1.0]); 10];
        embs[3] = Embedding(vec![1.0, 0.0]);
        embs[7] = Embedding(vec![1.0, 0.0]);
        let idx = SceneIndex::new("s", &embs, (0..10).map(|i| pose(i as f64)).collect(), &[0.1]).unwrap();
        assert_eq!(idx.best_frame(&Embedding(vec![1.0, 0.0])), 3);
    }

    #[test]
    fn empty_scene_is_an_error() {
        assert!(matches!(SceneIndex::new("s", &[], vec![], &[0.1]), Err(Error::EmptyScene)));
    }

    #[test]
    fn grounding_picks_collinear_candidate_and_first_on_ties() {
        let image = Embedding(vec![1.0, 1.0, 0.0]);
        let c = [Embedding(vec![0.0, 0.0, 1.0]), Embedding(vec![2.0, 2.0, 0.0]), Embedding(vec![1.0, -1.0, 0.0])];
        assert_eq!(baseline_ground(&image, &c), 1);
        let same = vec![Embedding(vec![0.3, 0.1, 0.2]); 3];
        assert_eq!(baseline_ground(&image, &same), 0);
    }

    #[test]
    fn random_candidates_are_chosen_uniformly() {
        let mut rng = rng_for(0, "ground-uniform");
        let mut counts = [0usize; 3];
        let trials = 3000;
        let random_unit =
            |rng: &mut rand_chacha::ChaCha8Rng| Embedding((0..16).map(|_| rng.gen_range(-1.0f32..1.0)).collect());
        for _ in 0..trials {
            let image = random_unit(&mut rng);
            let c: Vec<Embedding> = (0..3).map(|_| random_unit(&mut rng)).collect();
            counts[baseline_ground(&image, &c)] += 1;
        }
        for c in counts {
            let f = c as f64 / trials as f64;
            assert!((f - 1.0 / 3.0).abs() <= 0.05, "fraction {f}");
        }
    }

    proptest! {
        #[test]
        fn argmax_is_scale_invariant(
            values in proptest::collection::vec(-1.0f32..1.0, 24),
            scales in proptest::collection::vec(0.1f32..10.0, 6),
            q in proptest::collection::vec(-1.0f32..1.0, 4),
        ) {
            let embs: Vec<Embedding> = values.chunks(4).map(|c| Embedding(c.to_vec())).collect();
            let scaled: Vec<Embedding> = embs
                .iter()
                .zip(&scales)
                .map(|(e, s)| Embedding(e.0.iter().map(|v| v * s).collect()))
                .collect();
            let poses: Vec<_> = (0..6).map(|i| pose(i as f64)).collect();
            let a = SceneIndex::new("s", &embs, poses.clone(), &[0.1]).unwrap();
            let b = SceneIndex::new("s", &scaled, poses, &[0.1]).unwrap();
            let query = Embedding(q.clone());
            let query_scaled = Embedding(q.iter().map(|v| v * 3.0).collect());
            prop_assert_eq!(a.best_frame(&query), b.best_frame(&query_scaled));
            prop_assert_eq!(baseline_ground(&query, &embs), baseline_ground(&query_scaled, &scaled));
        }
    }
}
