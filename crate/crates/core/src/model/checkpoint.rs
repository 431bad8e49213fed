//! Checkpoint files: a text header followed by little-endian f32 blocks.
//!
//! ```text
//! AFFCKPT 1
//! dimension 512
//! hidden 512,512,512
//! seed 0
//! config epochs=150
//! ...
//! adapter_trainable true
//! loss_history 0.91,0.52,...
//! block adapter.weight 512x512
//! block adapter.bias 512
//! block head.0.weight 512x1024
//! ...
//! end
//! <raw f32 values of every block, in order>
//! ```

use std::path::Path;

use crate::config::KeyValues;
use crate::encoders::{Embedding, EmbeddingCache, TextEncoder, VisionAdapter};
use crate::error::{Error, Result};
use crate::geometry::GroundGaussian;
use crate::model::head::AffordanceHead;
use crate::model::train::{Network, TrainConfig};

const MAGIC: &str = "AFFCKPT 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub config: TrainConfig,
    /// Mean training distance per epoch, including any fine-tuning epochs.
    pub loss_history: Vec<f64>,
}

fn dims_label(dims: &[usize]) -> String {
    dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
}

impl Checkpoint {
    pub fn dimension(&self) -> usize {
        self.network.dim()
    }

    pub fn hidden(&self) -> &[usize] {
        self.network.head.hidden()
    }

    fn blocks(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let d = self.dimension();
        let a = self.network.adapter.params();
        let mut out = vec![
            ("adapter.weight".to_string(), vec![d, d], &a[..d * d]),
            ("adapter.bias".to_string(), vec![d], &a[d * d..]),
        ];
        let p = self.network.head.params();
        for (name, dims, range) in self.network.head.blocks() {
            out.push((name, dims, &p[range]));
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = format!("{MAGIC}\ndimension {}\n", self.dimension());
        header += &format!("hidden {}\n", self.hidden().iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","));
        header += &format!("seed {}\n", self.config.seed);
        for (k, v) in self.config.to_key_values().iter() {
            header += &format!("config {k}={v}\n");
        }
        header += &format!("adapter_trainable {}\n", self.network.adapter.trainable);
        header += &format!(
            "loss_history {}\n",
            self.loss_history.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
        );
        let blocks = self.blocks();
        for (name, dims, _) in &blocks {
            header += &format!("block {name} {}\n", dims_label(dims));
        }
        header += "end\n";
        let mut bytes = header.into_bytes();
        for (_, _, values) in &blocks {
            for v in *values {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut pos = 0;
        let mut lines = Vec::new();
        loop {
            let nl = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("header is not terminated by 'end'".into()))?;
            let line = std::str::from_utf8(&bytes[pos..pos + nl]).map_err(|_| bad("header is not UTF-8".into()))?;
            pos += nl + 1;
            if line == "end" {
                break;
            }
            lines.push(line);
        }
        if lines.first() != Some(&MAGIC) {
            return Err(bad(format!("missing {MAGIC:?} magic line")));
        }
        let mut dimension = None;
        let mut hidden = None;
        let mut trainable = None;
        let mut history = Vec::new();
        let mut config = KeyValues::default();
        let mut blocks = Vec::new();
        for line in &lines[1..] {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "dimension" => dimension = Some(rest.parse::<usize>().map_err(|e| bad(format!("dimension: {e}")))?),
                "hidden" => {
                    hidden = Some(
                        rest.split(',')
                            .map(|w| w.parse::<usize>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|e| bad(format!("hidden: {e}")))?,
                    )
                }
                "seed" => {}
                "config" => {
                    let (k, v) = rest.split_once('=').ok_or_else(|| bad(format!("bad config line {line:?}")))?;
                    config.set(k, v);
                }
                "adapter_trainable" => {
                    trainable = Some(rest.parse::<bool>().map_err(|e| bad(format!("adapter_trainable: {e}")))?)
                }
                "loss_history" if !rest.is_empty() => {
                    history = rest
                        .split(',')
                        .map(|v| v.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| bad(format!("loss_history: {e}")))?
                }
                "loss_history" => {}
                "block" => {
                    let (name, dims) = rest.split_once(' ').ok_or_else(|| bad(format!("bad block line {line:?}")))?;
                    let dims: Vec<usize> = dims
                        .split('x')
                        .map(|d| d.parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| bad(format!("block {name}: {e}")))?;
                    blocks.push((name.to_string(), dims));
                }
                other => return Err(bad(format!("unknown header field {other:?}"))),
            }
        }
        let dimension = dimension.ok_or_else(|| bad("missing dimension".into()))?;
        let hidden = hidden.ok_or_else(|| bad("missing hidden".into()))?;
        let config = TrainConfig::default().apply(&config)?;

        let payload = &bytes[pos..];
        if !payload.len().is_multiple_of(4) {
            return Err(bad(format!("payload of {} bytes is not a whole number of f32", payload.len())));
        }
        let values: Vec<f32> = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();

        // Rebuild a template to check block names and sizes.
        let template = Checkpoint {
            network: Network {
                adapter: VisionAdapter::identity(dimension),
                head: AffordanceHead::zeros(2 * dimension, &hidden),
            },
            config: config.clone(),
            loss_history: Vec::new(),
        };
        let expected: Vec<(String, Vec<usize>)> = template.blocks().into_iter().map(|(n, d, _)| (n, d)).collect();
        if expected != blocks {
            return Err(bad("block table does not match the declared architecture".into()));
        }
        let n_adapter = dimension * dimension + dimension;
        let n_head = template.network.head.param_count();
        if values.len() != n_adapter + n_head {
            return Err(bad(format!("expected {} parameters, found {}", n_adapter + n_head, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter".into()));
        }
        let adapter = VisionAdapter::from_params(
            dimension,
            values[..n_adapter].to_vec(),
            trainable.unwrap_or(config.adapter_trainable),
        )?;
        let head = AffordanceHead::from_params(2 * dimension, &hidden, values[n_adapter..].to_vec())?;
        Ok(Self { network: Network { adapter, head }, config, loss_history: history })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Ego-frame region for raw embeddings.
    pub fn predict_embeddings(&self, vision: &Embedding, text: &Embedding) -> Result<GroundGaussian> {
        self.network.predict(&vision.0, &text.0)
    }

    /// Ego-frame region for a cached image and a free-text query.
    pub fn predict(
        &self,
        image_key: &str,
        text: &str,
        vision_cache: &EmbeddingCache,
        text_encoder: &dyn TextEncoder,
    ) -> Result<GroundGaussian> {
        let v = vision_cache.get(image_key)?;
        let t = text_encoder.encode_text(text)?;
        self.predict_embeddings(v, &t)
    }
}
