use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::crop_patch;
use crate::codec::{quantize_map, serialize_map, Vocabulary};
use crate::error::Error;
use crate::model::{LineRecord, PatchFrame, Point2, VectorMap};
use crate::sampling::{reorder_lines, resample_map, SamplingConfig};

/// A ground-level frame passed along with a patch request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvRef {
    pub path: String,
    pub pose: Point2,
    pub heading_deg: f64,
}

/// Everything a generator sees for one patch.
#[derive(Clone, Debug, PartialEq)]
pub struct GenRequest {
    pub patch_id: usize,
    pub frame: PatchFrame,
    pub bev_image_ref: Option<String>,
    pub pv_refs: Option<Vec<PvRef>>,
    pub prompt_text: String,
    /// Rendered tokens of the border context, in patch-local coordinates.
    pub context_tokens: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GenResponse {
    /// Rendered tokens of the patch map.
    pub token_string: String,
    /// One row of class logits per emitted line.
    pub class_logits: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("generator timed out after {0:.1} s")]
    Timeout(f64),
    #[error("malformed generator response: {0}")]
    MalformedResponse(String),
    #[error("generator exited with {code:?}: {stderr}")]
    NonZeroExit { code: Option<i32>, stderr: String },
    #[error("generator response violates its contract: {0}")]
    InvariantViolation(String),
    #[error("generator i/o: {0}")]
    Io(String),
    #[error("generator failed: {0}")]
    Failed(String),
}

impl From<Error> for GeneratorError {
    fn from(e: Error) -> Self {
        GeneratorError::Failed(e.to_string())
    }
}

/// Produces a patch map for a request. Called from one thread at a time.
pub trait Generator {
    fn generate(&mut self, req: &GenRequest) -> Result<GenResponse, GeneratorError>;
}

impl<F> Generator for F
where
    F: FnMut(&GenRequest) -> Result<GenResponse, GeneratorError>,
{
    fn generate(&mut self, req: &GenRequest) -> Result<GenResponse, GeneratorError> {
        self(req)
    }
}

fn vocab_for(frame: &PatchFrame) -> Vocabulary {
    Vocabulary::new(frame.width_px.min(frame.height_px) - 1)
}

fn render(map: &VectorMap, vocab: &Vocabulary) -> Result<GenResponse, GeneratorError> {
    let map = quantize_map(map, vocab);
    let token_string = serialize_map(&map, vocab)?.into_rendered();
    Ok(GenResponse {
        token_string,
        class_logits: Some(vec![vec![1.0]; map.len()]),
    })
}

/// Crops the ground truth to the requested frame, resamples, reorders and
/// serializes it. Each line gets a single-class logit row, so every score is
/// exactly 1.
pub fn oracle_generate(req: &GenRequest, gt: &VectorMap, sampling: &SamplingConfig) -> Result<GenResponse, GeneratorError> {
    let crop = crop_patch(gt, &req.frame).lines;
    let map = reorder_lines(&resample_map(&crop, sampling)?);
    render(&map, &vocab_for(&req.frame))
}

/// Replays a ground-truth map.
#[derive(Clone, Debug)]
pub struct OracleGenerator {
    pub gt: VectorMap,
    pub sampling: SamplingConfig,
}

impl OracleGenerator {
    pub fn new(gt: VectorMap) -> Self {
        OracleGenerator {
            gt,
            sampling: SamplingConfig::default(),
        }
    }
}

impl Generator for OracleGenerator {
    fn generate(&mut self, req: &GenRequest) -> Result<GenResponse, GeneratorError> {
        oracle_generate(req, &self.gt, &self.sampling)
    }
}

/// Ground-truth replay with Gaussian point jitter and random line drops.
///
/// Randomness depends only on `(seed, patch_id)`. Jitter and drop decisions
/// come from separate streams, so runs that differ only in `sigma_px` share
/// drop decisions and the same unit noise.
#[derive(Clone, Debug)]
pub struct NoisyOracleGenerator {
    pub gt: VectorMap,
    pub sampling: SamplingConfig,
    pub sigma_px: f64,
    pub drop_prob: f64,
    pub seed: u64,
}

impl NoisyOracleGenerator {
    pub fn new(gt: VectorMap, sigma_px: f64, drop_prob: f64, seed: u64) -> Self {
        NoisyOracleGenerator {
            gt,
            sampling: SamplingConfig::default(),
            sigma_px,
            drop_prob,
            seed,
        }
    }

    fn rng(&self, patch_id: usize, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (patch_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(stream);
        rng
    }
}

impl Generator for NoisyOracleGenerator {
    fn generate(&mut self, req: &GenRequest) -> Result<GenResponse, GeneratorError> {
        if !(self.sigma_px >= 0.0) || !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(GeneratorError::Failed(format!(
                "invalid noise parameters sigma={} drop={}",
                self.sigma_px, self.drop_prob
            )));
        }
        let crop = crop_patch(&self.gt, &req.frame).lines;
        let mut map = resample_map(&crop, &self.sampling)?;
        let mut jitter = self.rng(req.patch_id, 1);
        let mut drops = self.rng(req.patch_id, 2);
        let sigma = self.sigma_px;
        let mut kept = Vec::with_capacity(map.lines.len());
        for line in map.lines.drain(..) {
            let dropped = drops.random::<f64>() < self.drop_prob;
            let points = line
                .points
                .iter()
                .map(|p| {
                    let dx: f64 = jitter.sample(StandardNormal);
                    let dy: f64 = jitter.sample(StandardNormal);
                    Point2::new(p.x + sigma * dx, p.y + sigma * dy)
                })
                .collect();
            if !dropped {
                kept.push(LineRecord { points, ..line });
            }
        }
        map.lines = kept;
        render(&reorder_lines(&map), &vocab_for(&req.frame))
    }
}
