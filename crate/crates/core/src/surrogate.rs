//! Deterministic synthetic stand-in for a diffusion pipeline + object detector.
//!
//! Time is affine in inference steps with a small multiplicative jitter. Quality is a sum of
//! shaped terms, clamped to `[0, 1]`:
//!
//! ```text
//! quality = base
//!         + steps_gain    * (1 - exp(-steps / steps_scale))          saturating
//!         + rescale_gain  * bump(rescale; rescale_peak, 0..1)         concave, peak inside (0, 1)
//!         + guidance_gain * bump(guidance_scale; guidance_peak, 1..20)
//!         + positive_token_bonus * |selected positive tokens|
//!         + negative_token_bonus * |selected negative tokens|
//!         + noise,    noise ~ Uniform(-sqrt(3) sd, +sqrt(3) sd)
//! ```
//!
//! where `bump(x; peak, lo..hi) = max(0, 1 - ((x - peak) / w)^2)` with `w` the larger distance
//! from the peak to a bound. Jitter and noise are hashes of the candidate's cache key and
//! `noise_seed`, so the model is a pure function and safe to evaluate in parallel.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::evaluation::{EvalRequest, EvalResult, Evaluator};
use crate::nsga2::ObjectiveVector;
use crate::search_space::{
    Candidate, ParamKind, SearchSpace, GUIDANCE_RESCALE, GUIDANCE_SCALE, INFERENCE_STEPS, NEGATIVE_PROMPT,
    POSITIVE_PROMPT, SEED,
};
use crate::seed::{fnv1a, splitmix64, unit_interval};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SurrogateConfig {
    pub noise_seed: u64,
    pub time_base_ms: f64,
    pub time_per_step_ms: f64,
    /// Relative half-width of the time jitter.
    pub time_jitter: f64,
    pub quality_base: f64,
    pub steps_gain: f64,
    pub steps_scale: f64,
    pub rescale_gain: f64,
    pub rescale_peak: f64,
    pub guidance_gain: f64,
    pub guidance_peak: f64,
    pub positive_token_bonus: f64,
    pub negative_token_bonus: f64,
    /// Standard deviation of the additive quality noise.
    pub noise_sd: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            noise_seed: 0x5EED_0FC0_FFEE,
            time_base_ms: 900.0,
            time_per_step_ms: 230.0,
            time_jitter: 0.02,
            quality_base: 0.05,
            steps_gain: 0.20,
            steps_scale: 8.0,
            rescale_gain: 0.30,
            rescale_peak: 0.7,
            guidance_gain: 0.04,
            guidance_peak: 7.5,
            positive_token_bonus: 0.06,
            negative_token_bonus: 0.02,
            noise_sd: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurrogateError {
    #[error("surrogate constant `{0}` must be finite")]
    NonFinite(&'static str),
    #[error("time per step must be positive and the base time non-negative")]
    NonIncreasingTime,
    #[error("search space lacks a compatible `{0}` parameter")]
    IncompatibleSpace(&'static str),
}

/// Surrogate bound to the layout of a search space.
#[derive(Debug, Clone)]
pub struct Surrogate {
    config: SurrogateConfig,
    space: SearchSpace,
    steps: usize,
    guidance: usize,
    rescale: usize,
    positive: usize,
    negative: usize,
}

fn bump(x: f64, peak: f64, lo: f64, hi: f64) -> f64 {
    let width = (peak - lo).max(hi - peak);
    let z = (x - peak) / width;
    (1.0 - z * z).max(0.0)
}

impl Surrogate {
    /// Binds the surrogate to `space`, which must contain the default numeric parameters
    /// within their default bounds plus the two prompt parameters (any vocabulary).
    pub fn new(config: SurrogateConfig, space: &SearchSpace) -> Result<Self, SurrogateError> {
        let c = &config;
        let constants = [
            ("time_base_ms", c.time_base_ms),
            ("time_per_step_ms", c.time_per_step_ms),
            ("time_jitter", c.time_jitter),
            ("quality_base", c.quality_base),
            ("steps_gain", c.steps_gain),
            ("steps_scale", c.steps_scale),
            ("rescale_gain", c.rescale_gain),
            ("rescale_peak", c.rescale_peak),
            ("guidance_gain", c.guidance_gain),
            ("guidance_peak", c.guidance_peak),
            ("positive_token_bonus", c.positive_token_bonus),
            ("negative_token_bonus", c.negative_token_bonus),
            ("noise_sd", c.noise_sd),
        ];
        if let Some((name, _)) = constants.iter().find(|(_, v)| !v.is_finite()) {
            return Err(SurrogateError::NonFinite(name));
        }
        if !(c.time_per_step_ms > 0.0) || c.time_base_ms < 0.0 || !(c.time_jitter < 1.0) {
            return Err(SurrogateError::NonIncreasingTime);
        }

        let int_within = |name: &'static str, lo: i64, hi: i64| match space.index_of(name) {
            Some(i) => match space.params()[i].kind {
                ParamKind::Integer { lo: a, hi: b } if a >= lo && b <= hi => Ok(i),
                _ => Err(SurrogateError::IncompatibleSpace(name)),
            },
            None => Err(SurrogateError::IncompatibleSpace(name)),
        };
        let real_within = |name: &'static str, lo: f64, hi: f64| match space.index_of(name) {
            Some(i) => match space.params()[i].kind {
                ParamKind::Real { lo: a, hi: b } if a >= lo && b <= hi => Ok(i),
                _ => Err(SurrogateError::IncompatibleSpace(name)),
            },
            None => Err(SurrogateError::IncompatibleSpace(name)),
        };
        let tokens = |name: &'static str| match space.index_of(name) {
            Some(i) if matches!(space.params()[i].kind, ParamKind::TokenSubset { .. }) => Ok(i),
            _ => Err(SurrogateError::IncompatibleSpace(name)),
        };
        let steps = int_within(INFERENCE_STEPS, 1, 100)?;
        let guidance = real_within(GUIDANCE_SCALE, 1.0, 20.0)?;
        let rescale = real_within(GUIDANCE_RESCALE, 0.0, 1.0)?;
        int_within(SEED, 1, 512)?;
        let positive = tokens(POSITIVE_PROMPT)?;
        let negative = tokens(NEGATIVE_PROMPT)?;
        Ok(Self { config, space: space.clone(), steps, guidance, rescale, positive, negative })
    }

    pub fn config(&self) -> &SurrogateConfig {
        &self.config
    }

    /// Noise-free expected time for `steps` inference steps.
    pub fn expected_time_ms(&self, steps: i64) -> f64 {
        self.config.time_base_ms + self.config.time_per_step_ms * steps as f64
    }

    pub fn evaluate(&self, c: &Candidate) -> Result<ObjectiveVector, String> {
        self.space.validate(c).map_err(|e| format!("candidate outside the surrogate's space: {e}"))?;
        let cfg = &self.config;
        let steps = c.genes[self.steps].as_int().unwrap_or_default();
        let guidance = c.genes[self.guidance].as_real().unwrap_or_default();
        let rescale = c.genes[self.rescale].as_real().unwrap_or_default();
        let count = |i: usize| c.genes[i].as_mask().map_or(0, |m| m.iter().filter(|&&b| b).count());

        let h = splitmix64(fnv1a(c.cache_key().as_bytes()) ^ cfg.noise_seed);
        let jitter = (2.0 * unit_interval(h) - 1.0) * cfg.time_jitter;
        let noise = (2.0 * unit_interval(splitmix64(h)) - 1.0) * SQRT_3 * cfg.noise_sd;

        let time_ms = self.expected_time_ms(steps) * (1.0 + jitter);
        let quality = cfg.quality_base
            + cfg.steps_gain * (1.0 - libm::exp(-(steps as f64) / cfg.steps_scale))
            + cfg.rescale_gain * bump(rescale, cfg.rescale_peak, 0.0, 1.0)
            + cfg.guidance_gain * bump(guidance, cfg.guidance_peak, 1.0, 20.0)
            + cfg.positive_token_bonus * count(self.positive) as f64
            + cfg.negative_token_bonus * count(self.negative) as f64
            + noise;
        Ok(ObjectiveVector::new(time_ms, quality.clamp(0.0, 1.0)))
    }
}

impl Evaluator for Surrogate {
    fn id(&self) -> String {
        String::from("surrogate")
    }

    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Vec<EvalResult> {
        requests.iter().map(|r| EvalResult { id: r.id.clone(), outcome: self.evaluate(&r.candidate) }).collect()
    }
}
