//! The tunable parameter/prompt space as a mixed genome.
//!
//! A [`SearchSpace`] is an ordered list of [`ParamSpec`]s; a [`Candidate`] holds one [`Gene`] per
//! spec. Integer and real genes are bounded ranges, prompt genes are inclusion masks over an
//! ordered token vocabulary.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write as _};
use core::hash::{Hash, Hasher};

use rand::Rng;

pub const INFERENCE_STEPS: &str = "inference_steps";
pub const GUIDANCE_SCALE: &str = "guidance_scale";
pub const GUIDANCE_RESCALE: &str = "guidance_rescale";
pub const SEED: &str = "seed";
pub const POSITIVE_PROMPT: &str = "positive_prompt";
pub const NEGATIVE_PROMPT: &str = "negative_prompt";

pub const DEFAULT_POSITIVE_TOKENS: [&str; 3] = ["photograph", "color", "ultra real"];
pub const DEFAULT_NEGATIVE_TOKENS: [&str; 3] = ["sketch", "cropped", "low quality"];

/// Significant digits kept for real genes in cache keys.
pub const KEY_SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpaceError {
    #[error("parameter name must not be empty")]
    EmptyName,
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("parameter `{0}`: lower bound exceeds upper bound")]
    InvertedRange(String),
    #[error("parameter `{0}`: bounds must be finite")]
    NonFiniteBound(String),
    #[error("parameter `{0}`: vocabulary contains an empty token")]
    EmptyToken(String),
    #[error("parameter `{param}`: duplicate token `{token}`")]
    DuplicateToken { param: String, token: String },
    #[error("candidate has {got} genes, space has {expected} parameters")]
    GeneCount { expected: usize, got: usize },
    #[error("parameter `{0}`: gene kind does not match the parameter kind")]
    KindMismatch(String),
    #[error("parameter `{0}`: gene value out of bounds")]
    OutOfBounds(String),
    #[error("parameter `{param}`: mask has {got} bits, vocabulary has {expected} tokens")]
    MaskLength { param: String, expected: usize, got: usize },
    #[error("malformed gene text `{0}`")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ParamKind {
    /// Inclusive integer range.
    Integer { lo: i64, hi: i64 },
    /// Inclusive real range.
    Real { lo: f64, hi: f64 },
    /// Any subset of an ordered vocabulary.
    #[cfg_attr(feature = "serde", serde(rename = "tokens"))]
    TokenSubset { vocabulary: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSpec {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn integer(name: &str, lo: i64, hi: i64) -> Self {
        Self { name: name.to_string(), kind: ParamKind::Integer { lo, hi } }
    }

    pub fn real(name: &str, lo: f64, hi: f64) -> Self {
        Self { name: name.to_string(), kind: ParamKind::Real { lo, hi } }
    }

    pub fn tokens<S: AsRef<str>>(name: &str, vocabulary: &[S]) -> Self {
        let vocabulary = vocabulary.iter().map(|t| t.as_ref().to_string()).collect();
        Self { name: name.to_string(), kind: ParamKind::TokenSubset { vocabulary } }
    }

    fn validate(&self) -> Result<(), SpaceError> {
        if self.name.is_empty() {
            return Err(SpaceError::EmptyName);
        }
        match &self.kind {
            ParamKind::Integer { lo, hi } => {
                if lo > hi {
                    return Err(SpaceError::InvertedRange(self.name.clone()));
                }
            }
            ParamKind::Real { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(SpaceError::NonFiniteBound(self.name.clone()));
                }
                if lo > hi {
                    return Err(SpaceError::InvertedRange(self.name.clone()));
                }
            }
            ParamKind::TokenSubset { vocabulary } => {
                for (i, token) in vocabulary.iter().enumerate() {
                    if token.is_empty() {
                        return Err(SpaceError::EmptyToken(self.name.clone()));
                    }
                    if vocabulary[..i].contains(token) {
                        return Err(SpaceError::DuplicateToken { param: self.name.clone(), token: token.clone() });
                    }
                }
            }
        }
        Ok(())
    }

    fn check_gene(&self, gene: &Gene) -> Result<(), SpaceError> {
        match (&self.kind, gene) {
            (ParamKind::Integer { lo, hi }, Gene::Int(v)) => {
                if v < lo || v > hi {
                    return Err(SpaceError::OutOfBounds(self.name.clone()));
                }
            }
            (ParamKind::Real { lo, hi }, Gene::Real(v)) => {
                if !(v >= lo && v <= hi) {
                    return Err(SpaceError::OutOfBounds(self.name.clone()));
                }
            }
            (ParamKind::TokenSubset { vocabulary }, Gene::Mask(mask)) => {
                if mask.len() != vocabulary.len() {
                    return Err(SpaceError::MaskLength {
                        param: self.name.clone(),
                        expected: vocabulary.len(),
                        got: mask.len(),
                    });
                }
            }
            _ => return Err(SpaceError::KindMismatch(self.name.clone())),
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Gene {
        match &self.kind {
            ParamKind::Integer { lo, hi } => Gene::Int(rng.gen_range(*lo..=*hi)),
            ParamKind::Real { lo, hi } => Gene::Real(rng.gen_range(*lo..=*hi)),
            ParamKind::TokenSubset { vocabulary } => Gene::Mask(vocabulary.iter().map(|_| rng.gen_bool(0.5)).collect()),
        }
    }
}

/// An ordered, validated list of parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawSpace"))]
pub struct SearchSpace {
    #[cfg_attr(feature = "serde", serde(rename = "param"))]
    params: Vec<ParamSpec>,
}

/// Unvalidated form read by deserializers.
#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawSpace {
    param: Vec<ParamSpec>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawSpace> for SearchSpace {
    type Error = SpaceError;

    fn try_from(raw: RawSpace) -> Result<Self, SpaceError> {
        SearchSpace::new(raw.param)
    }
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        for (i, p) in params.iter().enumerate() {
            p.validate()?;
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }
        Ok(Self { params })
    }

    /// The six-parameter diffusion space with the built-in token vocabularies.
    pub fn default_space() -> Self {
        Self::with_vocabularies(&DEFAULT_POSITIVE_TOKENS, &DEFAULT_NEGATIVE_TOKENS)
            .expect("built-in vocabularies are valid")
    }

    /// The default numeric parameters with caller-supplied prompt vocabularies.
    pub fn with_vocabularies<S: AsRef<str>>(positive: &[S], negative: &[S]) -> Result<Self, SpaceError> {
        Self::new(alloc::vec![
            ParamSpec::integer(INFERENCE_STEPS, 1, 100),
            ParamSpec::real(GUIDANCE_SCALE, 1.0, 20.0),
            ParamSpec::real(GUIDANCE_RESCALE, 0.0, 1.0),
            ParamSpec::integer(SEED, 1, 512),
            ParamSpec::tokens(POSITIVE_PROMPT, positive),
            ParamSpec::tokens(NEGATIVE_PROMPT, negative),
        ])
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn validate(&self, c: &Candidate) -> Result<(), SpaceError> {
        if c.genes.len() != self.params.len() {
            return Err(SpaceError::GeneCount { expected: self.params.len(), got: c.genes.len() });
        }
        self.params.iter().zip(&c.genes).try_for_each(|(p, g)| p.check_gene(g))
    }

    /// Draws every gene uniformly over its domain; tokens are included with probability 0.5.
    pub fn sample_random<R: Rng + ?Sized>(&self, rng: &mut R) -> Candidate {
        Candidate { genes: self.params.iter().map(|p| p.sample(rng)).collect() }
    }

    /// Resamples each numeric gene with probability `rate` and flips each mask bit with
    /// probability `rate`.
    pub fn mutate<R: Rng + ?Sized>(&self, c: &Candidate, rate: f64, rng: &mut R) -> Candidate {
        let rate = rate.clamp(0.0, 1.0);
        let genes = self
            .params
            .iter()
            .zip(&c.genes)
            .map(|(p, g)| match g {
                Gene::Mask(mask) => Gene::Mask(mask.iter().map(|&bit| bit ^ rng.gen_bool(rate)).collect()),
                _ => {
                    if rng.gen_bool(rate) {
                        p.sample(rng)
                    } else {
                        g.clone()
                    }
                }
            })
            .collect();
        Candidate { genes }
    }

    /// Uniform crossover: every gene position (every bit, for masks) is swapped between the
    /// two children with probability 0.5.
    pub fn crossover<R: Rng + ?Sized>(&self, a: &Candidate, b: &Candidate, rng: &mut R) -> (Candidate, Candidate) {
        let mut left = Vec::with_capacity(a.genes.len());
        let mut right = Vec::with_capacity(a.genes.len());
        for (ga, gb) in a.genes.iter().zip(&b.genes) {
            match (ga, gb) {
                (Gene::Mask(ma), Gene::Mask(mb)) if ma.len() == mb.len() => {
                    let mut ca = ma.clone();
                    let mut cb = mb.clone();
                    for i in 0..ca.len() {
                        if rng.gen_bool(0.5) {
                            core::mem::swap(&mut ca[i], &mut cb[i]);
                        }
                    }
                    left.push(Gene::Mask(ca));
                    right.push(Gene::Mask(cb));
                }
                _ => {
                    if rng.gen_bool(0.5) {
                        left.push(gb.clone());
                        right.push(ga.clone());
                    } else {
                        left.push(ga.clone());
                        right.push(gb.clone());
                    }
                }
            }
        }
        (Candidate { genes: left }, Candidate { genes: right })
    }

    /// Renders the positive and negative prompt strings for `c`.
    ///
    /// The positive prompt is `base_prompt` followed by the selected positive tokens, the
    /// negative prompt is just the selected negative tokens; both use vocabulary order and a
    /// `", "` separator.
    pub fn render_prompt(&self, c: &Candidate, base_prompt: &str) -> (String, String) {
        let positive = self.selected_tokens(c, POSITIVE_PROMPT);
        let negative = self.selected_tokens(c, NEGATIVE_PROMPT);
        let mut pos = String::from(base_prompt);
        for t in &positive {
            if !pos.is_empty() {
                pos.push_str(", ");
            }
            pos.push_str(t);
        }
        (pos, negative.join(", "))
    }

    /// Tokens selected by the mask gene of parameter `name`, in vocabulary order.
    pub fn selected_tokens<'a>(&'a self, c: &Candidate, name: &str) -> Vec<&'a str> {
        let Some(i) = self.index_of(name) else {
            return Vec::new();
        };
        match (&self.params[i].kind, c.genes.get(i)) {
            (ParamKind::TokenSubset { vocabulary }, Some(Gene::Mask(mask))) => {
                vocabulary.iter().zip(mask).filter(|(_, &on)| on).map(|(t, _)| t.as_str()).collect()
            }
            _ => Vec::new(),
        }
    }
}

/// One gene value.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Gene {
    Int(i64),
    Real(f64),
    Mask(Vec<bool>),
}

impl Gene {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Gene::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Gene::Real(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_mask(&self) -> Option<&[bool]> {
        match self {
            Gene::Mask(m) => Some(m),
            _ => None,
        }
    }

    fn write_text(&self, out: &mut String, key_precision: bool) {
        match self {
            Gene::Int(v) => {
                let _ = write!(out, "i{v}");
            }
            Gene::Real(v) if key_precision => {
                let _ = write!(out, "r{:.*e}", KEY_SIGNIFICANT_DIGITS - 1, v);
            }
            Gene::Real(v) => {
                let _ = write!(out, "r{v}");
            }
            Gene::Mask(m) => {
                out.push('b');
                out.extend(m.iter().map(|&b| if b { '1' } else { '0' }));
            }
        }
    }

    fn parse(text: &str) -> Result<Self, SpaceError> {
        let err = || SpaceError::Parse(text.to_string());
        let mut chars = text.chars();
        let tag = chars.next().ok_or_else(err)?;
        let body = chars.as_str();
        match tag {
            'i' => body.parse().map(Gene::Int).map_err(|_| err()),
            'r' => body.parse().map(Gene::Real).map_err(|_| err()),
            'b' => body
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(err()),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Gene::Mask),
            _ => Err(err()),
        }
    }
}

// Reals compare by bit pattern so that Eq and Hash agree.
impl PartialEq for Gene {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Gene::Int(a), Gene::Int(b)) => a == b,
            (Gene::Real(a), Gene::Real(b)) => a.to_bits() == b.to_bits(),
            (Gene::Mask(a), Gene::Mask(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Gene {}

impl Hash for Gene {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Gene::Int(v) => {
                0u8.hash(state);
                v.hash(state);
            }
            Gene::Real(v) => {
                1u8.hash(state);
                v.to_bits().hash(state);
            }
            Gene::Mask(m) => {
                2u8.hash(state);
                m.hash(state);
            }
        }
    }
}

/// One point of a [`SearchSpace`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Candidate {
    pub genes: Vec<Gene>,
}

impl Candidate {
    pub fn new(genes: Vec<Gene>) -> Self {
        Self { genes }
    }

    /// Lossless text form: genes separated by `;`, each tagged `i` (integer), `r` (real,
    /// shortest round-trip decimal) or `b` (mask bits).
    pub fn to_text(&self) -> String {
        self.render(false)
    }

    pub fn from_text(text: &str) -> Result<Self, SpaceError> {
        if text.is_empty() {
            return Ok(Self { genes: Vec::new() });
        }
        text.split(';').map(Gene::parse).collect::<Result<Vec<_>, _>>().map(Self::new)
    }

    /// Canonical cache key. Same layout as [`Candidate::to_text`] but real genes are written
    /// with [`KEY_SIGNIFICANT_DIGITS`] significant digits.
    pub fn cache_key(&self) -> String {
        self.render(true)
    }

    fn render(&self, key_precision: bool) -> String {
        let mut out = String::new();
        for (i, g) in self.genes.iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            g.write_text(&mut out, key_precision);
        }
        out
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Convenience lookup of a gene by parameter name.
pub fn gene<'a>(space: &SearchSpace, c: &'a Candidate, name: &str) -> Option<&'a Gene> {
    space.index_of(name).and_then(|i| c.genes.get(i))
}
