//! Uses of the representation beyond compression: bounded-information
//! release and denoising by editing words.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::analyzer::estimate_noise_sigma;
use crate::eval::{EvalError, Evaluator};
use crate::metrics::FidelityReport;
use crate::scene::{add_noise, render, Scene, SceneError, SceneKind, ShapeRaster};
use crate::textcodec::{self, Bitstream, CodecError};
use crate::transform::{dequantize_scene, forward, inverse, Budget, TextualRepresentation};
use crate::vocab::{Color, Descriptor, Palette, Shape, Texture};

/// Seed of the pixel noise applied to the source in `evaluate_denoise`.
pub const DENOISE_NOISE_SEED: u64 = 0x7e47_c0de_0000_0003;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AppError {
    #[error("unknown query {0:?}; expected count, has:<class> or domcolor")]
    UnknownQuery(String),
    #[error("invalid rule {0:?}: {1}")]
    InvalidRule(String, &'static str),
    #[error("sigma must be positive, got {0}")]
    Sigma(f64),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A question whose answer is released alongside, or instead of, the stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Query {
    ObjectCount,
    HasClass(Shape),
    DominantColor,
}

impl Query {
    /// Fixed width of the released answer.
    pub fn answer_bits(self) -> u32 {
        match self {
            Query::ObjectCount => 8,
            Query::HasClass(_) => 1,
            Query::DominantColor => 5,
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::ObjectCount => f.write_str("count"),
            Query::HasClass(s) => write!(f, "has:{}", s.word()),
            Query::DominantColor => f.write_str("domcolor"),
        }
    }
}

impl FromStr for Query {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "count" => Ok(Query::ObjectCount),
            "domcolor" => Ok(Query::DominantColor),
            _ => s
                .strip_prefix("has:")
                .and_then(Shape::from_word)
                .map(Query::HasClass)
                .ok_or_else(|| AppError::UnknownQuery(s.into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    Count(u8),
    Flag(bool),
    Color(Color),
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Count(n) => write!(f, "{n}"),
            Answer::Flag(b) => write!(f, "{b}"),
            Answer::Color(c) => f.write_str(c.word()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryAnswer {
    pub query: Query,
    pub answer: Answer,
    pub bits: u32,
}

/// What was released and how many bits it took.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivacyReport {
    /// Exact released bit count; bounds the mutual information between the
    /// image and the release.
    pub k_bits: u64,
    pub answers: Vec<QueryAnswer>,
}

/// Release of a whole stream. The stream is decoded first so a malformed
/// one is rejected rather than counted.
pub fn mi_upper_bound(bits: &Bitstream) -> Result<PrivacyReport, AppError> {
    textcodec::decode(bits)?;
    Ok(PrivacyReport {
        k_bits: textcodec::rate_bits(bits),
        answers: Vec::new(),
    })
}

/// Color covering the most pixels of the rendered representation,
/// background included; ties go to the earlier vocabulary color. A noise
/// representation answers with its background.
fn dominant_color(rep: &TextualRepresentation, palette: &Palette) -> Color {
    if rep.kind == SceneKind::Noise {
        return rep.background;
    }
    let scene = dequantize_scene(rep, palette);
    let canvas = rep.canvas;
    let fallback = palette.contrasting(rep.background);
    let mut labels = vec![rep.background.index() as u8; canvas.area() as usize];
    for object in &scene.objects {
        let label = object.fill(fallback).index() as u8;
        ShapeRaster::new(object, canvas).for_each_pixel(canvas, |x, y| {
            labels[y as usize * canvas.width as usize + x as usize] = label;
        });
    }
    let mut counts = [0u64; 16];
    for l in labels {
        counts[l as usize] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Color::ALL[best]
}

/// Answers computed from the representation alone.
pub fn answer_queries(rep: &TextualRepresentation, queries: &[Query], palette: &Palette) -> PrivacyReport {
    let answers: Vec<QueryAnswer> = queries
        .iter()
        .map(|&query| {
            let answer = match query {
                Query::ObjectCount => Answer::Count(rep.objects.len().min(255) as u8),
                Query::HasClass(shape) => Answer::Flag(rep.objects.iter().any(|o| o.shape == shape)),
                Query::DominantColor => Answer::Color(dominant_color(rep, palette)),
            };
            QueryAnswer {
                query,
                answer,
                bits: query.answer_bits(),
            }
        })
        .collect();
    PrivacyReport {
        k_bits: answers.iter().map(|a| a.bits as u64).sum(),
        answers,
    }
}

/// Edit applied to every descriptor list: replace `target` or delete it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenoiseRule {
    pub target: Descriptor,
    pub replacement: Option<Descriptor>,
}

impl DenoiseRule {
    /// A color may only become another color, so the first word of a list
    /// stays a color.
    pub fn new(target: Descriptor, replacement: Option<Descriptor>) -> Result<Self, AppError> {
        let rule = DenoiseRule { target, replacement };
        if target.color().is_some() && replacement.and_then(|r| r.color()).is_none() {
            return Err(AppError::InvalidRule(
                alloc::format!("{rule}"),
                "a color word can only be replaced by a color word",
            ));
        }
        Ok(rule)
    }
}

impl fmt::Display for DenoiseRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.replacement {
            Some(r) => write!(f, "{}:{}", self.target.word(), r.word()),
            None => write!(f, "{}:-", self.target.word()),
        }
    }
}

/// `word:replacement`, or `word:-` to delete.
impl FromStr for DenoiseRule {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why| AppError::InvalidRule(s.into(), why);
        let (target, replacement) = s.split_once(':').ok_or_else(|| bad("expected word:replacement"))?;
        let target = Descriptor::from_word(target).ok_or_else(|| bad("unknown target word"))?;
        let replacement = match replacement {
            "-" => None,
            w => Some(Descriptor::from_word(w).ok_or_else(|| bad("unknown replacement word"))?),
        };
        DenoiseRule::new(target, replacement)
    }
}

/// `noisy` becomes `crisp`.
pub fn default_rules() -> Vec<DenoiseRule> {
    vec![DenoiseRule {
        target: Descriptor::Texture(Texture::Noisy),
        replacement: Some(Descriptor::Texture(Texture::Crisp)),
    }]
}

/// Applies the rules in order to every descriptor list. Nothing else in the
/// representation changes.
pub fn denoise_text(rep: &TextualRepresentation, rules: &[DenoiseRule]) -> TextualRepresentation {
    let mut out = rep.clone();
    for rule in rules {
        for object in &mut out.objects {
            match rule.replacement {
                Some(r) => object
                    .descriptors
                    .iter_mut()
                    .filter(|d| **d == rule.target)
                    .for_each(|d| *d = r),
                None => object.descriptors.retain(|d| *d != rule.target),
            }
        }
    }
    out
}

/// Scores before and after text-domain denoising of a noisy observation of
/// `clean`.
///
/// The source is `clean` rendered with pixel noise of level `sigma`. When
/// the noise is measurable in the source, every object description gains
/// the word `noisy` after its color; `before` scores the decoded image of
/// that description and `after` the decoded image of its denoised edit.
pub fn evaluate_denoise(
    evaluator: &Evaluator,
    clean: &Scene,
    sigma: f64,
    budget: Budget,
    rules: &[DenoiseRule],
) -> Result<(FidelityReport, FidelityReport), AppError> {
    if !(sigma > 0.0) {
        return Err(AppError::Sigma(sigma));
    }
    let source = add_noise(&render(clean, evaluator.palette()), sigma, DENOISE_NOISE_SEED)?;
    let mut observed = clean.clone();
    if estimate_noise_sigma(&source) >= evaluator.analyzer.config().filter_sigma {
        for object in &mut observed.objects {
            object.descriptors.insert(1, Descriptor::Texture(Texture::Noisy));
        }
    }
    let noisy = forward(&observed, budget);
    let denoised = denoise_text(&noisy, rules);
    let score = |rep: &TextualRepresentation| -> Result<FidelityReport, AppError> {
        let rate = textcodec::rate_bits(&textcodec::encode(rep));
        Ok(evaluator
            .evaluate(clean, &inverse(rep, evaluator.palette()))?
            .with_rate(rate))
    };
    Ok((score(&noisy)?, score(&denoised)?))
}
