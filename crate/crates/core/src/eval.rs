//! Coding schemes and the scoring rule that compares their reconstructions
//! against the source scene.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use crate::analyzer::Analyzer;
use crate::image::Image;
use crate::metrics::{
    pixel_fidelity, psnr, satisfaction, textual_fidelity, FidelityReport, MatchWeights, MetricsError,
    SatisfactionConfig,
};
use crate::pixelcodec::{decode_pixels, encode_hybrid_layer, encode_pixels, hybrid_reconstruct, PixelCodecError};
use crate::scene::{render, Scene};
use crate::textcodec::{self, Bitstream, CodecError};
use crate::transform::{forward, inverse, Budget, TextualRepresentation};
use crate::vocab::Palette;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    PixelCodec(#[from] PixelCodecError),
    #[error("reconstruction is {0}x{1}, scene canvas is {2}x{3}")]
    CanvasMismatch(u32, u32, u32, u32),
}

/// A way of coding a scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    Text(Budget),
    Pixel { k: u32, bits: u8 },
    Hybrid { budget: Budget, k: u32, bits: u8 },
    /// The whole image replaced by the single word `noise`.
    NoiseToken,
}

impl SchemeId {
    /// Budget used for the noise-token scheme's stream header.
    pub fn noise_token_budget() -> Budget {
        Budget::new(1, 0, 0).expect("valid budget")
    }

    /// The four schemes of the default sweep.
    pub fn defaults() -> [SchemeId; 4] {
        let b = Budget::new(4, 6, 2).expect("valid budget");
        [
            SchemeId::Text(b),
            SchemeId::Pixel { k: 4, bits: 3 },
            SchemeId::Pixel { k: 32, bits: 5 },
            SchemeId::Hybrid { budget: b, k: 8, bits: 4 },
        ]
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeId::Text(b) => write!(f, "text({b})"),
            SchemeId::Pixel { k, bits } => write!(f, "pixel({k},{bits})"),
            SchemeId::Hybrid { budget, k, bits } => write!(f, "hybrid({budget},{k},{bits})"),
            SchemeId::NoiseToken => f.write_str("noise-token"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid scheme {0:?}: expected text(L,R,W), pixel(k,b), hybrid(L,R,W,k,b) or noise-token")]
pub struct SchemeParseError(pub String);

impl FromStr for SchemeId {
    type Err = SchemeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || SchemeParseError(s.into());
        if s == "noise-token" {
            return Ok(SchemeId::NoiseToken);
        }
        let (name, rest) = s.split_once('(').ok_or_else(err)?;
        let args = rest.strip_suffix(')').ok_or_else(err)?;
        let mut values = [0u32; 5];
        let mut n = 0;
        for part in args.split(',') {
            if n == values.len() {
                return Err(err());
            }
            values[n] = part.trim().parse().map_err(|_| err())?;
            n += 1;
        }
        let byte = |v: u32| u8::try_from(v).map_err(|_| err());
        let budget = |v: &[u32]| -> Result<Budget, SchemeParseError> {
            Budget::new(byte(v[0])?, byte(v[1])?, byte(v[2])?).map_err(|_| err())
        };
        let pixel = |k: u32, b: u32| -> Result<(u32, u8), SchemeParseError> {
            let bits = byte(b)?;
            if k == 0 || !(1..=8).contains(&bits) {
                return Err(err());
            }
            Ok((k, bits))
        };
        match (name, n) {
            ("text", 3) => Ok(SchemeId::Text(budget(&values[..3])?)),
            ("pixel", 2) => {
                let (k, bits) = pixel(values[0], values[1])?;
                Ok(SchemeId::Pixel { k, bits })
            }
            ("hybrid", 5) => {
                let (k, bits) = pixel(values[3], values[4])?;
                Ok(SchemeId::Hybrid {
                    budget: budget(&values[..3])?,
                    k,
                    bits,
                })
            }
            _ => Err(err()),
        }
    }
}

/// Output of one scheme on one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeOutput {
    pub reconstruction: Image,
    /// Exact bit count of everything the decoder receives.
    pub rate_bits: u64,
}

/// Scoring context: analyzer, satisfaction and matching parameters, and the
/// fixed budget at which source and reconstruction are both described.
#[derive(Clone, Debug)]
pub struct Evaluator {
    pub analyzer: Analyzer,
    pub satisfaction: SatisfactionConfig,
    pub weights: MatchWeights,
    pub eval_budget: Budget,
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator {
            analyzer: Analyzer::default(),
            satisfaction: SatisfactionConfig::default(),
            weights: MatchWeights::default(),
            eval_budget: Budget::new(8, 6, 2).expect("valid budget"),
        }
    }
}

impl Evaluator {
    pub fn palette(&self) -> &Palette {
        self.analyzer.palette()
    }

    /// Scores `reconstruction` against `scene`. The report's rate is zero;
    /// see [`FidelityReport::with_rate`].
    pub fn evaluate(&self, scene: &Scene, reconstruction: &Image) -> Result<FidelityReport, EvalError> {
        if reconstruction.canvas() != scene.canvas {
            return Err(EvalError::CanvasMismatch(
                reconstruction.width(),
                reconstruction.height(),
                scene.canvas.width,
                scene.canvas.height,
            ));
        }
        let reference = render(scene, self.palette());
        let pixel = pixel_fidelity(&reference, reconstruction)?;
        let described = forward(scene, self.eval_budget);
        let recovered = self
            .analyzer
            .analyze(reconstruction, self.eval_budget, scene.background);
        let text = textual_fidelity(&described, &recovered, &self.weights)?;
        Ok(FidelityReport {
            text_fidelity: text,
            pixel_fidelity: pixel,
            satisfaction: satisfaction(text, pixel, &self.satisfaction)?,
            psnr_db: psnr(&reference, reconstruction)?,
            rate_bits: 0,
        })
    }

    /// Codes `scene`, decodes the bytes again and returns the decoder's image.
    pub fn run_scheme(&self, scene: &Scene, scheme: SchemeId) -> Result<SchemeOutput, EvalError> {
        let palette = self.palette();
        let canvas = scene.canvas;
        Ok(match scheme {
            SchemeId::Text(budget) => {
                let (rep, rate_bits) = text_round_trip(&forward(scene, budget))?;
                SchemeOutput {
                    reconstruction: inverse(&rep, palette),
                    rate_bits,
                }
            }
            SchemeId::NoiseToken => {
                let rep = TextualRepresentation::noise(canvas, scene.background, SchemeId::noise_token_budget());
                let (rep, rate_bits) = text_round_trip(&rep)?;
                SchemeOutput {
                    reconstruction: inverse(&rep, palette),
                    rate_bits,
                }
            }
            SchemeId::Pixel { k, bits } => {
                let layer = encode_pixels(&render(scene, palette), k, bits)?;
                let layer = crate::pixelcodec::LowResLayer::from_bytes(&layer.to_bytes())?;
                SchemeOutput {
                    reconstruction: decode_pixels(&layer, canvas.width, canvas.height)?,
                    rate_bits: layer.rate_bits(),
                }
            }
            SchemeId::Hybrid { budget, k, bits } => {
                let (rep, text_bits) = text_round_trip(&forward(scene, budget))?;
                let layer = encode_hybrid_layer(&render(scene, palette), &rep, k, bits, palette)?;
                let layer = crate::pixelcodec::LowResLayer::from_bytes(&layer.to_bytes())?;
                SchemeOutput {
                    reconstruction: hybrid_reconstruct(&rep, &layer, palette)?,
                    rate_bits: text_bits + layer.rate_bits(),
                }
            }
        })
    }

    /// `run_scheme` followed by `evaluate`, with the scheme's rate attached.
    pub fn score(&self, scene: &Scene, scheme: SchemeId) -> Result<FidelityReport, EvalError> {
        let out = self.run_scheme(scene, scheme)?;
        Ok(self.evaluate(scene, &out.reconstruction)?.with_rate(out.rate_bits))
    }
}

fn text_round_trip(rep: &TextualRepresentation) -> Result<(TextualRepresentation, u64), EvalError> {
    let stream = textcodec::encode(rep);
    let stream = Bitstream::from_bytes(&stream.to_bytes())?;
    let decoded = textcodec::decode(&stream)?;
    if &decoded != rep {
        return Err(EvalError::Codec(CodecError::Desync("decoded representation differs".into())));
    }
    Ok((decoded, textcodec::rate_bits(&stream)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Canvas;
    use crate::scene::{generate_scene, GenerationConfig, SceneKind};
    use crate::vocab::{Color, Descriptor, Shape};
    use crate::SceneObject;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn scheme_ids_round_trip() {
        for s in ["text(4,6,2)", "pixel(4,3)", "hybrid(4,6,2,16,4)", "noise-token", "text(1,0,0)"] {
            assert_eq!(s.parse::<SchemeId>().unwrap().to_string(), s);
        }
        for bad in ["text(4,6)", "pixel(0,3)", "pixel(4,9)", "text(4,17,2)", "hybrid(1,2,3)", "txt(1,2,3)", "text(1,2,3"] {
            assert!(bad.parse::<SchemeId>().is_err(), "{bad}");
        }
    }

    #[test]
    fn self_reconstruction_scores_high() {
        let ev = Evaluator::default();
        for seed in 0..5 {
            let scene = generate_scene(seed, &GenerationConfig::default()).unwrap();
            let reference = render(&scene, ev.palette());
            let r = ev.evaluate(&scene, &reference).unwrap();
            assert!(r.text_fidelity >= 0.9 && r.text_fidelity <= 1.0);
            assert_eq!(r.pixel_fidelity, 1.0);
            let g = satisfaction(r.text_fidelity, 1.0, &ev.satisfaction).unwrap();
            assert!(r.satisfaction >= 0.99 * g);
        }
    }

    #[test]
    fn blank_reconstruction_scores_zero_text() {
        let ev = Evaluator::default();
        let scene = generate_scene(4, &GenerationConfig::default()).unwrap();
        let blank = Image::filled(256, 256, ev.palette().rgb(scene.background));
        let r = ev.evaluate(&scene, &blank).unwrap();
        assert_eq!(r.text_fidelity, 0.0);
        assert!(r.pixel_fidelity < 1.0);
        assert!(ev.evaluate(&scene, &Image::filled(32, 32, [0; 3])).is_err());
    }

    #[test]
    fn single_object_at_minimum_budget() {
        let ev = Evaluator::default();
        let mut scene = Scene::empty(Canvas::new(256, 256), Color::White);
        scene.objects = vec![SceneObject {
            shape: Shape::Circle,
            center: (0.3, 0.7),
            size: 0.2,
            orientation: 0.0,
            descriptors: vec![Descriptor::Color(Color::Red)],
        }];
        let out = ev.run_scheme(&scene, "text(1,0,0)".parse().unwrap()).unwrap();
        assert!(out.rate_bits <= 200, "{}", out.rate_bits);
        let got = ev.analyzer.analyze_scene(&out.reconstruction, Color::White);
        assert_eq!(got.objects.len(), 1);
        assert!((got.objects[0].center.0 - 0.5).abs() < 0.01);
        assert!((got.objects[0].center.1 - 0.5).abs() < 0.01);
    }

    #[test]
    fn rates_add_up() {
        let ev = Evaluator::default();
        let scene = generate_scene(8, &GenerationConfig::default()).unwrap();
        let b = Budget::new(4, 6, 2).unwrap();
        let text = ev.run_scheme(&scene, SchemeId::Text(b)).unwrap().rate_bits;
        let pixel = ev.run_scheme(&scene, SchemeId::Pixel { k: 16, bits: 4 }).unwrap().rate_bits;
        let hybrid = ev
            .run_scheme(&scene, SchemeId::Hybrid { budget: b, k: 16, bits: 4 })
            .unwrap()
            .rate_bits;
        assert_eq!(pixel, 16 * 16 * 12 + 24);
        assert_eq!(hybrid, text + pixel);
    }

    #[test]
    fn identity_pixel_scheme() {
        let ev = Evaluator::default();
        let scene = generate_scene(2, &GenerationConfig::default()).unwrap();
        let r = ev.score(&scene, SchemeId::Pixel { k: 256, bits: 8 }).unwrap();
        assert_eq!(r.pixel_fidelity, 1.0);
        assert_eq!(r.rate_bits, 256 * 256 * 24 + 24);
    }

    #[test]
    fn noise_token_scheme() {
        let ev = Evaluator::default();
        let mut scene = Scene::empty(Canvas::new(256, 256), Color::Gray);
        scene.kind = SceneKind::Noise;
        let r = ev.score(&scene, SchemeId::NoiseToken).unwrap();
        assert!(r.rate_bits <= 160);
        assert_eq!(r.text_fidelity, 1.0);
        assert_eq!(r.pixel_fidelity, 1.0);
    }
}
