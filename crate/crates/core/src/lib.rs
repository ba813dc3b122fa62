//! Textual transform coding for a deterministic synthetic-scene domain.
//!
//! An image is described by a short, budgeted list of objects (what they are,
//! where they are, how large, how rotated, a few descriptor words). That list
//! is the transform-domain representation: it serializes to a canonical text,
//! entropy-codes to a handful of bits, and renders back to pixels.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! files and the command line live in the companion `ttc` crate.

#![no_std]
// NaN must fail range checks, so `!(x >= 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analyzer;
pub mod apps;
pub mod eval;
pub mod image;
mod matching;
pub mod metrics;
pub mod pixelcodec;
pub mod rdtheory;
pub mod scene;
pub mod textcodec;
pub mod transform;
pub mod vocab;

pub use analyzer::{Analyzer, AnalyzerConfig, Component};
pub use eval::{Evaluator, SchemeId};
pub use image::{Canvas, Image, Rgb};
pub use metrics::{FidelityReport, MatchWeights, SatisfactionConfig};
pub use scene::{GenerationConfig, OverlapMode, Scene, SceneKind, SceneObject};
pub use textcodec::Bitstream;
pub use transform::{Budget, QuantizedObject, TextualRepresentation};
pub use vocab::{Color, Descriptor, Palette, Shape, Texture};
