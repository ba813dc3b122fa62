//! The textual transform: a scene becomes a budgeted list of quantized
//! objects with a canonical, line-oriented text form, and back.
//!
//! ```text
//! SCENE KIND=flat W=256 H=256 BG=white L=4 R=6 WD=2 N=1
//! OBJ circle AT 19 38 SIZE 12 ROT 0 DESC red
//! ```
//!
//! Geometry travels as quantizer indices, never as decimals, so parsing is
//! exact.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{Canvas, Image};
use crate::scene::{rendered_area, render, Scene, SceneKind, SceneObject, NOISY_RENDER_SIGMA};
use crate::vocab::{Color, Descriptor, Palette, Shape, Texture, NOISE_WORD};

pub const MAX_RESOLUTION_BITS: u8 = 16;
pub const MAX_WORDS_PER_OBJECT: u8 = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("resolution {0} exceeds 16 bits")]
    ResolutionTooLarge(u8),
    #[error("invalid budget (L={0}, R={1}, W={2})")]
    InvalidBudget(u8, u8, u8),
}

/// Rate-controlling triple: object count `L`, geometric resolution `R` in
/// bits per quantized scalar, descriptor words per object `W`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Budget {
    max_objects: u8,
    resolution_bits: u8,
    words_per_object: u8,
}

impl Budget {
    pub fn new(max_objects: u8, resolution_bits: u8, words_per_object: u8) -> Result<Self, TransformError> {
        if max_objects == 0
            || resolution_bits > MAX_RESOLUTION_BITS
            || words_per_object > MAX_WORDS_PER_OBJECT
        {
            return Err(TransformError::InvalidBudget(
                max_objects,
                resolution_bits,
                words_per_object,
            ));
        }
        Ok(Budget {
            max_objects,
            resolution_bits,
            words_per_object,
        })
    }

    pub fn max_objects(&self) -> u8 {
        self.max_objects
    }

    pub fn resolution_bits(&self) -> u8 {
        self.resolution_bits
    }

    pub fn words_per_object(&self) -> u8 {
        self.words_per_object
    }

    /// Number of quantizer cells per scalar, `2^R`.
    pub fn cells(&self) -> u32 {
        1u32 << self.resolution_bits
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.max_objects, self.resolution_bits, self.words_per_object)
    }
}

/// Uniform scalar quantizer on [0,1] with `2^bits` cells and midpoint
/// reconstruction.
pub fn quantize(v: f64, bits: u8) -> Result<(u32, f64), TransformError> {
    if bits > MAX_RESOLUTION_BITS {
        return Err(TransformError::ResolutionTooLarge(bits));
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(TransformError::OutOfRange(v));
    }
    let cells = 1u32 << bits;
    let index = (libm::floor(v * cells as f64) as u32).min(cells - 1);
    Ok((index, dequantize(index, bits)))
}

pub fn dequantize(index: u32, bits: u8) -> f64 {
    (index as f64 + 0.5) / (1u32 << bits) as f64
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuantizedObject {
    pub shape: Shape,
    pub qx: u32,
    pub qy: u32,
    pub qsize: u32,
    pub qrot: u32,
    /// At most `W` words; when nonempty the first is a color.
    pub descriptors: Vec<Descriptor>,
}

impl QuantizedObject {
    pub fn center(&self, bits: u8) -> (f64, f64) {
        (dequantize(self.qx, bits), dequantize(self.qy, bits))
    }

    pub fn size(&self, bits: u8) -> f64 {
        dequantize(self.qsize, bits)
    }

    pub fn orientation(&self, bits: u8) -> f64 {
        dequantize(self.qrot, bits)
    }

    fn to_scene_object(&self, bits: u8, fallback: Color) -> SceneObject {
        let mut descriptors = self.descriptors.clone();
        if descriptors.first().and_then(|d| d.color()).is_none() {
            descriptors.insert(0, Descriptor::Color(fallback));
        }
        SceneObject {
            shape: self.shape,
            center: self.center(bits),
            size: self.size(bits),
            orientation: self.orientation(bits),
            descriptors,
        }
    }
}

/// A point in the transform domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TextualRepresentation {
    pub kind: SceneKind,
    pub budget: Budget,
    pub canvas: Canvas,
    pub background: Color,
    pub objects: Vec<QuantizedObject>,
}

impl TextualRepresentation {
    pub fn noise(canvas: Canvas, background: Color, budget: Budget) -> Self {
        TextualRepresentation {
            kind: SceneKind::Noise,
            budget,
            canvas,
            background,
            objects: Vec::new(),
        }
    }

    /// Checks every budget and vocabulary invariant. Returns a short reason.
    pub fn validate(&self) -> Result<(), &'static str> {
        if !self.canvas.is_valid() {
            return Err("canvas outside [16, 4096]");
        }
        if self.kind == SceneKind::Noise && !self.objects.is_empty() {
            return Err("noise representation with objects");
        }
        if self.objects.len() > self.budget.max_objects as usize {
            return Err("more objects than L");
        }
        let cells = self.budget.cells();
        for o in &self.objects {
            if o.qx >= cells || o.qy >= cells || o.qsize >= cells || o.qrot >= cells {
                return Err("index not below 2^R");
            }
            if o.descriptors.len() > self.budget.words_per_object as usize {
                return Err("more descriptor words than W");
            }
            if let Some(first) = o.descriptors.first() {
                if first.color().is_none() {
                    return Err("first descriptor is not a color");
                }
            }
        }
        Ok(())
    }

    /// Orders objects by rendered area of their quantized geometry, largest
    /// first; ties by class word, then `qy`, `qx`, and the remaining fields.
    pub fn sort_by_salience(&mut self) {
        let bits = self.budget.resolution_bits;
        let canvas = self.canvas;
        let mut keyed: Vec<(u64, QuantizedObject)> = core::mem::take(&mut self.objects)
            .into_iter()
            .map(|o| (rendered_area(&o.to_scene_object(bits, Color::Black), canvas), o))
            .collect();
        keyed.sort_by(|(area_a, a), (area_b, b)| {
            area_b
                .cmp(area_a)
                .then_with(|| a.shape.word().cmp(b.shape.word()))
                .then_with(|| a.qy.cmp(&b.qy))
                .then_with(|| a.qx.cmp(&b.qx))
                .then_with(|| a.qsize.cmp(&b.qsize))
                .then_with(|| a.qrot.cmp(&b.qrot))
                .then_with(|| compare_words(&a.descriptors, &b.descriptors))
        });
        self.objects = keyed.into_iter().map(|(_, o)| o).collect();
    }

    /// Whitespace-separated words in the canonical text.
    pub fn word_count(&self) -> usize {
        serialize(self).split_ascii_whitespace().count()
    }
}

fn compare_words(a: &[Descriptor], b: &[Descriptor]) -> Ordering {
    a.iter().map(|d| d.word()).cmp(b.iter().map(|d| d.word()))
}

/// Forward transform: keep the `L` largest objects by rendered area, quantize
/// their geometry at `R` bits and their descriptor lists to the first `W`
/// words.
pub fn forward(scene: &Scene, budget: Budget) -> TextualRepresentation {
    let mut rep = TextualRepresentation {
        kind: scene.kind,
        budget,
        canvas: scene.canvas,
        background: scene.background,
        objects: Vec::new(),
    };
    if scene.kind == SceneKind::Noise {
        return rep;
    }
    let bits = budget.resolution_bits;
    let q = |v: f64| quantize(v.clamp(0.0, 1.0), bits).map(|(i, _)| i).unwrap_or(0);

    let mut quantized: Vec<(u64, QuantizedObject)> = scene
        .objects
        .iter()
        .map(|o| {
            let qo = QuantizedObject {
                shape: o.shape,
                qx: q(o.center.0),
                qy: q(o.center.1),
                qsize: q(o.size),
                qrot: q(o.orientation),
                descriptors: o
                    .descriptors
                    .iter()
                    .take(budget.words_per_object as usize)
                    .copied()
                    .collect(),
            };
            (rendered_area(o, scene.canvas), qo)
        })
        .collect();
    quantized.sort_by(|(area_a, a), (area_b, b)| {
        area_b
            .cmp(area_a)
            .then_with(|| a.shape.word().cmp(b.shape.word()))
            .then_with(|| a.qy.cmp(&b.qy))
            .then_with(|| a.qx.cmp(&b.qx))
    });
    quantized.truncate(budget.max_objects as usize);
    rep.objects = quantized.into_iter().map(|(_, o)| o).collect();
    rep.sort_by_salience();
    rep
}

/// First stage of the inverse: midpoint-reconstructed geometry. An object
/// without a color word is painted in the color farthest from the
/// background; any `noisy` word turns on luminance noise.
pub fn dequantize_scene(rep: &TextualRepresentation, palette: &Palette) -> Scene {
    let bits = rep.budget.resolution_bits;
    let fallback = palette.contrasting(rep.background);
    let objects: Vec<SceneObject> = rep
        .objects
        .iter()
        .map(|o| o.to_scene_object(bits, fallback))
        .collect();
    let noisy = objects.iter().any(|o| o.has_texture(Texture::Noisy));
    Scene {
        kind: rep.kind,
        objects,
        canvas: rep.canvas,
        background: rep.background,
        noise_sigma: if noisy { NOISY_RENDER_SIGMA } else { 0.0 },
    }
}

pub fn inverse(rep: &TextualRepresentation, palette: &Palette) -> Image {
    render(&dequantize_scene(rep, palette), palette)
}

/// Canonical text. Injective on valid representations.
pub fn serialize(rep: &TextualRepresentation) -> String {
    let mut out = String::new();
    let b = rep.budget;
    let _ = writeln!(
        out,
        "SCENE KIND={} W={} H={} BG={} L={} R={} WD={} N={}",
        rep.kind.word(),
        rep.canvas.width,
        rep.canvas.height,
        rep.background,
        b.max_objects,
        b.resolution_bits,
        b.words_per_object,
        rep.objects.len()
    );
    for o in &rep.objects {
        let _ = write!(
            out,
            "OBJ {} AT {} {} SIZE {} ROT {}",
            o.shape, o.qx, o.qy, o.qsize, o.qrot
        );
        if !o.descriptors.is_empty() {
            out.push_str(" DESC");
            for d in &o.descriptors {
                out.push(' ');
                out.push_str(d.word());
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    MalformedHeader,
    MalformedObject,
    UnknownWord,
    IndexOutOfRange,
    CountMismatch,
    BudgetViolation,
    DescriptorOrder,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::MalformedHeader => "malformed header",
            ParseErrorKind::MalformedObject => "malformed object line",
            ParseErrorKind::UnknownWord => "unknown word",
            ParseErrorKind::IndexOutOfRange => "index out of range",
            ParseErrorKind::CountMismatch => "object count mismatch",
            ParseErrorKind::BudgetViolation => "budget violation",
            ParseErrorKind::DescriptorOrder => "descriptor order",
        })
    }
}

/// Parse failure with a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at line {line}, column {column}: {detail}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub detail: String,
}

struct Field<'a> {
    text: &'a str,
    column: usize,
}

fn fields(line: &str) -> Vec<Field<'_>> {
    let mut out = Vec::new();
    let mut column = 1;
    for text in line.split(' ') {
        out.push(Field { text, column });
        column += text.len() + 1;
    }
    out
}

struct Parser {
    line: usize,
}

impl Parser {
    fn err(&self, kind: ParseErrorKind, column: usize, detail: impl Into<String>) -> ParseError {
        ParseError {
            kind,
            line: self.line,
            column,
            detail: detail.into(),
        }
    }

    fn number(&self, field: &Field<'_>, kind: ParseErrorKind) -> Result<u32, ParseError> {
        let t = field.text;
        let canonical = !t.is_empty()
            && t.bytes().all(|b| b.is_ascii_digit())
            && (t == "0" || !t.starts_with('0'));
        if !canonical {
            return Err(self.err(kind, field.column, format!("expected integer, found {t:?}")));
        }
        t.parse()
            .map_err(|_| self.err(kind, field.column, format!("integer {t} too large")))
    }

    fn keyed<'a>(&self, field: &Field<'a>, key: &str) -> Result<Field<'a>, ParseError> {
        match field.text.strip_prefix(key).and_then(|r| r.strip_prefix('=')) {
            Some(value) => Ok(Field {
                text: value,
                column: field.column + key.len() + 1,
            }),
            None => Err(self.err(
                ParseErrorKind::MalformedHeader,
                field.column,
                format!("expected {key}=, found {:?}", field.text),
            )),
        }
    }
}

/// Exact inverse of [`serialize`]; rejects anything that is not canonical.
pub fn parse(text: &str) -> Result<TextualRepresentation, ParseError> {
    let mut p = Parser { line: 1 };
    let body = match text.strip_suffix('\n') {
        Some(b) => b,
        None => {
            let line = text.split('\n').count();
            let column = text.rsplit('\n').next().map_or(0, str::len) + 1;
            return Err(ParseError {
                kind: if line == 1 {
                    ParseErrorKind::MalformedHeader
                } else {
                    ParseErrorKind::MalformedObject
                },
                line,
                column,
                detail: "missing final newline".into(),
            });
        }
    };
    let mut lines = body.split('\n');
    let header = fields(lines.next().unwrap_or(""));
    if header.len() != 9 || header[0].text != "SCENE" {
        return Err(p.err(
            ParseErrorKind::MalformedHeader,
            1,
            "expected SCENE KIND= W= H= BG= L= R= WD= N=",
        ));
    }
    let kind_field = p.keyed(&header[1], "KIND")?;
    let kind = match kind_field.text {
        "flat" => SceneKind::Flat,
        "noise" => SceneKind::Noise,
        other => {
            return Err(p.err(ParseErrorKind::UnknownWord, kind_field.column, format!("scene kind {other:?}")))
        }
    };
    let mh = ParseErrorKind::MalformedHeader;
    let width_field = p.keyed(&header[2], "W")?;
    let width = p.number(&width_field, mh)?;
    let height_field = p.keyed(&header[3], "H")?;
    let height = p.number(&height_field, mh)?;
    let canvas = Canvas::new(width, height);
    if !canvas.is_valid() {
        return Err(p.err(mh, width_field.column, format!("canvas {width}x{height} outside [16, 4096]")));
    }
    let bg_field = p.keyed(&header[4], "BG")?;
    let background = Color::from_word(bg_field.text).ok_or_else(|| {
        p.err(ParseErrorKind::UnknownWord, bg_field.column, format!("background color {:?}", bg_field.text))
    })?;
    let mut budget_values = [0u32; 3];
    for (slot, (field, key)) in budget_values
        .iter_mut()
        .zip(header[5..8].iter().zip(["L", "R", "WD"]))
    {
        let f = p.keyed(field, key)?;
        *slot = p.number(&f, mh)?;
    }
    let [l, r, wd] = budget_values;
    let budget = u8::try_from(l)
        .ok()
        .zip(u8::try_from(r).ok())
        .zip(u8::try_from(wd).ok())
        .and_then(|((l, r), wd)| Budget::new(l, r, wd).ok())
        .ok_or_else(|| {
            p.err(
                ParseErrorKind::BudgetViolation,
                header[5].column,
                format!("budget (L={l}, R={r}, WD={wd}) outside L 1..255, R 0..16, WD 0..8"),
            )
        })?;
    let n_field = p.keyed(&header[8], "N")?;
    let declared = p.number(&n_field, mh)?;
    if declared > budget.max_objects as u32 {
        return Err(p.err(ParseErrorKind::BudgetViolation, n_field.column, format!("N={declared} exceeds L={l}")));
    }
    if kind == SceneKind::Noise && declared != 0 {
        return Err(p.err(ParseErrorKind::CountMismatch, n_field.column, "noise scene must have N=0"));
    }

    let mut objects = Vec::new();
    for line in lines {
        p.line += 1;
        if objects.len() as u32 == declared {
            return Err(p.err(ParseErrorKind::CountMismatch, 1, format!("more than N={declared} object lines")));
        }
        objects.push(parse_object(&p, line, budget)?);
    }
    if objects.len() as u32 != declared {
        return Err(ParseError {
            kind: ParseErrorKind::CountMismatch,
            line: 1,
            column: n_field.column,
            detail: format!("N={declared} but {} object lines", objects.len()),
        });
    }
    Ok(TextualRepresentation {
        kind,
        budget,
        canvas,
        background,
        objects,
    })
}

fn parse_object(p: &Parser, line: &str, budget: Budget) -> Result<QuantizedObject, ParseError> {
    let mo = ParseErrorKind::MalformedObject;
    let f = fields(line);
    let layout_ok = f.len() >= 9
        && f[0].text == "OBJ"
        && f[2].text == "AT"
        && f[5].text == "SIZE"
        && f[7].text == "ROT"
        && (f.len() == 9 || (f[9].text == "DESC" && f.len() > 10));
    if !layout_ok {
        return Err(p.err(mo, 1, "expected OBJ <class> AT <x> <y> SIZE <s> ROT <r> [DESC <words>]"));
    }
    let shape = Shape::from_word(f[1].text).ok_or_else(|| {
        let detail = if f[1].text == NOISE_WORD {
            format!("{NOISE_WORD:?} is reserved for noise scenes")
        } else {
            format!("object class {:?}", f[1].text)
        };
        p.err(ParseErrorKind::UnknownWord, f[1].column, detail)
    })?;
    let cells = budget.cells();
    let index = |field: &Field<'_>| -> Result<u32, ParseError> {
        let v = p.number(field, mo)?;
        if v >= cells {
            return Err(p.err(
                ParseErrorKind::IndexOutOfRange,
                field.column,
                format!("index {v} not below 2^R = {cells}"),
            ));
        }
        Ok(v)
    };
    let qx = index(&f[3])?;
    let qy = index(&f[4])?;
    let qsize = index(&f[6])?;
    let qrot = index(&f[8])?;

    let mut descriptors = Vec::new();
    for field in f.iter().skip(10) {
        let d = Descriptor::from_word(field.text).ok_or_else(|| {
            p.err(ParseErrorKind::UnknownWord, field.column, format!("descriptor {:?}", field.text))
        })?;
        if descriptors.is_empty() && d.color().is_none() {
            return Err(p.err(
                ParseErrorKind::DescriptorOrder,
                field.column,
                format!("first descriptor {:?} is not a color", field.text),
            ));
        }
        descriptors.push(d);
    }
    if descriptors.len() > budget.words_per_object as usize {
        return Err(p.err(
            ParseErrorKind::BudgetViolation,
            f[9].column,
            format!("{} descriptor words exceed WD={}", descriptors.len(), budget.words_per_object),
        ));
    }
    Ok(QuantizedObject {
        shape,
        qx,
        qy,
        qsize,
        qrot,
        descriptors,
    })
}

/// A uniformly drawn valid representation, for codec corpora and property
/// tests. About one in ten is a noise representation.
pub fn random_representation(seed: u64, budget: Budget, canvas: Canvas) -> TextualRepresentation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = Color::ALL[rng.random_range(0..Color::ALL.len())];
    if rng.random_bool(0.1) {
        return TextualRepresentation::noise(canvas, background, budget);
    }
    let cells = budget.cells();
    let count = rng.random_range(0..=budget.max_objects as usize);
    let objects = (0..count)
        .map(|_| {
            let words = rng.random_range(0..=budget.words_per_object as usize);
            let descriptors = (0..words)
                .map(|i| {
                    if i == 0 {
                        Descriptor::Color(Color::ALL[rng.random_range(0..Color::ALL.len())])
                    } else {
                        Descriptor::from_index(rng.random_range(0..Descriptor::COUNT)).expect("in range")
                    }
                })
                .collect();
            QuantizedObject {
                shape: Shape::ALL[rng.random_range(0..Shape::ALL.len())],
                qx: rng.random_range(0..cells),
                qy: rng.random_range(0..cells),
                qsize: rng.random_range(0..cells),
                qrot: rng.random_range(0..cells),
                descriptors,
            }
        })
        .collect();
    TextualRepresentation {
        kind: SceneKind::Flat,
        budget,
        canvas,
        background,
        objects,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn budget(l: u8, r: u8, w: u8) -> Budget {
        Budget::new(l, r, w).unwrap()
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.3, 2).unwrap(), (1, 0.375));
        assert_eq!(quantize(0.7, 0).unwrap(), (0, 0.5));
        assert_eq!(quantize(1.0, 3).unwrap(), (7, 0.9375));
        assert!(matches!(quantize(1.5, 3), Err(TransformError::OutOfRange(_))));
        assert!(matches!(quantize(-0.1, 3), Err(TransformError::OutOfRange(_))));
        assert!(matches!(quantize(0.5, 17), Err(TransformError::ResolutionTooLarge(17))));
    }

    #[test]
    fn budget_ranges() {
        assert!(Budget::new(0, 4, 2).is_err());
        assert!(Budget::new(1, 17, 2).is_err());
        assert!(Budget::new(1, 16, 9).is_err());
        assert!(Budget::new(255, 16, 8).is_ok());
    }

    #[test]
    fn forward_of_noise_scene_is_empty() {
        let mut scene = Scene::empty(Canvas::new(64, 64), Color::White);
        scene.kind = SceneKind::Noise;
        let rep = forward(&scene, budget(4, 6, 2));
        assert_eq!(rep.kind, SceneKind::Noise);
        assert!(rep.objects.is_empty());
    }

    #[test]
    fn forward_quantizes_hand_example() {
        let mut scene = Scene::empty(Canvas::new(256, 256), Color::White);
        scene.objects.push(SceneObject {
            shape: Shape::Circle,
            center: (0.30, 0.60),
            size: 0.20,
            orientation: 0.0,
            descriptors: vec![Color::Red.into()],
        });
        let rep = forward(&scene, budget(4, 4, 2));
        let o = &rep.objects[0];
        // floor(0.3*16)=4, floor(0.6*16)=9, floor(0.2*16)=3
        assert_eq!((o.qx, o.qy, o.qsize), (4, 9, 3));
    }

    #[test]
    fn forward_keeps_largest_objects() {
        let mut scene = Scene::empty(Canvas::new(256, 256), Color::White);
        let sizes = [0.10, 0.25, 0.12, 0.20, 0.08];
        for (i, &size) in sizes.iter().enumerate() {
            scene.objects.push(SceneObject {
                shape: Shape::Circle,
                center: (0.1 + 0.18 * i as f64, 0.5),
                size,
                orientation: 0.0,
                descriptors: vec![Color::Blue.into()],
            });
        }
        let rep = forward(&scene, budget(2, 6, 1));
        assert_eq!(rep.objects.len(), 2);
        assert_eq!(rep.objects[0].qsize, quantize(0.25, 6).unwrap().0);
        assert_eq!(rep.objects[1].qsize, quantize(0.20, 6).unwrap().0);
    }

    #[test]
    fn serialize_noise_and_empty() {
        let rep = TextualRepresentation::noise(Canvas::new(256, 256), Color::White, budget(4, 6, 2));
        assert_eq!(
            serialize(&rep),
            "SCENE KIND=noise W=256 H=256 BG=white L=4 R=6 WD=2 N=0\n"
        );
        let mut flat = rep.clone();
        flat.kind = SceneKind::Flat;
        let text = serialize(&flat);
        assert_eq!(text.lines().count(), 1);
        assert!(text.ends_with("N=0\n"));
        assert_eq!(parse(&text).unwrap(), flat);
    }

    #[test]
    fn serialize_object_line() {
        let rep = TextualRepresentation {
            kind: SceneKind::Flat,
            budget: budget(4, 6, 2),
            canvas: Canvas::new(256, 128),
            background: Color::Gray,
            objects: vec![
                QuantizedObject {
                    shape: Shape::Ring,
                    qx: 1,
                    qy: 63,
                    qsize: 10,
                    qrot: 0,
                    descriptors: vec![Color::Red.into(), Texture::Noisy.into()],
                },
                QuantizedObject {
                    shape: Shape::Bar,
                    qx: 0,
                    qy: 0,
                    qsize: 0,
                    qrot: 5,
                    descriptors: vec![],
                },
            ],
        };
        let text = serialize(&rep);
        assert_eq!(
            text,
            "SCENE KIND=flat W=256 H=128 BG=gray L=4 R=6 WD=2 N=2\n\
             OBJ ring AT 1 63 SIZE 10 ROT 0 DESC red noisy\n\
             OBJ bar AT 0 0 SIZE 0 ROT 5\n"
        );
        assert_eq!(parse(&text).unwrap(), rep);
    }

    fn parse_err(text: &str) -> ParseError {
        parse(text).unwrap_err()
    }

    #[test]
    fn parse_errors_are_distinct() {
        let head = "SCENE KIND=flat W=64 H=64 BG=white L=2 R=2 WD=1 N=1\n";
        let e = parse_err(&format!("{head}OBJ blob AT 0 0 SIZE 0 ROT 0\n"));
        assert_eq!((e.kind, e.line, e.column), (ParseErrorKind::UnknownWord, 2, 5));

        let e = parse_err(&format!("{head}OBJ circle AT 4 0 SIZE 0 ROT 0\n"));
        assert_eq!((e.kind, e.line, e.column), (ParseErrorKind::IndexOutOfRange, 2, 15));

        let e = parse_err(&format!("{head}OBJ circle AT 1 0 SIZE 0 ROT 0 DESC red solid\n"));
        assert_eq!(e.kind, ParseErrorKind::BudgetViolation);

        let e = parse_err(&format!("{head}OBJ circle AT 1 0 SIZE 0 ROT 0 DESC solid\n"));
        assert_eq!(e.kind, ParseErrorKind::DescriptorOrder);

        let e = parse_err(head);
        assert_eq!(e.kind, ParseErrorKind::CountMismatch);

        let e = parse_err("SCENE KIND=flat W=64 H=64 BG=white L=2 R=2 WD=1 N=3\n");
        assert_eq!(e.kind, ParseErrorKind::BudgetViolation);

        let e = parse_err("SCENE KIND=flat W=64 H=64 BG=white L=2 R=2\n");
        assert_eq!(e.kind, ParseErrorKind::MalformedHeader);

        let e = parse_err("SCENE KIND=flat W=064 H=64 BG=white L=2 R=2 WD=1 N=0\n");
        assert_eq!((e.kind, e.column), (ParseErrorKind::MalformedHeader, 19));

        let e = parse_err("SCENE KIND=flat W=64 H=64 BG=white L=2 R=2 WD=1 N=0");
        assert_eq!(e.kind, ParseErrorKind::MalformedHeader);

        let e = parse_err("SCENE KIND=flat W=64 H=64 BG=mauve L=2 R=2 WD=1 N=0\n");
        assert_eq!(e.kind, ParseErrorKind::UnknownWord);

        let e = parse_err(&format!("{head}OBJ noise AT 0 0 SIZE 0 ROT 0\n"));
        assert_eq!(e.kind, ParseErrorKind::UnknownWord);

        let e = parse_err(&format!("{head}OBJ circle AT 0  0 SIZE 0 ROT 0\n"));
        assert_eq!(e.kind, ParseErrorKind::MalformedObject);
    }

    #[test]
    fn dequantize_midpoints() {
        let rep = TextualRepresentation {
            kind: SceneKind::Flat,
            budget: budget(1, 2, 0),
            canvas: Canvas::new(64, 64),
            background: Color::White,
            objects: vec![QuantizedObject {
                shape: Shape::Square,
                qx: 1,
                qy: 2,
                qsize: 3,
                qrot: 0,
                descriptors: vec![],
            }],
        };
        let scene = dequantize_scene(&rep, &Palette::default());
        let o = &scene.objects[0];
        assert_eq!(o.center, (0.375, 0.625));
        assert_eq!(o.size, 0.875);
        assert_eq!(o.descriptors, vec![Descriptor::Color(Color::Black)]);

        let noise = TextualRepresentation::noise(Canvas::new(64, 64), Color::Red, budget(1, 2, 0));
        assert_eq!(dequantize_scene(&noise, &Palette::default()).kind, SceneKind::Noise);
    }

    #[test]
    fn inverse_of_empty_white_rep() {
        let rep = TextualRepresentation {
            kind: SceneKind::Flat,
            budget: budget(1, 2, 0),
            canvas: Canvas::new(32, 32),
            background: Color::White,
            objects: vec![],
        };
        let image = inverse(&rep, &Palette::default());
        assert!(image.pixels().iter().all(|&p| p == [255, 255, 255]));
    }

    #[test]
    fn noisy_word_turns_on_noise() {
        let mut rep = random_representation(3, budget(3, 5, 2), Canvas::new(32, 32));
        rep.kind = SceneKind::Flat;
        rep.objects = vec![QuantizedObject {
            shape: Shape::Circle,
            qx: 16,
            qy: 16,
            qsize: 16,
            qrot: 0,
            descriptors: vec![Color::Red.into(), Texture::Noisy.into()],
        }];
        let palette = Palette::default();
        assert_eq!(dequantize_scene(&rep, &palette).noise_sigma, NOISY_RENDER_SIGMA);
        rep.objects[0].descriptors[1] = Texture::Crisp.into();
        assert_eq!(dequantize_scene(&rep, &palette).noise_sigma, 0.0);
    }

    #[test]
    fn random_representations_are_valid() {
        for seed in 0..200 {
            let rep = random_representation(seed, budget(16, 10, 4), Canvas::new(64, 48));
            rep.validate().unwrap();
        }
    }
}
