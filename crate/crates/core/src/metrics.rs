//! Fidelity scores: pixel-wise (PSNR, SSIM), textual (matching between
//! object lists) and the satisfaction functional that combines them.

use alloc::vec;
use alloc::vec::Vec;

use crate::image::{Image, Rgb};
use crate::matching::max_weight_matching;
use crate::scene::SceneKind;
use crate::transform::{QuantizedObject, TextualRepresentation};
use crate::vocab::Descriptor;

pub const PSNR_CAP_DB: f64 = 100.0;
const SSIM_WINDOW: usize = 8;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("image {0}x{1} smaller than the 8x8 SSIM window")]
    TooSmall(u32, u32),
    #[error("representations describe different canvases")]
    CanvasMismatch,
    #[error("fidelity argument {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid satisfaction config: {0}")]
    InvalidConfig(&'static str),
}

fn same_dims(a: &Image, b: &Image) -> Result<(), MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::DimensionMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

/// Peak signal-to-noise ratio over all three channels, capped at 100 dB.
pub fn psnr(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    same_dims(a, b)?;
    let sse: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| p.iter().zip(q).map(|(&x, &y)| (x as i64 - y as i64).pow(2) as u64))
        .sum();
    if sse == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sse as f64 / (a.pixels().len() * 3) as f64;
    Ok((10.0 * libm::log10(255.0 * 255.0 / mse)).min(PSNR_CAP_DB))
}

/// Luma scaled by 1000 so that window sums are exact integers.
pub(crate) fn luma_milli(image: &Image) -> Vec<i64> {
    image.pixels().iter().map(|&p| luma_milli_of(p)).collect()
}

pub(crate) fn luma_milli_of(p: Rgb) -> i64 {
    299 * p[0] as i64 + 587 * p[1] as i64 + 114 * p[2] as i64
}

/// Summed-area table with a zero guard row and column.
struct Integral {
    stride: usize,
    data: Vec<i128>,
}

impl Integral {
    fn new(width: usize, height: usize, value: impl Fn(usize) -> i128) -> Self {
        let stride = width + 1;
        let mut data = vec![0i128; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0i128;
            for x in 0..width {
                row += value(y * width + x);
                data[(y + 1) * stride + x + 1] = data[y * stride + x + 1] + row;
            }
        }
        Integral { stride, data }
    }

    fn window(&self, x: usize, y: usize, n: usize) -> i128 {
        let s = self.stride;
        self.data[(y + n) * s + x + n] - self.data[y * s + x + n] - self.data[(y + n) * s + x]
            + self.data[y * s + x]
    }
}

/// SSIM of one 8x8 window from its sums of `a`, `b`, `a^2`, `b^2`, `ab`
/// (luma in thousandths).
fn window_ssim(ta: i128, tb: i128, taa: i128, tbb: i128, tab: i128) -> f64 {
    let n = (SSIM_WINDOW * SSIM_WINDOW) as i128;
    // Moments carry a factor 1000 per luma value; undo it in floating point.
    let scale = 1000.0 * n as f64;
    let scale2 = scale * scale;
    let mu_a = ta as f64 / scale;
    let mu_b = tb as f64 / scale;
    let var_a = (n * taa - ta * ta) as f64 / scale2;
    let var_b = (n * tbb - tb * tb) as f64 / scale2;
    let cov = (n * tab - ta * tb) as f64 / scale2;
    let num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
    let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
    num / den
}

/// Sum of window SSIMs over the windows touching the pixel rectangle
/// `[x0, x1) x [y0, y1)`, computed directly from two luma planes of the
/// given width (see `luma_milli`).
pub(crate) fn ssim_sum_near(a: &[i64], b: &[i64], width: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> f64 {
    let height = a.len() / width;
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return 0.0;
    }
    let first = |v: usize| v.saturating_sub(SSIM_WINDOW - 1);
    let last = |v: usize, extent: usize| (v - 1).min(extent - SSIM_WINDOW);
    let mut total = 0.0;
    for wy in first(y0)..=last(y1, height) {
        for wx in first(x0)..=last(x1, width) {
            let (mut ta, mut tb, mut taa, mut tbb, mut tab) = (0i128, 0i128, 0i128, 0i128, 0i128);
            for y in wy..wy + SSIM_WINDOW {
                for x in wx..wx + SSIM_WINDOW {
                    let (p, q) = (a[y * width + x] as i128, b[y * width + x] as i128);
                    ta += p;
                    tb += q;
                    taa += p * p;
                    tbb += q * q;
                    tab += p * q;
                }
            }
            total += window_ssim(ta, tb, taa, tbb, tab);
        }
    }
    total
}

/// Mean SSIM on BT.601 luma over every 8x8 window (stride 1).
pub fn ssim(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    same_dims(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall(a.width(), a.height()));
    }
    let la = luma_milli(a);
    let lb = luma_milli(b);
    let sa = Integral::new(w, h, |i| la[i] as i128);
    let sb = Integral::new(w, h, |i| lb[i] as i128);
    let saa = Integral::new(w, h, |i| (la[i] * la[i]) as i128);
    let sbb = Integral::new(w, h, |i| (lb[i] * lb[i]) as i128);
    let sab = Integral::new(w, h, |i| (la[i] * lb[i]) as i128);

    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - SSIM_WINDOW {
        for x in 0..=w - SSIM_WINDOW {
            total += window_ssim(
                sa.window(x, y, SSIM_WINDOW),
                sb.window(x, y, SSIM_WINDOW),
                saa.window(x, y, SSIM_WINDOW),
                sbb.window(x, y, SSIM_WINDOW),
                sab.window(x, y, SSIM_WINDOW),
            );
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM clamped to [0, 1].
pub fn pixel_fidelity(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    Ok(ssim(a, b)?.clamp(0.0, 1.0))
}

/// Weights of the per-pair object similarity used by [`textual_fidelity`].
#[derive(Clone, Debug, PartialEq)]
pub struct MatchWeights {
    pub class: f64,
    pub geometry: f64,
    pub descriptors: f64,
    /// Distance at which the geometry term decays to 1/e.
    pub distance_scale: f64,
}

impl Default for MatchWeights {
    fn default() -> Self {
        MatchWeights {
            class: 0.5,
            geometry: 0.3,
            descriptors: 0.2,
            distance_scale: 0.25,
        }
    }
}

/// Distance between two orientations (fractions of 180 degrees). When both
/// objects share a class, angles are compared modulo that class's symmetry
/// period; rotationally invariant classes have no orientation to compare.
pub fn orientation_distance(a: &QuantizedObject, b: &QuantizedObject, bits_a: u8, bits_b: u8) -> f64 {
    let period = if a.shape == b.shape {
        a.shape.orientation_period()
    } else {
        1.0
    };
    if period == 0.0 {
        return 0.0;
    }
    let d = libm::fmod(libm::fabs(a.orientation(bits_a) - b.orientation(bits_b)), period);
    d.min(period - d)
}

fn jaccard(a: &[Descriptor], b: &[Descriptor]) -> f64 {
    let mut sa: Vec<Descriptor> = a.to_vec();
    let mut sb: Vec<Descriptor> = b.to_vec();
    sa.sort_unstable();
    sa.dedup();
    sb.sort_unstable();
    sb.dedup();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.iter().filter(|d| sb.binary_search(d).is_ok()).count();
    let union = sa.len() + sb.len() - inter;
    inter as f64 / union as f64
}

/// Pairwise score in [0, 1] between two described objects.
pub fn object_similarity(
    a: &QuantizedObject,
    bits_a: u8,
    b: &QuantizedObject,
    bits_b: u8,
    weights: &MatchWeights,
) -> f64 {
    let (ax, ay) = a.center(bits_a);
    let (bx, by) = b.center(bits_b);
    let d = libm::sqrt((ax - bx) * (ax - bx) + (ay - by) * (ay - by))
        + libm::fabs(a.size(bits_a) - b.size(bits_b))
        + orientation_distance(a, b, bits_a, bits_b);
    let class = if a.shape == b.shape { 1.0 } else { 0.0 };
    weights.class * class
        + weights.geometry * libm::exp(-d / weights.distance_scale)
        + weights.descriptors * jaccard(&a.descriptors, &b.descriptors)
}

/// Similarity of two representations: optimal one-to-one matching of their
/// objects, normalized by the larger object count.
pub fn textual_fidelity(
    a: &TextualRepresentation,
    b: &TextualRepresentation,
    weights: &MatchWeights,
) -> Result<f64, MetricsError> {
    if a.canvas != b.canvas {
        return Err(MetricsError::CanvasMismatch);
    }
    match (a.kind, b.kind) {
        (SceneKind::Noise, SceneKind::Noise) => return Ok(1.0),
        (SceneKind::Noise, _) | (_, SceneKind::Noise) => return Ok(0.0),
        _ => {}
    }
    let (na, nb) = (a.objects.len(), b.objects.len());
    if na == 0 && nb == 0 {
        return Ok(1.0);
    }
    let (ra, rb) = (a.budget.resolution_bits(), b.budget.resolution_bits());
    let scores: Vec<f64> = a
        .objects
        .iter()
        .flat_map(|oa| b.objects.iter().map(move |ob| (oa, ob)))
        .map(|(oa, ob)| object_similarity(oa, ra, ob, rb, weights))
        .collect();
    let (total, _) = max_weight_matching(&scores, na, nb);
    Ok((total / na.max(nb) as f64).clamp(0.0, 1.0))
}

/// Knobs of the satisfaction functional.
#[derive(Clone, Debug, PartialEq)]
pub struct SatisfactionConfig {
    /// Satisfaction reachable from a perfect description alone.
    pub text_ceiling: f64,
    /// Pixel fidelity at which the blend hands over from text to pixels.
    pub blend_midpoint: f64,
    /// Width of the hand-over.
    pub blend_sharpness: f64,
}

impl Default for SatisfactionConfig {
    fn default() -> Self {
        SatisfactionConfig {
            text_ceiling: 0.6,
            blend_midpoint: 0.5,
            blend_sharpness: 0.1,
        }
    }
}

impl SatisfactionConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.text_ceiling > 0.0 && self.text_ceiling <= 1.0) {
            return Err(MetricsError::InvalidConfig("text_ceiling outside (0, 1]"));
        }
        if !(self.blend_sharpness > 0.0) || !self.blend_sharpness.is_finite() {
            return Err(MetricsError::InvalidConfig("blend_sharpness must be positive"));
        }
        if !self.blend_midpoint.is_finite() {
            return Err(MetricsError::InvalidConfig("blend_midpoint must be finite"));
        }
        Ok(())
    }

    fn weight(&self, pixel: f64) -> f64 {
        1.0 / (1.0 + libm::exp(-(pixel - self.blend_midpoint) / self.blend_sharpness))
    }

    /// Logistic hand-over from the text term to the pixel term.
    pub fn blend(&self, text: f64, pixel: f64) -> f64 {
        let w = self.weight(pixel);
        (1.0 - w) * self.text_ceiling * text + w * pixel
    }

    /// Pixel fidelity at which `blend(text, .)` is smallest. The blend falls
    /// and then rises in its second argument, with the turning point where
    /// `(1 - w)(pixel - ceiling*text)/sharpness + 1` changes sign.
    fn turning_point(&self, text: f64) -> f64 {
        let anchor = self.text_ceiling * text;
        let slope_sign =
            |p: f64| (1.0 - self.weight(p)) * (p - anchor) / self.blend_sharpness + 1.0;
        if slope_sign(0.0) >= 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, anchor);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope_sign(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Satisfaction from textual fidelity `text` and pixel fidelity `pixel`.
///
/// The logistic blend `(1 - w(p)) * A * t + w(p) * p` with
/// `w(p) = 1 / (1 + exp(-(p - p0) / tau))` dips below its low-`p` value
/// before rising, so on its own it is not monotone in `p`. The score used
/// here is its lower monotone envelope, `min` of the blend over `[p, 1]`:
/// identical to the blend from the turning point upward and flat below it.
pub fn satisfaction(text: f64, pixel: f64, config: &SatisfactionConfig) -> Result<f64, MetricsError> {
    for v in [text, pixel] {
        if !(0.0..=1.0).contains(&v) {
            return Err(MetricsError::OutOfRange(v));
        }
    }
    config.validate()?;
    let p = pixel.max(config.turning_point(text));
    Ok(config.blend(text, p).clamp(0.0, 1.0))
}

/// Scores of one reconstruction against its source.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityReport {
    pub text_fidelity: f64,
    pub pixel_fidelity: f64,
    pub satisfaction: f64,
    pub psnr_db: f64,
    /// Bits attributed to the scheme that produced the reconstruction.
    pub rate_bits: u64,
}

impl FidelityReport {
    pub fn with_rate(mut self, rate_bits: u64) -> Self {
        self.rate_bits = rate_bits;
        self
    }
}
