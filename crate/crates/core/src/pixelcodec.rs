//! Fixed-length low-resolution pixel layer and the text + residual hybrid.
//!
//! Block `(i, j)` of a `k x k` grid covers the pixels with
//! `floor(x * k / width) == i` and `floor(y * k / height) == j`.

use alloc::vec;
use alloc::vec::Vec;

use crate::image::{clamp_u8, Image, Rgb};
use crate::metrics::{luma_milli, luma_milli_of, ssim, ssim_sum_near};
use crate::transform::{inverse, TextualRepresentation};
use crate::vocab::Palette;

pub const LAYER_MAGIC: [u8; 4] = *b"TTP1";
/// Header bits attributed to a layer: grid side (16) and bit depth (8).
pub const LAYER_HEADER_BITS: u64 = 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PixelCodecError {
    #[error("grid side {k} outside [1, {max}]")]
    GridSide { k: u32, max: u32 },
    #[error("bit depth {0} outside [1, 8]")]
    BitDepth(u8),
    #[error("layer grid {k} does not fit a {width}x{height} canvas")]
    DimensionMismatch { k: u32, width: u32, height: u32 },
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("layer stream truncated")]
    Truncated,
    #[error("{0} trailing bytes after layer")]
    TrailingBytes(usize),
    #[error("nonzero padding bits")]
    Padding,
}

/// `k x k` grid of `b`-bit quantized RGB block means.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LowResLayer {
    k: u32,
    bits: u8,
    samples: Vec<Rgb>,
}

fn check_bits(bits: u8) -> Result<(), PixelCodecError> {
    if (1..=8).contains(&bits) {
        Ok(())
    } else {
        Err(PixelCodecError::BitDepth(bits))
    }
}

fn block_of(coord: u32, k: u32, extent: u32) -> usize {
    (coord as u64 * k as u64 / extent as u64) as usize
}

/// Index of the bin containing an 8-bit-scale value.
fn quantize_level(mean: f64, bits: u8) -> u8 {
    let levels = 1u32 << bits;
    let q = libm::floor(mean * levels as f64 / 256.0) as u32;
    q.min(levels - 1) as u8
}

/// Bin center on the 0..=255 scale.
fn level_value(q: u8, bits: u8) -> f64 {
    let step = 256.0 / (1u32 << bits) as f64;
    libm::round(q as f64 * step + (step - 1.0) / 2.0)
}

impl LowResLayer {
    pub fn new(k: u32, bits: u8, samples: Vec<Rgb>) -> Result<Self, PixelCodecError> {
        if k == 0 || k > u16::MAX as u32 {
            return Err(PixelCodecError::GridSide { k, max: u16::MAX as u32 });
        }
        check_bits(bits)?;
        if samples.len() != (k * k) as usize {
            return Err(PixelCodecError::Truncated);
        }
        let limit = 1u16 << bits;
        if samples.iter().flatten().any(|&v| v as u16 >= limit) {
            return Err(PixelCodecError::BitDepth(bits));
        }
        Ok(LowResLayer { k, bits, samples })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    /// Quantized samples, row-major.
    pub fn samples(&self) -> &[Rgb] {
        &self.samples
    }

    pub fn rate_bits(&self) -> u64 {
        self.k as u64 * self.k as u64 * 3 * self.bits as u64 + LAYER_HEADER_BITS
    }

    /// Bin-center reconstruction of every sample.
    fn levels(&self) -> Vec<[f64; 3]> {
        self.samples
            .iter()
            .map(|s| s.map(|q| level_value(q, self.bits)))
            .collect()
    }

    /// `TTP1`, `k` (u16 BE), `b`, then `3 k^2` samples of `b` bits each,
    /// packed MSB first and zero-padded to a byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&LAYER_MAGIC);
        out.extend_from_slice(&(self.k as u16).to_be_bytes());
        out.push(self.bits);
        let mut acc = 0u32;
        let mut filled = 0u32;
        for &v in self.samples.iter().flatten() {
            acc = (acc << self.bits) | v as u32;
            filled += self.bits as u32;
            while filled >= 8 {
                filled -= 8;
                out.push((acc >> filled) as u8);
                acc &= (1 << filled) - 1;
            }
        }
        if filled > 0 {
            out.push((acc << (8 - filled)) as u8);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PixelCodecError> {
        if bytes.len() < 7 {
            return Err(PixelCodecError::Truncated);
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("four bytes");
        if magic != LAYER_MAGIC {
            return Err(PixelCodecError::BadMagic(magic));
        }
        let k = u16::from_be_bytes([bytes[4], bytes[5]]) as u32;
        let bits = bytes[6];
        check_bits(bits)?;
        if k == 0 {
            return Err(PixelCodecError::GridSide { k, max: u16::MAX as u32 });
        }
        let total_bits = k as usize * k as usize * 3 * bits as usize;
        let body = &bytes[7..];
        let want = total_bits.div_ceil(8);
        if body.len() < want {
            return Err(PixelCodecError::Truncated);
        }
        if body.len() > want {
            return Err(PixelCodecError::TrailingBytes(body.len() - want));
        }
        if !total_bits.is_multiple_of(8) && body[want - 1] & (0xff >> (total_bits % 8)) != 0 {
            return Err(PixelCodecError::Padding);
        }
        let read = |index: usize| -> u8 {
            let mut v = 0u8;
            for bit in index * bits as usize..(index + 1) * bits as usize {
                v = (v << 1) | ((body[bit / 8] >> (7 - bit % 8)) & 1);
            }
            v
        };
        let samples = (0..(k * k) as usize)
            .map(|i| [read(3 * i), read(3 * i + 1), read(3 * i + 2)])
            .collect();
        LowResLayer::new(k, bits, samples)
    }
}

/// Per-block channel means.
fn block_means(image: &Image, k: u32) -> Vec<[f64; 3]> {
    let (w, h) = (image.width(), image.height());
    let mut sums = vec![[0u64; 3]; (k * k) as usize];
    let mut counts = vec![0u64; (k * k) as usize];
    let cols: Vec<usize> = (0..w).map(|x| block_of(x, k, w)).collect();
    for y in 0..h {
        let row = block_of(y, k, h) * k as usize;
        for x in 0..w {
            let cell = row + cols[x as usize];
            let p = image.get(x, y);
            for c in 0..3 {
                sums[cell][c] += p[c] as u64;
            }
            counts[cell] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &n)| s.map(|v| v as f64 / n as f64))
        .collect()
}

/// Block-mean downsample to `k x k`, then `b`-bit uniform quantization.
pub fn encode_pixels(image: &Image, k: u32, bits: u8) -> Result<LowResLayer, PixelCodecError> {
    let max = image.width().min(image.height());
    if k == 0 || k > max {
        return Err(PixelCodecError::GridSide { k, max });
    }
    check_bits(bits)?;
    let samples = block_means(image, k)
        .into_iter()
        .map(|m| m.map(|v| quantize_level(v, bits)))
        .collect();
    Ok(LowResLayer { k, bits, samples })
}

fn check_fit(layer: &LowResLayer, width: u32, height: u32) -> Result<(), PixelCodecError> {
    if layer.k > width.min(height) {
        return Err(PixelCodecError::DimensionMismatch {
            k: layer.k,
            width,
            height,
        });
    }
    Ok(())
}

/// Bin centers upsampled by pixel replication.
pub fn decode_pixels(layer: &LowResLayer, width: u32, height: u32) -> Result<Image, PixelCodecError> {
    check_fit(layer, width, height)?;
    let k = layer.k;
    let levels = layer.levels();
    let cols: Vec<usize> = (0..width).map(|x| block_of(x, k, width)).collect();
    let mut pixels = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        let row = block_of(y, k, height) * k as usize;
        for x in 0..width {
            pixels.push(levels[row + cols[x as usize]].map(clamp_u8));
        }
    }
    Ok(Image::from_pixels(width, height, pixels).expect("pixel count matches"))
}

/// Layer for `hybrid_reconstruct` chosen against the text reconstruction.
///
/// The candidate correction of a block moves the base block's own level by
/// the nearest whole number of steps toward the source mean. One layer
/// applies every candidate; another keeps only those that raise the local
/// SSIM against `image`. The one whose decoded image has the higher SSIM is
/// returned. The layer format and decoder are those of any other layer.
pub fn encode_hybrid_layer(
    image: &Image,
    rep: &TextualRepresentation,
    k: u32,
    bits: u8,
    palette: &Palette,
) -> Result<LowResLayer, PixelCodecError> {
    let (width, height) = (image.width(), image.height());
    if image.canvas() != rep.canvas {
        return Err(PixelCodecError::DimensionMismatch { k, width, height });
    }
    let source = encode_pixels(image, k, bits)?;
    let base = inverse(rep, palette);
    let base_means = block_means(&base, k);
    let source_means = block_means(image, k);
    let step = 256.0 / (1u32 << bits) as f64;
    let top = (1i32 << bits) - 1;

    let reference = luma_milli(image);
    let base_luma = luma_milli(&base);
    let mut trial = base_luma.clone();
    let w = width as usize;
    let spans = |extent: u32| -> Vec<(usize, usize)> {
        let mut starts: Vec<usize> = (0..k).map(|i| ((i as u64 * extent as u64).div_ceil(k as u64)) as usize).collect();
        starts.push(extent as usize);
        starts.windows(2).map(|p| (p[0], p[1])).collect()
    };
    let (cols, rows) = (spans(width), spans(height));

    let mut samples = Vec::with_capacity((k * k) as usize);
    let mut every = Vec::with_capacity((k * k) as usize);
    for (j, &(y0, y1)) in rows.iter().enumerate() {
        for (i, &(x0, x1)) in cols.iter().enumerate() {
            let cell = j * k as usize + i;
            let (b, t) = (base_means[cell], source_means[cell]);
            let kept: Rgb = core::array::from_fn(|c| quantize_level(b[c], bits));
            let moved: Rgb = core::array::from_fn(|c| {
                let shift = libm::round((t[c] - b[c]) / step) as i32;
                (kept[c] as i32 + shift).clamp(0, top) as u8
            });
            every.push(moved);
            if moved == kept || x0 == x1 || y0 == y1 {
                samples.push(kept);
                continue;
            }
            let offset: [f64; 3] = core::array::from_fn(|c| level_value(moved[c], bits) - level_value(kept[c], bits));
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = base.get(x as u32, y as u32);
                    let q: Rgb = core::array::from_fn(|c| clamp_u8(p[c] as f64 + offset[c]));
                    trial[y * w + x] = luma_milli_of(q);
                }
            }
            let without = ssim_sum_near(&reference, &base_luma, w, x0, x1, y0, y1);
            let with = ssim_sum_near(&reference, &trial, w, x0, x1, y0, y1);
            for y in y0..y1 {
                trial[y * w + x0..y * w + x1].copy_from_slice(&base_luma[y * w + x0..y * w + x1]);
            }
            samples.push(if with > without { moved } else { kept });
        }
    }
    let gated = LowResLayer {
        samples,
        ..source.clone()
    };
    let every = LowResLayer { samples: every, ..source };
    if every == gated {
        return Ok(gated);
    }
    let score = |layer: &LowResLayer| -> Result<f64, PixelCodecError> {
        let out = hybrid_reconstruct(rep, layer, palette)?;
        Ok(ssim(image, &out).unwrap_or(f64::NEG_INFINITY))
    };
    Ok(if score(&every)? > score(&gated)? { every } else { gated })
}

/// Text reconstruction corrected block by block toward the layer: the
/// difference between the layer and the identically coded base is added to
/// every pixel of the block.
pub fn hybrid_reconstruct(
    rep: &TextualRepresentation,
    layer: &LowResLayer,
    palette: &Palette,
) -> Result<Image, PixelCodecError> {
    let (width, height) = (rep.canvas.width, rep.canvas.height);
    check_fit(layer, width, height)?;
    let mut out = inverse(rep, palette);
    let base = encode_pixels(&out, layer.k, layer.bits)?.levels();
    let target = layer.levels();
    let k = layer.k;
    let cols: Vec<usize> = (0..width).map(|x| block_of(x, k, width)).collect();
    for y in 0..height {
        let row = block_of(y, k, height) * k as usize;
        for x in 0..width {
            let cell = row + cols[x as usize];
            let p = out.get(x, y);
            let corrected = core::array::from_fn(|c| clamp_u8(p[c] as f64 + target[cell][c] - base[cell][c]));
            out.set(x, y, corrected);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Canvas;
    use crate::scene::{generate_scene, render, GenerationConfig};
    use crate::transform::{forward, Budget};
    use crate::vocab::Color;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, w: u32, h: u32) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px = (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        Image::from_pixels(w, h, px).unwrap()
    }

    #[test]
    fn identity_configuration_is_exact() {
        let img = random_image(3, 24, 24);
        let layer = encode_pixels(&img, 24, 8).unwrap();
        assert_eq!(decode_pixels(&layer, 24, 24).unwrap(), img);
    }

    #[test]
    fn single_block_is_global_mean() {
        let img = Image::from_pixels(16, 16, (0..256).map(|i| [i as u8, 100, 7]).collect()).unwrap();
        let layer = encode_pixels(&img, 1, 8).unwrap();
        // Mean of 0..=255 is 127.5, floor gives 127.
        assert_eq!(layer.samples(), &[[127, 100, 7]]);
        let out = decode_pixels(&layer, 16, 16).unwrap();
        assert!(out.pixels().iter().all(|&p| p == [127, 100, 7]));
    }

    #[test]
    fn rate_formula() {
        let img = random_image(1, 64, 64);
        assert_eq!(encode_pixels(&img, 4, 3).unwrap().rate_bits(), 168);
        assert_eq!(encode_pixels(&img, 64, 8).unwrap().rate_bits(), 64 * 64 * 24 + 24);
    }

    #[test]
    fn bin_centers() {
        assert_eq!(level_value(0, 1), 64.0);
        assert_eq!(level_value(1, 1), 192.0);
        assert_eq!(level_value(7, 3), 240.0);
        assert_eq!(quantize_level(255.0, 3), 7);
        assert_eq!(quantize_level(31.99, 3), 0);
        assert_eq!(quantize_level(32.0, 3), 1);
    }

    #[test]
    fn parameter_errors() {
        let img = random_image(1, 16, 20);
        assert!(matches!(encode_pixels(&img, 0, 4), Err(PixelCodecError::GridSide { .. })));
        assert!(matches!(encode_pixels(&img, 17, 4), Err(PixelCodecError::GridSide { .. })));
        assert_eq!(encode_pixels(&img, 4, 0), Err(PixelCodecError::BitDepth(0)));
        assert_eq!(encode_pixels(&img, 4, 9), Err(PixelCodecError::BitDepth(9)));
        let layer = encode_pixels(&img, 16, 4).unwrap();
        assert!(decode_pixels(&layer, 8, 8).is_err());
    }

    #[test]
    fn hybrid_zero_residual() {
        let cfg = GenerationConfig::default();
        let palette = Palette::default();
        let scene = generate_scene(9, &cfg).unwrap();
        let rep = forward(&scene, Budget::new(4, 6, 2).unwrap());
        let base = inverse(&rep, &palette);
        for (k, b) in [(1, 1), (4, 3), (16, 4), (256, 8)] {
            let layer = encode_pixels(&base, k, b).unwrap();
            assert_eq!(hybrid_reconstruct(&rep, &layer, &palette).unwrap(), base);
        }
        let src = render(&scene, &palette);
        let layer = encode_pixels(&src, 256, 8).unwrap();
        assert_eq!(hybrid_reconstruct(&rep, &layer, &palette).unwrap(), src);
    }

    #[test]
    fn hybrid_single_block_moves_toward_mean() {
        let palette = Palette::default();
        let canvas = Canvas::new(32, 32);
        let rep = TextualRepresentation::noise(canvas, Color::Black, Budget::new(1, 0, 0).unwrap());
        let mut flat = rep.clone();
        flat.kind = crate::scene::SceneKind::Flat;
        let gray = Image::filled(32, 32, [128, 128, 128]);
        let layer = encode_pixels(&gray, 1, 8).unwrap();
        let out = hybrid_reconstruct(&flat, &layer, &palette).unwrap();
        assert!(out.pixels().iter().all(|&p| p == [128, 128, 128]));
    }

    #[test]
    fn hybrid_layer_of_base_is_zero_residual() {
        let palette = Palette::default();
        let scene = generate_scene(21, &GenerationConfig::default()).unwrap();
        let rep = forward(&scene, Budget::new(4, 6, 2).unwrap());
        let base = inverse(&rep, &palette);
        let layer = encode_hybrid_layer(&base, &rep, 8, 4, &palette).unwrap();
        assert_eq!(layer, encode_pixels(&base, 8, 4).unwrap());
        assert_eq!(hybrid_reconstruct(&rep, &layer, &palette).unwrap(), base);
    }

    #[test]
    fn hybrid_layer_identity_limit() {
        let palette = Palette::default();
        let scene = generate_scene(22, &GenerationConfig::default()).unwrap();
        let src = render(&scene, &palette);
        let rep = forward(&scene, Budget::new(1, 2, 1).unwrap());
        let layer = encode_hybrid_layer(&src, &rep, 256, 8, &palette).unwrap();
        assert_eq!(hybrid_reconstruct(&rep, &layer, &palette).unwrap(), src);
    }

    proptest! {
        #[test]
        fn layer_bytes_round_trip(seed in any::<u64>(), k in 1u32..=16, b in 1u8..=8) {
            let img = random_image(seed, 16, 16);
            let layer = encode_pixels(&img, k, b).unwrap();
            let bytes = layer.to_bytes();
            prop_assert_eq!(((bytes.len() - 7) * 8) as u64 >= layer.rate_bits() - LAYER_HEADER_BITS, true);
            prop_assert_eq!(LowResLayer::from_bytes(&bytes).unwrap(), layer.clone());
            prop_assert!(layer.samples().iter().flatten().all(|&v| (v as u16) < 1 << b));
            if bytes.len() > 7 {
                prop_assert!(LowResLayer::from_bytes(&bytes[..bytes.len() - 1]).is_err());
            }
        }

        #[test]
        fn decode_error_within_half_step(seed in any::<u64>(), b in 1u8..=8) {
            let img = random_image(seed, 16, 16);
            let layer = encode_pixels(&img, 16, b).unwrap();
            let out = decode_pixels(&layer, 16, 16).unwrap();
            let half = 128.0 / (1u32 << b) as f64 + 0.5;
            for (p, q) in img.pixels().iter().zip(out.pixels()) {
                for c in 0..3 {
                    prop_assert!((p[c] as f64 - q[c] as f64).abs() <= half);
                }
            }
        }
    }
}
