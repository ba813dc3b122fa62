use alloc::vec;
use alloc::vec::Vec;

pub use crate::vocab::Rgb;

pub const MIN_CANVAS_SIDE: u32 = 16;
pub const MAX_CANVAS_SIDE: u32 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub const fn new(width: u32, height: u32) -> Self {
        Canvas { width, height }
    }

    pub fn is_valid(&self) -> bool {
        (MIN_CANVAS_SIDE..=MAX_CANVAS_SIDE).contains(&self.width)
            && (MIN_CANVAS_SIDE..=MAX_CANVAS_SIDE).contains(&self.height)
    }

    pub fn min_side(&self) -> u32 {
        self.width.min(self.height)
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }
}

/// Row-major 8-bit RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl Image {
    pub fn filled(width: u32, height: u32, rgb: Rgb) -> Self {
        Image {
            width,
            height,
            pixels: vec![rgb; width as usize * height as usize],
        }
    }

    /// Returns `None` when the pixel count does not match the dimensions.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Rgb>) -> Option<Self> {
        (pixels.len() == width as usize * height as usize).then_some(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn canvas(&self) -> Canvas {
        Canvas::new(self.width, self.height)
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgb] {
        &mut self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: Rgb) {
        self.pixels[y as usize * self.width as usize + x as usize] = rgb;
    }

    /// Interleaved RGB bytes, as stored in a binary PPM body.
    pub fn to_rgb_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }

    pub fn from_rgb_bytes(width: u32, height: u32, bytes: &[u8]) -> Option<Self> {
        if bytes.len() != width as usize * height as usize * 3 {
            return None;
        }
        let pixels = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Some(Image {
            width,
            height,
            pixels,
        })
    }

    /// BT.601 luma per pixel.
    pub fn luma(&self) -> Vec<f64> {
        self.pixels
            .iter()
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    }
}

pub(crate) fn clamp_u8(v: f64) -> u8 {
    let r = libm::round(v);
    if r <= 0.0 {
        0
    } else if r >= 255.0 {
        255
    } else {
        r as u8
    }
}
