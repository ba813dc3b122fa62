//! Ground-truth synthetic scenes: seeded generation, deterministic
//! rasterization and pixel noise.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::image::{clamp_u8, Canvas, Image};
use crate::vocab::{distance_sq, to_f64, Color, Descriptor, Palette, Shape, Texture};

/// Seed of the canonical pseudo-noise image drawn for `SceneKind::Noise`.
const NOISE_IMAGE_SEED: u64 = 0x7e47_c0de_0000_0001;
/// Seed of the luminance noise added when `noise_sigma > 0`.
const LUMA_NOISE_SEED: u64 = 0x7e47_c0de_0000_0002;

/// Noise level, in [0,1] luminance units, that the word `noisy` stands for.
pub const NOISY_RENDER_SIGMA: f64 = 0.1;

/// Minimum clearance between bounding circles in disjoint mode, in units of
/// the shorter canvas side.
pub const DISJOINT_GAP: f64 = 0.02;

/// Minimum RGB distance between a generated object color and the background.
const MIN_COLOR_CONTRAST: f64 = 96.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("max_objects must be at least 1")]
    NoObjectsAllowed,
    #[error("canvas {0}x{1} outside [16, 4096]")]
    CanvasOutOfRange(u32, u32),
    #[error("invalid generation parameter: {0}")]
    InvalidConfig(&'static str),
    #[error("noise sigma must be a nonnegative number, got {0}")]
    NegativeSigma(f64),
    #[error("could not place {0} disjoint objects")]
    PlacementFailed(u32),
    #[error("invalid scene: {0}")]
    InvalidScene(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SceneKind {
    Flat,
    Noise,
}

impl SceneKind {
    pub fn word(self) -> &'static str {
        match self {
            SceneKind::Flat => "flat",
            SceneKind::Noise => "noise",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub shape: Shape,
    /// Fractions of canvas width and height.
    pub center: (f64, f64),
    /// Bounding diameter as a fraction of the shorter canvas side, in (0, 1].
    pub size: f64,
    /// Fraction of 180 degrees, in [0, 1).
    pub orientation: f64,
    /// First entry is the fill color.
    pub descriptors: Vec<Descriptor>,
}

impl SceneObject {
    pub fn validate(&self) -> Result<(), SceneError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.center.0) || !unit(self.center.1) {
            return Err(SceneError::InvalidScene("center outside [0,1]"));
        }
        if !(self.size > 0.0 && self.size <= 1.0) {
            return Err(SceneError::InvalidScene("size outside (0,1]"));
        }
        if !(0.0..1.0).contains(&self.orientation) {
            return Err(SceneError::InvalidScene("orientation outside [0,1)"));
        }
        if self.descriptors.is_empty() || self.descriptors.len() > 8 {
            return Err(SceneError::InvalidScene("descriptor count outside [1,8]"));
        }
        if self.descriptors[0].color().is_none() {
            return Err(SceneError::InvalidScene("first descriptor is not a color"));
        }
        Ok(())
    }

    /// Fill color: the first color word, or `fallback` when there is none.
    pub fn fill(&self, fallback: Color) -> Color {
        self.descriptors
            .iter()
            .find_map(|d| d.color())
            .unwrap_or(fallback)
    }

    pub fn has_texture(&self, texture: Texture) -> bool {
        self.descriptors.contains(&Descriptor::Texture(texture))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub kind: SceneKind,
    pub objects: Vec<SceneObject>,
    pub canvas: Canvas,
    pub background: Color,
    /// Standard deviation of luminance noise in [0,1] units.
    pub noise_sigma: f64,
}

impl Scene {
    pub fn empty(canvas: Canvas, background: Color) -> Self {
        Scene {
            kind: SceneKind::Flat,
            objects: Vec::new(),
            canvas,
            background,
            noise_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !self.canvas.is_valid() {
            return Err(SceneError::CanvasOutOfRange(
                self.canvas.width,
                self.canvas.height,
            ));
        }
        if self.kind == SceneKind::Noise && !self.objects.is_empty() {
            return Err(SceneError::InvalidScene("noise scene with objects"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(SceneError::NegativeSigma(self.noise_sigma));
        }
        self.objects.iter().try_for_each(SceneObject::validate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OverlapMode {
    Disjoint,
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationConfig {
    pub max_objects: u32,
    pub canvas: Canvas,
    pub overlap: OverlapMode,
    pub noise_probability: f64,
    pub min_size: f64,
    pub max_size: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            max_objects: 5,
            canvas: Canvas::new(256, 256),
            overlap: OverlapMode::Disjoint,
            noise_probability: 0.0,
            min_size: 0.08,
            max_size: 0.3,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.max_objects == 0 {
            return Err(SceneError::NoObjectsAllowed);
        }
        if !self.canvas.is_valid() {
            return Err(SceneError::CanvasOutOfRange(
                self.canvas.width,
                self.canvas.height,
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_probability) {
            return Err(SceneError::InvalidConfig("noise_probability outside [0,1]"));
        }
        if !(self.min_size > 0.0 && self.min_size <= self.max_size && self.max_size <= 1.0) {
            return Err(SceneError::InvalidConfig("size range must satisfy 0 < min <= max <= 1"));
        }
        Ok(())
    }
}

/// Draws a scene as a pure function of `(seed, config)`.
pub fn generate_scene(seed: u64, config: &GenerationConfig) -> Result<Scene, SceneError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let canvas = config.canvas;
    let background = Color::ALL[rng.random_range(0..Color::ALL.len())];
    let mut scene = Scene::empty(canvas, background);

    if rng.random::<f64>() < config.noise_probability {
        scene.kind = SceneKind::Noise;
        return Ok(scene);
    }

    let palette = Palette::default();
    let bg = to_f64(palette.rgb(background));
    let fills: Vec<Color> = Color::ALL
        .iter()
        .copied()
        .filter(|&c| distance_sq(palette.rgb(c), bg) >= MIN_COLOR_CONTRAST * MIN_COLOR_CONTRAST)
        .collect();

    let count = rng.random_range(1..=config.max_objects);
    for _ in 0..count {
        let shape = Shape::ALL[rng.random_range(0..Shape::ALL.len())];
        let mut size = rng.random_range(config.min_size..=config.max_size);
        let orientation = rng.random::<f64>() * shape.orientation_period();
        let fill = fills[rng.random_range(0..fills.len())];

        let center = place(&mut rng, &scene, &mut size, config.overlap)
            .ok_or(SceneError::PlacementFailed(count))?;
        scene.objects.push(SceneObject {
            shape,
            center,
            size,
            orientation,
            descriptors: vec![Descriptor::Color(fill)],
        });
    }
    Ok(scene)
}

/// Finds a center keeping the object on the canvas and, in disjoint mode,
/// clear of every object already placed. Shrinks the object when crowded.
fn place(
    rng: &mut ChaCha8Rng,
    scene: &Scene,
    size: &mut f64,
    overlap: OverlapMode,
) -> Option<(f64, f64)> {
    const ATTEMPTS: usize = 200;
    const ROUNDS: usize = 60;
    let min_side = scene.canvas.min_side() as f64;
    let (w, h) = (scene.canvas.width as f64, scene.canvas.height as f64);

    for _ in 0..ROUNDS {
        let r = *size / 2.0;
        let (rx, ry) = (r * min_side / w, r * min_side / h);
        for _ in 0..ATTEMPTS {
            let cx = rng.random_range(rx..=1.0 - rx);
            let cy = rng.random_range(ry..=1.0 - ry);
            let clear = overlap == OverlapMode::Free
                || scene.objects.iter().all(|o| {
                    let dx = (cx - o.center.0) * w / min_side;
                    let dy = (cy - o.center.1) * h / min_side;
                    libm::sqrt(dx * dx + dy * dy) >= r + o.size / 2.0 + DISJOINT_GAP
                });
            if clear {
                return Some((cx, cy));
            }
        }
        *size *= 0.85;
    }
    None
}

/// Point-in-shape test for one object on one canvas.
#[derive(Clone, Copy, Debug)]
pub struct ShapeRaster {
    shape: Shape,
    cx: f64,
    cy: f64,
    radius: f64,
    cos: f64,
    sin: f64,
}

impl ShapeRaster {
    pub fn new(object: &SceneObject, canvas: Canvas) -> Self {
        let theta = object.orientation * core::f64::consts::PI;
        ShapeRaster {
            shape: object.shape,
            cx: object.center.0 * canvas.width as f64,
            cy: object.center.1 * canvas.height as f64,
            radius: object.size * canvas.min_side() as f64 / 2.0,
            cos: libm::cos(theta),
            sin: libm::sin(theta),
        }
    }

    /// Whether the center of pixel `(x, y)` lies inside the shape.
    pub fn covers(&self, x: u32, y: u32) -> bool {
        let dx = x as f64 + 0.5 - self.cx;
        let dy = y as f64 + 0.5 - self.cy;
        let lx = dx * self.cos + dy * self.sin;
        let ly = -dx * self.sin + dy * self.cos;
        local_inside(self.shape, lx, ly, self.radius)
    }

    /// Pixel rectangle `[x0, x1) x [y0, y1)` containing the shape.
    fn bounds(&self, canvas: Canvas) -> (u32, u32, u32, u32) {
        let clip = |v: f64, max: u32| -> u32 {
            if v <= 0.0 {
                0
            } else {
                (libm::floor(v) as u64).min(max as u64) as u32
            }
        };
        (
            clip(self.cx - self.radius - 1.0, canvas.width),
            clip(self.cx + self.radius + 2.0, canvas.width),
            clip(self.cy - self.radius - 1.0, canvas.height),
            clip(self.cy + self.radius + 2.0, canvas.height),
        )
    }

    pub fn for_each_pixel(&self, canvas: Canvas, mut f: impl FnMut(u32, u32)) {
        let (x0, x1, y0, y1) = self.bounds(canvas);
        for y in y0..y1 {
            for x in x0..x1 {
                if self.covers(x, y) {
                    f(x, y);
                }
            }
        }
    }
}

fn local_inside(shape: Shape, x: f64, y: f64, r: f64) -> bool {
    let d2 = x * x + y * y;
    match shape {
        Shape::Circle => d2 <= r * r,
        Shape::Ring => d2 <= r * r && d2 >= 0.36 * r * r,
        Shape::Square => {
            let half = r * core::f64::consts::FRAC_1_SQRT_2;
            libm::fabs(x) <= half && libm::fabs(y) <= half
        }
        Shape::Bar => {
            let (a, b) = bar_half_extents(r);
            libm::fabs(x) <= a && libm::fabs(y) <= b
        }
        Shape::Cross => {
            let a = r * 3.0 / libm::sqrt(10.0);
            let b = a / 3.0;
            let (ax, ay) = (libm::fabs(x), libm::fabs(y));
            (ax <= a && ay <= b) || (ax <= b && ay <= a)
        }
        Shape::Triangle => {
            // Equilateral, circumradius r, apex pointing to -y; inradius r/2.
            const S: f64 = 0.866_025_403_784_438_6;
            y <= r / 2.0 && -S * x - 0.5 * y <= r / 2.0 && S * x - 0.5 * y <= r / 2.0
        }
    }
}

/// Half-length and half-width of a 4:1 bar inscribed in a circle of radius r.
fn bar_half_extents(r: f64) -> (f64, f64) {
    let a = r * 4.0 / libm::sqrt(17.0);
    (a, a / 4.0)
}

/// Number of pixels the object covers when drawn alone.
pub fn rendered_area(object: &SceneObject, canvas: Canvas) -> u64 {
    let mut n = 0;
    ShapeRaster::new(object, canvas).for_each_pixel(canvas, |_, _| n += 1);
    n
}

/// Deterministic rasterization: background, then objects back to front in
/// list order with solid fills, then luminance noise if `noise_sigma > 0`.
pub fn render(scene: &Scene, palette: &Palette) -> Image {
    let canvas = scene.canvas;
    let mut image = match scene.kind {
        SceneKind::Noise => pseudo_noise(canvas),
        SceneKind::Flat => {
            let mut image = Image::filled(canvas.width, canvas.height, palette.rgb(scene.background));
            let fallback = palette.contrasting(scene.background);
            for object in &scene.objects {
                let rgb = palette.rgb(object.fill(fallback));
                ShapeRaster::new(object, canvas).for_each_pixel(canvas, |x, y| image.set(x, y, rgb));
            }
            image
        }
    };
    if scene.noise_sigma > 0.0 {
        add_luma_noise(&mut image, scene.noise_sigma);
    }
    image
}

fn pseudo_noise(canvas: Canvas) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(NOISE_IMAGE_SEED);
    let mut bytes = vec![0u8; canvas.area() as usize * 3];
    rng.fill_bytes(&mut bytes);
    Image::from_rgb_bytes(canvas.width, canvas.height, &bytes).expect("sized buffer")
}

fn add_luma_noise(image: &mut Image, sigma: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(LUMA_NOISE_SEED);
    let normal = Normal::new(0.0, sigma * 255.0).expect("finite sigma");
    for px in image.pixels_mut() {
        let n = normal.sample(&mut rng);
        for c in px.iter_mut() {
            *c = clamp_u8(*c as f64 + n);
        }
    }
}

/// Independent Gaussian noise of standard deviation `sigma * 255` on every
/// channel, rounded and clamped to [0, 255].
pub fn add_noise(image: &Image, sigma: f64, seed: u64) -> Result<Image, SceneError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(SceneError::NegativeSigma(sigma));
    }
    let mut out = image.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma * 255.0).expect("finite sigma");
    for px in out.pixels_mut() {
        for c in px.iter_mut() {
            *c = clamp_u8(*c as f64 + normal.sample(&mut rng));
        }
    }
    Ok(out)
}
