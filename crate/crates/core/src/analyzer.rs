//! Image to text: segmentation against the background color, moment-based
//! shape classification, and geometry estimation.

use alloc::vec;
use alloc::vec::Vec;

use crate::image::{Canvas, Image, Rgb};
use crate::scene::{Scene, SceneKind, SceneObject};
use crate::transform::{forward, Budget, TextualRepresentation};
use crate::vocab::{distance_sq, to_f64, Color, Descriptor, Palette, Shape};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyzerConfig {
    /// RGB distance from the background above which a pixel is foreground.
    pub background_threshold: f64,
    /// Components smaller than this many pixels are dropped.
    pub min_area: u32,
    /// Foreground fraction above which an image may be pure noise.
    pub noise_fraction: f64,
    /// Estimated noise level (per channel, [0,1] units) at which the image
    /// is median filtered before segmentation.
    pub filter_sigma: f64,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig {
            background_threshold: 48.0,
            min_area: 16,
            noise_fraction: 0.6,
            filter_sigma: 0.03,
        }
    }
}

/// A 4-connected foreground region.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub pixels: Vec<(u32, u32)>,
    pub area: u32,
    /// Fractions of canvas width and height.
    pub centroid: (f64, f64),
    /// Central moments `(mu20, mu02, mu11)` in pixels.
    pub second_moments: (f64, f64, f64),
    pub mean_color: [f64; 3],
}

impl Component {
    fn from_pixels(image: &Image, pixels: Vec<(u32, u32)>) -> Self {
        let n = pixels.len() as f64;
        let (mut sx, mut sy) = (0.0, 0.0);
        let mut color = [0.0; 3];
        for &(x, y) in &pixels {
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
            let p = image.get(x, y);
            for c in 0..3 {
                color[c] += p[c] as f64;
            }
        }
        let (cx, cy) = (sx / n, sy / n);
        let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
        for &(x, y) in &pixels {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            m20 += dx * dx;
            m02 += dy * dy;
            m11 += dx * dy;
        }
        Component {
            area: pixels.len() as u32,
            centroid: (cx / image.width() as f64, cy / image.height() as f64),
            second_moments: (m20, m02, m11),
            mean_color: color.map(|c| c / n),
            pixels,
        }
    }

    fn center_px(&self, canvas: Canvas) -> (f64, f64) {
        (self.centroid.0 * canvas.width as f64, self.centroid.1 * canvas.height as f64)
    }
}

/// Complex moment `sum (x + iy)^p (x - iy)^q` about the centroid, scaled by
/// `area^((p+q)/2 + 1)`.
fn complex_moment(component: &Component, canvas: Canvas, p: u32, q: u32) -> (f64, f64) {
    let (cx, cy) = component.center_px(canvas);
    let (mut re, mut im) = (0.0, 0.0);
    for &(x, y) in &component.pixels {
        let z = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        let zc = (z.0, -z.1);
        let mut acc = (1.0, 0.0);
        for _ in 0..p {
            acc = mul(acc, z);
        }
        for _ in 0..q {
            acc = mul(acc, zc);
        }
        re += acc.0;
        im += acc.1;
    }
    let scale = libm::pow(component.area as f64, (p + q) as f64 / 2.0 + 1.0);
    (re / scale, im / scale)
}

fn mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn modulus(z: (f64, f64)) -> f64 {
    libm::hypot(z.0, z.1)
}

const FEATURES: usize = 4;
/// Typical spread of each feature over small rendered objects.
const FEATURE_SCALE: [f64; FEATURES] = [0.01, 0.02, 0.01, 0.003];

/// Rotation-invariant signature: `phi1`, `sqrt(phi2)`, `sqrt(phi3)` of the
/// Hu set and the magnitude of the fourth-order complex moment.
fn signature(component: &Component, canvas: Canvas) -> [f64; FEATURES] {
    let n = component.area as f64;
    let (m20, m02, m11) = component.second_moments;
    // Each pixel is a unit square, not a point: add its own variance.
    let (m20, m02) = (m20 + n / 12.0, m02 + n / 12.0);
    let n2 = n * n;
    let phi1 = (m20 + m02) / n2;
    let phi2 = ((m20 - m02) * (m20 - m02) + 4.0 * m11 * m11) / (n2 * n2);
    [
        phi1,
        libm::sqrt(phi2),
        modulus(complex_moment(component, canvas, 3, 0)),
        modulus(complex_moment(component, canvas, 4, 0)),
    ]
}

#[derive(Clone, Debug)]
struct Prototype {
    shape: Shape,
    signature: [f64; FEATURES],
    /// Phase of `c_n0` at orientation 0, for the class symmetry order `n`.
    phase: f64,
    /// Filled area over the area of the bounding circle.
    fill_ratio: f64,
}

const PROTOTYPE_CANVAS: Canvas = Canvas::new(256, 256);
const PROTOTYPE_SIZE: f64 = 0.6;

fn symmetry_phase(component: &Component, canvas: Canvas, shape: Shape) -> Option<f64> {
    let n = shape.symmetry_order()?;
    let c = complex_moment(component, canvas, n, 0);
    Some(libm::atan2(c.1, c.0))
}

/// Analytic ratio of shape area to bounding-circle area.
fn fill_ratio(shape: Shape) -> f64 {
    use core::f64::consts::PI;
    match shape {
        Shape::Circle => 1.0,
        Shape::Ring => 0.64,
        Shape::Square | Shape::Cross => 2.0 / PI,
        Shape::Bar => 16.0 / (17.0 * PI),
        Shape::Triangle => 3.0 * libm::sqrt(3.0) / (4.0 * PI),
    }
}

/// Deterministic captioner for rendered scenes.
#[derive(Clone, Debug)]
pub struct Analyzer {
    config: AnalyzerConfig,
    palette: Palette,
    prototypes: Vec<Prototype>,
}

impl Analyzer {
    pub fn new(config: AnalyzerConfig, palette: Palette) -> Self {
        let prototypes = Shape::ALL
            .iter()
            .map(|&shape| {
                let object = SceneObject {
                    shape,
                    center: (0.5, 0.5),
                    size: PROTOTYPE_SIZE,
                    orientation: 0.0,
                    descriptors: vec![Descriptor::Color(Color::White)],
                };
                let mut pixels = Vec::new();
                crate::scene::ShapeRaster::new(&object, PROTOTYPE_CANVAS)
                    .for_each_pixel(PROTOTYPE_CANVAS, |x, y| pixels.push((x, y)));
                let mask = Image::filled(PROTOTYPE_CANVAS.width, PROTOTYPE_CANVAS.height, [0; 3]);
                let component = Component::from_pixels(&mask, pixels);
                Prototype {
                    shape,
                    signature: signature(&component, PROTOTYPE_CANVAS),
                    phase: symmetry_phase(&component, PROTOTYPE_CANVAS, shape).unwrap_or(0.0),
                    fill_ratio: fill_ratio(shape),
                }
            })
            .collect();
        Analyzer {
            config,
            palette,
            prototypes,
        }
    }

    pub fn config(&self) -> &AnalyzerConfig {
        &self.config
    }

    pub fn palette(&self) -> &Palette {
        &self.palette
    }

    /// Foreground components sorted by area, largest first.
    pub fn segment(&self, image: &Image, background: Color) -> Vec<Component> {
        let bg = to_f64(self.palette.rgb(background));
        let limit = self.config.background_threshold * self.config.background_threshold;
        let (w, h) = (image.width() as usize, image.height() as usize);
        let foreground: Vec<bool> = image.pixels().iter().map(|&p| distance_sq(p, bg) > limit).collect();
        let mut seen = vec![false; w * h];
        let mut components = Vec::new();
        let mut stack = Vec::new();
        for start in 0..w * h {
            if !foreground[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut pixels = Vec::new();
            while let Some(i) = stack.pop() {
                let (x, y) = (i % w, i / w);
                pixels.push((x as u32, y as u32));
                let mut visit = |j: usize| {
                    if foreground[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
            }
            if pixels.len() >= self.config.min_area as usize {
                pixels.sort_unstable_by_key(|&(x, y)| (y, x));
                components.push(Component::from_pixels(image, pixels));
            }
        }
        // Stable: equal areas keep scan order of their first pixel.
        components.sort_by_key(|c| core::cmp::Reverse(c.area));
        components
    }

    /// Nearest prototype and a softmin confidence in [0,1].
    pub fn classify_shape(&self, component: &Component, canvas: Canvas) -> (Shape, f64) {
        let sig = signature(component, canvas);
        let distances: Vec<f64> = self
            .prototypes
            .iter()
            .map(|p| {
                let mut d2 = 0.0;
                for i in 0..FEATURES {
                    let t = (sig[i] - p.signature[i]) / FEATURE_SCALE[i];
                    d2 += t * t;
                }
                libm::sqrt(d2)
            })
            .collect();
        let mut best = 0;
        for (i, &d) in distances.iter().enumerate() {
            if d < distances[best] {
                best = i;
            }
        }
        let weight = |d: f64| libm::exp(distances[best] - d);
        let total: f64 = distances.iter().map(|&d| weight(d)).sum();
        (self.prototypes[best].shape, 1.0 / total)
    }

    /// Geometry of a classified component as a scene object.
    fn estimate(&self, component: &Component, canvas: Canvas, shape: Shape) -> SceneObject {
        let proto = &self.prototypes[shape.index()];
        let diameter = 2.0 * libm::sqrt(component.area as f64 / core::f64::consts::PI);
        let size = (diameter / libm::sqrt(proto.fill_ratio) / canvas.min_side() as f64).clamp(f64::MIN_POSITIVE, 1.0);
        let orientation = match (shape.symmetry_order(), symmetry_phase(component, canvas, shape)) {
            (Some(n), Some(phase)) => {
                let period = shape.orientation_period();
                let turn = (phase - proto.phase) / n as f64 / core::f64::consts::PI;
                let wrapped = turn - libm::floor(turn / period) * period;
                if wrapped >= period || wrapped < 0.0 {
                    0.0
                } else {
                    wrapped
                }
            }
            _ => 0.0,
        };
        let color = self.palette.nearest(component.mean_color);
        SceneObject {
            shape,
            center: (
                component.centroid.0.clamp(0.0, 1.0),
                component.centroid.1.clamp(0.0, 1.0),
            ),
            size,
            orientation,
            descriptors: vec![Descriptor::Color(color)],
        }
    }

    /// Whether the image is texture the segmenter cannot split into regions.
    fn is_noise(&self, image: &Image, background: Color, sigma: f64) -> bool {
        if sigma * 255.0 <= self.config.background_threshold {
            return false;
        }
        let bg = to_f64(self.palette.rgb(background));
        let limit = self.config.background_threshold * self.config.background_threshold;
        let far = image.pixels().iter().filter(|&&p| distance_sq(p, bg) > limit).count();
        far as f64 > self.config.noise_fraction * image.pixels().len() as f64
    }

    /// Recovered scene, before quantization.
    pub fn analyze_scene(&self, image: &Image, background: Color) -> Scene {
        let canvas = image.canvas();
        let mut scene = Scene::empty(canvas, background);
        let sigma = estimate_noise_sigma(image);
        if self.is_noise(image, background, sigma) {
            scene.kind = SceneKind::Noise;
            return scene;
        }
        let filtered;
        let source = if sigma >= self.config.filter_sigma {
            filtered = median3(image);
            &filtered
        } else {
            image
        };
        scene.objects = self
            .segment(source, background)
            .iter()
            .map(|c| {
                let (shape, _) = self.classify_shape(c, canvas);
                self.estimate(c, canvas, shape)
            })
            .collect();
        scene
    }

    pub fn analyze(&self, image: &Image, budget: Budget, background: Color) -> TextualRepresentation {
        forward(&self.analyze_scene(image, background), budget)
    }
}

impl Default for Analyzer {
    fn default() -> Self {
        Analyzer::new(AnalyzerConfig::default(), Palette::default())
    }
}

/// Robust per-channel noise level in [0,1] units: scaled median absolute
/// difference between horizontal neighbors, ignoring saturated samples.
pub fn estimate_noise_sigma(image: &Image) -> f64 {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut histogram = [0u64; 256];
    let px = image.pixels();
    for y in 0..h {
        for x in 1..w {
            let (a, b) = (px[y * w + x - 1], px[y * w + x]);
            for c in 0..3 {
                // Clipped values hide the noise; leave them out.
                if a[c] % 255 != 0 && b[c] % 255 != 0 {
                    histogram[a[c].abs_diff(b[c]) as usize] += 1;
                }
            }
        }
    }
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return 0.0;
    }
    // Lower median of the absolute differences.
    let mut seen = 0;
    let mut median = 0;
    for (d, &count) in histogram.iter().enumerate() {
        seen += count;
        if 2 * seen >= total {
            median = d;
            break;
        }
    }
    1.4826 * median as f64 / core::f64::consts::SQRT_2 / 255.0
}

/// 3x3 per-channel median; border pixels use the clipped window.
fn median3(image: &Image) -> Image {
    let (w, h) = (image.width() as i64, image.height() as i64);
    let mut out = image.clone();
    let mut window = [0u8; 9];
    for y in 0..h {
        for x in 0..w {
            let mut rgb: Rgb = [0; 3];
            for (c, slot) in rgb.iter_mut().enumerate() {
                let mut n = 0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (sx, sy) = (x + dx, y + dy);
                        if sx >= 0 && sy >= 0 && sx < w && sy < h {
                            window[n] = image.get(sx as u32, sy as u32)[c];
                            n += 1;
                        }
                    }
                }
                window[..n].sort_unstable();
                *slot = window[n / 2];
            }
            out.set(x as u32, y as u32, rgb);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{add_noise, generate_scene, render, GenerationConfig};
    use crate::transform::forward;

    fn scene_of(objects: Vec<SceneObject>, background: Color) -> Scene {
        let mut s = Scene::empty(Canvas::new(256, 256), background);
        s.objects = objects;
        s
    }

    fn object(shape: Shape, center: (f64, f64), size: f64, orientation: f64, color: Color) -> SceneObject {
        SceneObject {
            shape,
            center,
            size,
            orientation,
            descriptors: vec![Descriptor::Color(color)],
        }
    }

    #[test]
    fn empty_image() {
        let a = Analyzer::default();
        let img = Image::filled(64, 64, Palette::default().rgb(Color::Navy));
        assert!(a.segment(&img, Color::Navy).is_empty());
        let rep = a.analyze(&img, Budget::new(8, 6, 2).unwrap(), Color::Navy);
        assert_eq!(rep.kind, SceneKind::Flat);
        assert!(rep.objects.is_empty());
    }

    #[test]
    fn component_matches_renderer_mask() {
        let a = Analyzer::default();
        let palette = Palette::default();
        let sq = object(Shape::Square, (0.4, 0.6), 0.3, 0.1, Color::Red);
        let scene = scene_of(vec![sq.clone()], Color::White);
        let comps = a.segment(&render(&scene, &palette), Color::White);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].area as u64, crate::scene::rendered_area(&sq, scene.canvas));
    }

    #[test]
    fn two_objects_two_components() {
        let a = Analyzer::default();
        let scene = scene_of(
            vec![
                object(Shape::Circle, (0.25, 0.25), 0.2, 0.0, Color::Red),
                object(Shape::Bar, (0.7, 0.7), 0.3, 0.2, Color::Blue),
            ],
            Color::White,
        );
        let comps = a.segment(&render(&scene, &Palette::default()), Color::White);
        assert_eq!(comps.len(), 2);
        assert!(comps[0].area >= comps[1].area);
    }

    #[test]
    fn classifies_each_prototype_class() {
        let a = Analyzer::default();
        let palette = Palette::default();
        for &shape in Shape::ALL {
            for (size, rot) in [(0.1, 0.0), (0.25, 0.13), (0.5, 0.31)] {
                let scene = scene_of(vec![object(shape, (0.5, 0.5), size, rot, Color::Black)], Color::White);
                let comps = a.segment(&render(&scene, &palette), Color::White);
                let (got, confidence) = a.classify_shape(&comps[0], scene.canvas);
                assert_eq!(got, shape, "size {size} rot {rot}");
                assert!(confidence > 0.0 && confidence <= 1.0);
            }
        }
    }

    #[test]
    fn square_rotated_45_degrees() {
        let a = Analyzer::default();
        let scene = scene_of(vec![object(Shape::Square, (0.5, 0.5), 0.3, 0.25, Color::Green)], Color::Black);
        let comps = a.segment(&render(&scene, &Palette::default()), Color::Black);
        assert_eq!(a.classify_shape(&comps[0], scene.canvas).0, Shape::Square);
    }

    #[test]
    fn tie_goes_to_earlier_class() {
        let mut a = Analyzer::default();
        let twin = a.prototypes[Shape::Square.index()].signature;
        a.prototypes[Shape::Circle.index()].signature = twin;
        let scene = scene_of(vec![object(Shape::Square, (0.5, 0.5), 0.6, 0.0, Color::Green)], Color::Black);
        let comps = a.segment(&render(&scene, &Palette::default()), Color::Black);
        assert_eq!(a.classify_shape(&comps[0], scene.canvas).0, Shape::Circle);
    }

    #[test]
    fn geometry_recovered() {
        let a = Analyzer::default();
        let palette = Palette::default();
        for &shape in Shape::ALL {
            let period = shape.orientation_period();
            let rot = if period > 0.0 { 0.37 * period } else { 0.0 };
            let truth = object(shape, (0.45, 0.55), 0.35, rot, Color::Orange);
            let scene = scene_of(vec![truth.clone()], Color::Navy);
            let got = a.analyze_scene(&render(&scene, &palette), Color::Navy);
            let o = &got.objects[0];
            assert_eq!(o.shape, shape);
            assert!((o.center.0 - 0.45).abs() < 0.01 && (o.center.1 - 0.55).abs() < 0.01);
            assert!((o.size - 0.35).abs() < 0.02, "{shape:?} size {}", o.size);
            assert!((o.orientation - rot).abs() < 0.02, "{shape:?} rot {} vs {rot}", o.orientation);
            assert_eq!(o.descriptors, vec![Descriptor::Color(Color::Orange)]);
        }
    }

    #[test]
    fn pseudo_noise_is_noise_kind() {
        let a = Analyzer::default();
        let mut scene = Scene::empty(Canvas::new(128, 96), Color::Gray);
        scene.kind = SceneKind::Noise;
        let rep = a.analyze(&render(&scene, &Palette::default()), Budget::new(8, 6, 2).unwrap(), Color::Gray);
        assert_eq!(rep.kind, SceneKind::Noise);
    }

    #[test]
    fn noisy_render_still_segments() {
        let a = Analyzer::default();
        let palette = Palette::default();
        let budget = Budget::new(8, 6, 2).unwrap();
        for seed in 0..10 {
            let scene = generate_scene(seed, &GenerationConfig::default()).unwrap();
            let noisy = add_noise(&render(&scene, &palette), 0.1, seed).unwrap();
            let sigma = estimate_noise_sigma(&noisy);
            // Saturated backgrounds bias the estimate low.
            assert!(sigma >= a.config.filter_sigma && sigma < 0.12, "{sigma}");
            let rep = a.analyze(&noisy, budget, scene.background);
            assert_eq!(rep.kind, SceneKind::Flat);
            assert_eq!(rep.objects.len(), forward(&scene, budget).objects.len(), "seed {seed}");
        }
    }

    #[test]
    fn noise_estimate_of_clean_render_is_small() {
        let scene = generate_scene(3, &GenerationConfig::default()).unwrap();
        assert!(estimate_noise_sigma(&render(&scene, &Palette::default())) < 0.01);
    }

    #[test]
    fn deterministic() {
        let a = Analyzer::default();
        let scene = generate_scene(17, &GenerationConfig::default()).unwrap();
        let img = render(&scene, &Palette::default());
        let b = Budget::new(8, 6, 2).unwrap();
        assert_eq!(a.analyze(&img, b, scene.background), a.analyze(&img, b, scene.background));
    }
}
