//! The closed word list shared by every representation: object classes,
//! descriptor words (colors and textures) and the color palette.

use core::fmt;

/// Bumped whenever a word is added, removed or reordered. Token ids and golden
/// bitstreams depend on it.
pub const VOCABULARY_VERSION: &str = "ttc-vocab-1";

/// Reserved class word for a scene that is pure noise. Never a [`Shape`].
pub const NOISE_WORD: &str = "noise";

pub type Rgb = [u8; 3];

macro_rules! word_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $word:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            /// All variants in vocabulary order.
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn word(self) -> &'static str {
                match self {
                    $($name::$variant => $word),+
                }
            }

            pub fn from_word(word: &str) -> Option<Self> {
                match word {
                    $($word => Some($name::$variant),)+
                    _ => None,
                }
            }

            /// Position in vocabulary order.
            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.word())
            }
        }
    };
}

word_enum! {
    /// Object classes. Chosen so their moment signatures are far apart.
    Shape {
        Circle => "circle",
        Square => "square",
        Triangle => "triangle",
        Bar => "bar",
        Ring => "ring",
        Cross => "cross",
    }
}

word_enum! {
    Color {
        White => "white",
        Black => "black",
        Red => "red",
        Green => "green",
        Blue => "blue",
        Yellow => "yellow",
        Cyan => "cyan",
        Magenta => "magenta",
        Orange => "orange",
        Purple => "purple",
        Pink => "pink",
        Brown => "brown",
        Gray => "gray",
        Olive => "olive",
        Navy => "navy",
        Teal => "teal",
    }
}

word_enum! {
    /// Texture words. Only `noisy` changes rendering; the rest are text-only.
    Texture {
        Solid => "solid",
        Striped => "striped",
        Dotted => "dotted",
        Noisy => "noisy",
        Glossy => "glossy",
        Matte => "matte",
        Crisp => "crisp",
        Faint => "faint",
    }
}

impl Shape {
    /// Order of rotational symmetry; `None` for rotationally invariant shapes.
    pub fn symmetry_order(self) -> Option<u32> {
        match self {
            Shape::Circle | Shape::Ring => None,
            Shape::Bar => Some(2),
            Shape::Triangle => Some(3),
            Shape::Square | Shape::Cross => Some(4),
        }
    }

    /// Orientation period as a fraction of 180 degrees (0 when unobservable).
    pub fn orientation_period(self) -> f64 {
        match self.symmetry_order() {
            None => 0.0,
            Some(n) => 2.0 / n as f64,
        }
    }
}

/// A descriptor word: a color or a texture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Descriptor {
    Color(Color),
    Texture(Texture),
}

impl Descriptor {
    pub const COUNT: usize = 24;

    pub fn word(self) -> &'static str {
        match self {
            Descriptor::Color(c) => c.word(),
            Descriptor::Texture(t) => t.word(),
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        Color::from_word(word)
            .map(Descriptor::Color)
            .or_else(|| Texture::from_word(word).map(Descriptor::Texture))
    }

    /// Index in the descriptor list: 16 colors, then 8 textures.
    pub fn index(self) -> usize {
        match self {
            Descriptor::Color(c) => c.index(),
            Descriptor::Texture(t) => Color::ALL.len() + t.index(),
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        if index < Color::ALL.len() {
            Some(Descriptor::Color(Color::ALL[index]))
        } else {
            Texture::ALL
                .get(index - Color::ALL.len())
                .copied()
                .map(Descriptor::Texture)
        }
    }

    pub fn color(self) -> Option<Color> {
        match self {
            Descriptor::Color(c) => Some(c),
            Descriptor::Texture(_) => None,
        }
    }

    pub fn all() -> impl Iterator<Item = Descriptor> {
        (0..Self::COUNT).filter_map(Descriptor::from_index)
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

impl From<Color> for Descriptor {
    fn from(c: Color) -> Self {
        Descriptor::Color(c)
    }
}

impl From<Texture> for Descriptor {
    fn from(t: Texture) -> Self {
        Descriptor::Texture(t)
    }
}

/// Exact 8-bit RGB value for every color word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Palette {
    colors: [Rgb; 16],
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            colors: [
                [255, 255, 255],
                [0, 0, 0],
                [230, 25, 75],
                [60, 180, 75],
                [0, 130, 200],
                [255, 225, 25],
                [70, 240, 240],
                [240, 50, 230],
                [245, 130, 48],
                [145, 30, 180],
                [250, 190, 212],
                [170, 110, 40],
                [128, 128, 128],
                [128, 128, 0],
                [0, 0, 128],
                [0, 128, 128],
            ],
        }
    }
}

impl Palette {
    pub fn rgb(&self, color: Color) -> Rgb {
        self.colors[color.index()]
    }

    pub fn set(&mut self, color: Color, rgb: Rgb) {
        self.colors[color.index()] = rgb;
    }

    /// Nearest palette color in Euclidean RGB distance; ties go to the
    /// earlier vocabulary entry.
    pub fn nearest(&self, rgb: [f64; 3]) -> Color {
        let mut best = Color::White;
        let mut best_d = f64::INFINITY;
        for &c in Color::ALL {
            let d = distance_sq(self.rgb(c), rgb);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }

    /// The palette color farthest from `background`; used to paint objects
    /// whose description carries no color word.
    pub fn contrasting(&self, background: Color) -> Color {
        let bg = to_f64(self.rgb(background));
        let mut best = Color::Black;
        let mut best_d = -1.0;
        for &c in Color::ALL {
            let d = distance_sq(self.rgb(c), bg);
            if d > best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }
}

pub(crate) fn to_f64(rgb: Rgb) -> [f64; 3] {
    [rgb[0] as f64, rgb[1] as f64, rgb[2] as f64]
}

pub(crate) fn distance_sq(a: Rgb, b: [f64; 3]) -> f64 {
    let dr = a[0] as f64 - b[0];
    let dg = a[1] as f64 - b[1];
    let db = a[2] as f64 - b[2];
    dr * dr + dg * dg + db * db
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    #[test]
    fn words_are_unique_lowercase_and_round_trip() {
        let mut seen = BTreeSet::new();
        let words = Shape::ALL
            .iter()
            .map(|s| s.word())
            .chain(Descriptor::all().map(|d| d.word()))
            .chain([NOISE_WORD]);
        for w in words {
            assert!(w.bytes().all(|b| b.is_ascii_lowercase()), "{w}");
            assert!(seen.insert(w), "duplicate word {w}");
        }
        assert_eq!(seen.len(), 6 + 24 + 1);
        for d in Descriptor::all() {
            assert_eq!(Descriptor::from_word(d.word()), Some(d));
            assert_eq!(Descriptor::from_index(d.index()), Some(d));
        }
    }

    #[test]
    fn palette_is_distinct() {
        let p = Palette::default();
        for &a in Color::ALL {
            for &b in Color::ALL {
                if a != b {
                    assert!(distance_sq(p.rgb(a), to_f64(p.rgb(b))) > 48.0 * 48.0);
                }
            }
            assert_eq!(p.nearest(to_f64(p.rgb(a))), a);
        }
        assert_eq!(p.contrasting(Color::White), Color::Black);
    }
}
