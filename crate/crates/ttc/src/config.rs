//! The `key = value` configuration file.
//!
//! Every run starts from the shipped defaults (`config/default.conf`); a user
//! file overrides any subset of keys. The hash identifies the effective
//! configuration, not the file that produced it: comments, key order and
//! omitted defaults do not change it.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use ttc_core::vocab::VOCABULARY_VERSION;
use ttc_core::{
    Analyzer, AnalyzerConfig, Budget, Canvas, Color, Evaluator, GenerationConfig, MatchWeights,
    OverlapMode, Palette, SatisfactionConfig,
};

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.conf");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    Value { line: usize, key: String, reason: String },
    #[error("config is for vocabulary `{found}`, this build uses `{VOCABULARY_VERSION}`")]
    Vocabulary { found: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub palette: Palette,
    pub analyzer: AnalyzerConfig,
    pub satisfaction: SatisfactionConfig,
    pub weights: MatchWeights,
    pub eval_budget: Budget,
    pub generation: GenerationConfig,
}

impl Default for Config {
    fn default() -> Self {
        let mut config = Config::builtin();
        config.apply(DEFAULT_CONFIG).expect("shipped default config is valid");
        config
    }
}

fn parse_value<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("`{value}` is not a valid number"))
}

fn parse_rgb(value: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = value.split_ascii_whitespace().collect();
    if parts.len() != 3 {
        return Err("expected three integers `r g b`".into());
    }
    let mut rgb = [0u8; 3];
    for (c, p) in rgb.iter_mut().zip(parts) {
        *c = p.parse().map_err(|_| format!("`{p}` is not in 0..=255"))?;
    }
    Ok(rgb)
}

pub fn parse_budget(value: &str) -> Result<Budget, String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let [l, r, w] = parts[..] else {
        return Err("expected `L,R,W`".into());
    };
    Budget::new(parse_value(l)?, parse_value(r)?, parse_value(w)?).map_err(|e| e.to_string())
}

fn parse_canvas(value: &str) -> Result<Canvas, String> {
    let (w, h) = value.split_once('x').ok_or("expected `WIDTHxHEIGHT`")?;
    Ok(Canvas::new(parse_value(w.trim())?, parse_value(h.trim())?))
}

impl Config {
    /// The library defaults, before any file is read.
    pub fn builtin() -> Self {
        Config {
            palette: Palette::default(),
            analyzer: AnalyzerConfig::default(),
            satisfaction: SatisfactionConfig::default(),
            weights: MatchWeights::default(),
            eval_budget: Budget::new(8, 6, 2).expect("valid budget"),
            generation: GenerationConfig::default(),
        }
    }

    /// Defaults overridden by `text`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        config.apply(text)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::parse(&text)
    }

    fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                reason: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            self.set(key, value).map_err(|e| match e {
                SetError::Unknown => ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                },
                SetError::Vocabulary => ConfigError::Vocabulary {
                    found: value.into(),
                },
                SetError::Value(reason) => ConfigError::Value {
                    line,
                    key: key.into(),
                    reason,
                },
            })?;
        }
        self.validate()
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), SetError> {
        if let Some(word) = key.strip_prefix("palette.") {
            let color = Color::from_word(word).ok_or(SetError::Unknown)?;
            self.palette.set(color, parse_rgb(value)?);
            return Ok(());
        }
        let a = &mut self.analyzer;
        let s = &mut self.satisfaction;
        let m = &mut self.weights;
        let g = &mut self.generation;
        match key {
            "vocabulary_version" if value == VOCABULARY_VERSION => {}
            "vocabulary_version" => return Err(SetError::Vocabulary),
            "analyzer.background_threshold" => a.background_threshold = parse_value(value)?,
            "analyzer.min_area" => a.min_area = parse_value(value)?,
            "analyzer.noise_fraction" => a.noise_fraction = parse_value(value)?,
            "analyzer.filter_sigma" => a.filter_sigma = parse_value(value)?,
            "satisfaction.text_ceiling" => s.text_ceiling = parse_value(value)?,
            "satisfaction.blend_midpoint" => s.blend_midpoint = parse_value(value)?,
            "satisfaction.blend_sharpness" => s.blend_sharpness = parse_value(value)?,
            "match.class" => m.class = parse_value(value)?,
            "match.geometry" => m.geometry = parse_value(value)?,
            "match.descriptors" => m.descriptors = parse_value(value)?,
            "match.distance_scale" => m.distance_scale = parse_value(value)?,
            "eval.budget" => self.eval_budget = parse_budget(value)?,
            "generate.max_objects" => g.max_objects = parse_value(value)?,
            "generate.canvas" => g.canvas = parse_canvas(value)?,
            "generate.overlap" => {
                g.overlap = match value {
                    "disjoint" => OverlapMode::Disjoint,
                    "free" => OverlapMode::Free,
                    _ => return Err(SetError::Value("expected `disjoint` or `free`".into())),
                }
            }
            "generate.noise_probability" => g.noise_probability = parse_value(value)?,
            "generate.min_size" => g.min_size = parse_value(value)?,
            "generate.max_size" => g.max_size = parse_value(value)?,
            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.satisfaction.validate().map_err(|e| invalid(&e))?;
        self.generation.validate().map_err(|e| invalid(&e))?;
        let a = &self.analyzer;
        for (name, v) in [
            ("analyzer.background_threshold", a.background_threshold),
            ("analyzer.noise_fraction", a.noise_fraction),
            ("analyzer.filter_sigma", a.filter_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be a nonnegative number")));
            }
        }
        let m = &self.weights;
        let weights = [m.class, m.geometry, m.descriptors];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(ConfigError::Invalid("match weights must be nonnegative and sum to 1".into()));
        }
        if !(m.distance_scale.is_finite() && m.distance_scale > 0.0) {
            return Err(ConfigError::Invalid("match.distance_scale must be positive".into()));
        }
        Ok(())
    }

    /// Every key with its effective value, one per line, in a fixed order.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: &dyn std::fmt::Display| {
            writeln!(out, "{k} = {v}").expect("writing to a String cannot fail");
        };
        line("vocabulary_version", &VOCABULARY_VERSION);
        for &c in Color::ALL {
            let [r, g, b] = self.palette.rgb(c);
            line(&format!("palette.{}", c.word()), &format!("{r} {g} {b}"));
        }
        let a = &self.analyzer;
        line("analyzer.background_threshold", &a.background_threshold);
        line("analyzer.min_area", &a.min_area);
        line("analyzer.noise_fraction", &a.noise_fraction);
        line("analyzer.filter_sigma", &a.filter_sigma);
        let s = &self.satisfaction;
        line("satisfaction.text_ceiling", &s.text_ceiling);
        line("satisfaction.blend_midpoint", &s.blend_midpoint);
        line("satisfaction.blend_sharpness", &s.blend_sharpness);
        let m = &self.weights;
        line("match.class", &m.class);
        line("match.geometry", &m.geometry);
        line("match.descriptors", &m.descriptors);
        line("match.distance_scale", &m.distance_scale);
        line("eval.budget", &self.eval_budget);
        let g = &self.generation;
        line("generate.max_objects", &g.max_objects);
        line("generate.canvas", &format!("{}x{}", g.canvas.width, g.canvas.height));
        let overlap = match g.overlap {
            OverlapMode::Disjoint => "disjoint",
            OverlapMode::Free => "free",
        };
        line("generate.overlap", &overlap);
        line("generate.noise_probability", &g.noise_probability);
        line("generate.min_size", &g.min_size);
        line("generate.max_size", &g.max_size);
        out
    }

    /// Lowercase hex SHA-256 of [`Config::canonical_text`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_text().as_bytes())
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                write!(s, "{b:02x}").expect("writing to a String cannot fail");
                s
            })
    }

    pub fn evaluator(&self) -> Evaluator {
        Evaluator {
            analyzer: Analyzer::new(self.analyzer, self.palette.clone()),
            satisfaction: self.satisfaction.clone(),
            weights: self.weights.clone(),
            eval_budget: self.eval_budget,
        }
    }
}

enum SetError {
    Unknown,
    Vocabulary,
    Value(String),
}

impl From<String> for SetError {
    fn from(reason: String) -> Self {
        SetError::Value(reason)
    }
}

impl From<&str> for SetError {
    fn from(reason: &str) -> Self {
        SetError::Value(reason.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_matches_library_defaults() {
        assert_eq!(Config::default(), Config::builtin());
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut config = Config::default();
        config.satisfaction.text_ceiling = 0.45;
        config.palette.set(Color::Teal, [1, 2, 3]);
        config.generation.overlap = OverlapMode::Free;
        let again = Config::parse(&config.canonical_text()).unwrap();
        assert_eq!(again, config);
        assert_eq!(again.hash(), config.hash());
    }

    #[test]
    fn hash_ignores_layout_but_not_values() {
        let base = Config::default().hash();
        assert_eq!(base.len(), 64);
        assert_eq!(Config::parse("").unwrap().hash(), base);
        assert_eq!(Config::parse("# nothing\n\n  match.class = 0.5  # same\n").unwrap().hash(), base);
        assert_ne!(Config::parse("satisfaction.blend_sharpness = 0.2").unwrap().hash(), base);
    }

    #[test]
    fn errors_name_the_line() {
        let err = Config::parse("\nfoo.bar = 1").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 2, .. }), "{err}");
        let err = Config::parse("palette.red = 1 2").unwrap_err();
        assert!(matches!(err, ConfigError::Value { line: 1, .. }), "{err}");
        let err = Config::parse("eval.budget = 4,17,2").unwrap_err();
        assert!(matches!(err, ConfigError::Value { .. }), "{err}");
        let err = Config::parse("just words").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }), "{err}");
        let err = Config::parse("vocabulary_version = other").unwrap_err();
        assert!(matches!(err, ConfigError::Vocabulary { .. }), "{err}");
        assert!(matches!(
            Config::parse("satisfaction.blend_sharpness = 0").unwrap_err(),
            ConfigError::Invalid(_)
        ));
        assert!(matches!(Config::parse("match.class = 0.9").unwrap_err(), ConfigError::Invalid(_)));
    }
}
