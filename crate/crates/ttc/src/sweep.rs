//! Rate-satisfaction sweeps over a seeded scene corpus.
//!
//! Each `(seed, scheme)` pair yields one record. Scenes are scored in
//! parallel and the records sorted by seed, then scheme list position, so
//! the CSV output does not depend on scheduling. Wall times are kept out of
//! the records file and written to `timings.csv`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use rayon::prelude::*;
use ttc_core::eval::EvalError;
use ttc_core::rdtheory::english_entropy_reference;
use ttc_core::scene::generate_scene;
use ttc_core::vocab::VOCABULARY_VERSION;
use ttc_core::SchemeId;

use crate::config::Config;

pub const RECORDS_FILE: &str = "records.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub scheme: SchemeId,
    /// Position of `scheme` in the sweep's scheme list.
    pub scheme_index: usize,
    pub seed: u64,
    pub rate_bits: u64,
    pub bits_per_pixel: f64,
    pub text_fidelity: f64,
    pub pixel_fidelity: f64,
    pub satisfaction: f64,
    pub psnr_db: f64,
    pub wall_time: Duration,
}

/// Per-scheme means.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSummary {
    pub scheme: SchemeId,
    pub scenes: usize,
    pub rate_bits: f64,
    pub bits_per_pixel: f64,
    pub text_fidelity: f64,
    pub pixel_fidelity: f64,
    pub satisfaction: f64,
    pub psnr_db: f64,
}

impl SchemeSummary {
    pub fn log10_bits_per_pixel(&self) -> f64 {
        self.bits_per_pixel.log10()
    }
}

/// Parses `a..b` (inclusive), `a..=b` or a single seed.
pub fn parse_seed_range(text: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("bad seed range `{text}`, expected `FIRST..LAST` or a single seed");
    let (lo, hi) = match text.split_once("..") {
        None => {
            let s = text.trim().parse().map_err(|_| bad())?;
            (s, s)
        }
        Some((lo, hi)) => {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

/// Splits a comma-separated scheme list, ignoring commas inside
/// parentheses; `default` expands to the default scheme set.
pub fn parse_scheme_list(text: &str) -> Result<Vec<SchemeId>, String> {
    let mut items = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                items.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    items.push(&text[start..]);
    let mut schemes = Vec::new();
    for item in items.into_iter().map(str::trim) {
        if item == "default" {
            schemes.extend(SchemeId::defaults());
        } else {
            schemes.push(item.parse().map_err(|e: ttc_core::eval::SchemeParseError| e.to_string())?);
        }
    }
    if schemes.is_empty() {
        return Err("empty scheme list".into());
    }
    Ok(schemes)
}

pub fn run(config: &Config, seeds: &[u64], schemes: &[SchemeId]) -> Result<Vec<SweepRecord>> {
    ensure!(!seeds.is_empty(), "the seed range is empty");
    ensure!(!schemes.is_empty(), "the scheme list is empty");
    let evaluator = config.evaluator();
    let per_scene: Vec<Vec<SweepRecord>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<SweepRecord>> {
            let scene = generate_scene(seed, &config.generation)
                .with_context(|| format!("generating scene {seed}"))?;
            let pixels = scene.canvas.area() as f64;
            schemes
                .iter()
                .enumerate()
                .map(|(scheme_index, &scheme)| {
                    let start = Instant::now();
                    let report = evaluator
                        .score(&scene, scheme)
                        .map_err(|e: EvalError| anyhow::anyhow!(e))
                        .with_context(|| format!("scene {seed}, scheme {scheme}"))?;
                    Ok(SweepRecord {
                        scheme,
                        scheme_index,
                        seed,
                        rate_bits: report.rate_bits,
                        bits_per_pixel: report.rate_bits as f64 / pixels,
                        text_fidelity: report.text_fidelity,
                        pixel_fidelity: report.pixel_fidelity,
                        satisfaction: report.satisfaction,
                        psnr_db: report.psnr_db,
                        wall_time: start.elapsed(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<SweepRecord> = per_scene.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.seed, r.scheme_index));
    Ok(records)
}

/// Means per scheme, in scheme list order.
pub fn summarize(records: &[SweepRecord], schemes: &[SchemeId]) -> Vec<SchemeSummary> {
    schemes
        .iter()
        .enumerate()
        .filter_map(|(index, &scheme)| {
            let rows: Vec<&SweepRecord> = records.iter().filter(|r| r.scheme_index == index).collect();
            if rows.is_empty() {
                return None;
            }
            let mean = |f: fn(&SweepRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
            Some(SchemeSummary {
                scheme,
                scenes: rows.len(),
                rate_bits: mean(|r| r.rate_bits as f64),
                bits_per_pixel: mean(|r| r.bits_per_pixel),
                text_fidelity: mean(|r| r.text_fidelity),
                pixel_fidelity: mean(|r| r.pixel_fidelity),
                satisfaction: mean(|r| r.satisfaction),
                psnr_db: mean(|r| r.psnr_db),
            })
        })
        .collect()
}

fn metadata(out: &mut impl Write, config: &Config) -> std::io::Result<()> {
    writeln!(out, "# vocabulary_version = {VOCABULARY_VERSION}")?;
    writeln!(out, "# config_sha256 = {}", config.hash())?;
    writeln!(out, "# english_entropy_bits_per_char = {}", english_entropy_reference())?;
    writeln!(out, "# eval_budget = {}", config.eval_budget)?;
    writeln!(
        out,
        "# satisfaction = text_ceiling {} blend_midpoint {} blend_sharpness {}",
        config.satisfaction.text_ceiling, config.satisfaction.blend_midpoint, config.satisfaction.blend_sharpness
    )
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn write_records(out: impl Write, config: &Config, records: &[SweepRecord]) -> Result<()> {
    let mut out = out;
    metadata(&mut out, config)?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record([
        "seed",
        "scheme",
        "rate_bits",
        "bits_per_pixel",
        "text_fidelity",
        "pixel_fidelity",
        "satisfaction",
        "psnr_db",
    ])?;
    for r in records {
        csv.write_record([
            r.seed.to_string(),
            r.scheme.to_string(),
            r.rate_bits.to_string(),
            r.bits_per_pixel.to_string(),
            r.text_fidelity.to_string(),
            r.pixel_fidelity.to_string(),
            r.satisfaction.to_string(),
            r.psnr_db.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_aggregate(out: impl Write, config: &Config, summaries: &[SchemeSummary]) -> Result<()> {
    let mut out = out;
    metadata(&mut out, config)?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record([
        "scheme",
        "scenes",
        "mean_rate_bits",
        "mean_bits_per_pixel",
        "log10_bits_per_pixel",
        "mean_text_fidelity",
        "mean_pixel_fidelity",
        "mean_satisfaction",
        "mean_psnr_db",
    ])?;
    for s in summaries {
        csv.write_record([
            s.scheme.to_string(),
            s.scenes.to_string(),
            s.rate_bits.to_string(),
            s.bits_per_pixel.to_string(),
            s.log10_bits_per_pixel().to_string(),
            s.text_fidelity.to_string(),
            s.pixel_fidelity.to_string(),
            s.satisfaction.to_string(),
            s.psnr_db.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_timings(out: impl Write, records: &[SweepRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["seed", "scheme", "wall_time_us"])?;
    for r in records {
        csv.write_record([r.seed.to_string(), r.scheme.to_string(), r.wall_time.as_micros().to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

/// Writes the records, aggregate and timings files into `dir`, creating it
/// if needed. Returns the paths of the records and aggregate files.
pub fn write_dir(config: &Config, records: &[SweepRecord], schemes: &[SchemeId], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_records(create(dir, RECORDS_FILE)?, config, records)?;
    write_aggregate(create(dir, AGGREGATE_FILE)?, config, &summarize(records, schemes))?;
    write_timings(create(dir, TIMINGS_FILE)?, records)?;
    Ok((dir.join(RECORDS_FILE), dir.join(AGGREGATE_FILE)))
}

/// [`run`] followed by [`write_dir`].
pub fn sweep_to_dir(config: &Config, seeds: &[u64], schemes: &[SchemeId], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let records = run(config, seeds, schemes)?;
    write_dir(config, &records, schemes, dir)
}
