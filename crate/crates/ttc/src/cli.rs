//! Command line. Usage errors exit with 2, data errors with 1.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use ttc_core::apps::{
    answer_queries, default_rules, denoise_text, evaluate_denoise, mi_upper_bound, DenoiseRule, Query,
};
use ttc_core::rdtheory::{sample_curves, RateScale};
use ttc_core::scene::{generate_scene, render};
use ttc_core::textcodec::{self, Bitstream};
use ttc_core::transform::{dequantize_scene, forward, inverse, parse, serialize};
use ttc_core::{Budget, Color, FidelityReport, Image, SchemeId, TextualRepresentation};

use crate::config::{parse_budget, Config};
use crate::ppm;
use crate::sweep;

#[derive(Debug, Parser)]
#[command(name = "ttc", version, about = "Textual transform coding of synthetic scenes")]
pub struct Cli {
    /// Configuration file overriding the shipped defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Scene seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_name = "A")]
    pub text_ceiling: Option<f64>,
    #[arg(long, global = true, value_name = "BETA0")]
    pub blend_midpoint: Option<f64>,
    #[arg(long, global = true, value_name = "TAU")]
    pub blend_sharpness: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw the scene for `--seed` and write its canonical text.
    Generate {
        /// Budget of the written description; the default keeps every object.
        #[arg(long, default_value = "255,16,8", value_parser = parse_budget)]
        budget: Budget,
        /// Also write the exact rendering of the scene as PPM.
        #[arg(long, value_name = "PATH")]
        image: Option<PathBuf>,
        #[arg(default_value = "-")]
        output: String,
    },
    /// Canonical text to a TTC1 bitstream.
    Encode { input: String, output: String },
    /// TTC1 bitstream to canonical text.
    Decode {
        input: String,
        #[arg(default_value = "-")]
        output: String,
    },
    /// Canonical text to PPM.
    Render { input: String, output: String },
    /// PPM to canonical text.
    Analyze {
        input: String,
        #[arg(long, default_value = "8,6,2", value_parser = parse_budget)]
        budget: Budget,
        /// Background color word; estimated from the image when absent.
        #[arg(long)]
        background: Option<String>,
        #[arg(default_value = "-")]
        output: String,
    },
    /// Score a reconstruction (`--image`) or a coding scheme (`--scheme`).
    Evaluate {
        /// Canonical text of the source; the `--seed` scene when absent.
        #[arg(long, value_name = "PATH")]
        scene: Option<PathBuf>,
        #[arg(long, value_name = "PATH", conflicts_with = "scheme")]
        image: Option<PathBuf>,
        #[arg(long, default_value = "text(4,6,2)")]
        scheme: SchemeId,
    },
    /// Score every scheme on every seed and write CSV results.
    Sweep {
        /// Inclusive seed range `FIRST..LAST`.
        #[arg(long, default_value = "0..99", value_parser = sweep::parse_seed_range)]
        seeds: Seeds,
        /// Comma-separated scheme ids, or `default`.
        #[arg(long, default_value = "default", value_parser = sweep::parse_scheme_list)]
        schemes: Schemes,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Gaussian distortion-rate and fidelity-rate curves as CSV.
    Theory {
        #[arg(long, default_value_t = 1.0)]
        variance: f64,
        /// `MIN:MAX:N` rates in bits per sample.
        #[arg(long, default_value = "0:4:5", value_parser = parse_rates)]
        rates: (f64, f64, usize),
        /// Space the rates evenly in log10.
        #[arg(long)]
        log: bool,
        #[arg(default_value = "-")]
        output: String,
    },
    /// Bits released by a stream and by query answers.
    Privacy {
        input: String,
        /// Comma-separated queries: `count`, `has:<class>`, `domcolor`.
        #[arg(long, value_delimiter = ',')]
        queries: Vec<Query>,
    },
    /// Edit descriptor words, or with `--sigma` run the denoising experiment
    /// on the `--seed` scene.
    Denoise {
        #[arg(required_unless_present = "sigma")]
        input: Option<String>,
        #[arg(default_value = "-")]
        output: String,
        /// `word:replacement` or `word:-`; repeatable. Defaults to `noisy:crisp`.
        #[arg(long = "rule")]
        rules: Vec<DenoiseRule>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value = "4,6,2", value_parser = parse_budget)]
        budget: Budget,
    },
}

// Aliases keep clap from treating the parsed lists as repeated arguments.
type Seeds = Vec<u64>;
type Schemes = Vec<SchemeId>;

fn parse_rates(text: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err("expected `MIN:MAX:N`".into());
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"));
    let n = n.trim().parse().map_err(|_| format!("`{n}` is not a count"))?;
    Ok((num(lo)?, num(hi)?, n))
}

fn read_input(path: &str) -> Result<Vec<u8>> {
    if path == "-" {
        let mut bytes = Vec::new();
        io::stdin().read_to_end(&mut bytes).context("reading stdin")?;
        return Ok(bytes);
    }
    fs::read(path).with_context(|| format!("reading {path}"))
}

fn read_text(path: &str) -> Result<String> {
    String::from_utf8(read_input(path)?).with_context(|| format!("{path} is not UTF-8"))
}

fn write_output(path: &str, bytes: &[u8]) -> Result<()> {
    if path == "-" {
        let mut out = io::stdout().lock();
        out.write_all(bytes)?;
        return Ok(out.flush()?);
    }
    fs::write(path, bytes).with_context(|| format!("writing {path}"))
}

fn read_rep(path: &str) -> Result<TextualRepresentation> {
    parse(&read_text(path)?).with_context(|| format!("parsing {path}"))
}

fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    ppm::decode_ppm(&bytes).with_context(|| format!("decoding {}", path.display()))
}

/// Palette color nearest to the most frequent pixel value.
fn modal_color(image: &Image, config: &Config) -> Color {
    let mut pixels = image.pixels().to_vec();
    pixels.sort_unstable();
    let (mut best, mut best_run, mut run) = (pixels[0], 0, 0);
    for i in 0..pixels.len() {
        run = if i > 0 && pixels[i] == pixels[i - 1] { run + 1 } else { 1 };
        if run > best_run {
            best_run = run;
            best = pixels[i];
        }
    }
    config.palette.nearest(best.map(f64::from))
}

const REPORT_HEADER: &str = "rate_bits,text_fidelity,pixel_fidelity,satisfaction,psnr_db";

fn report_row(report: &FidelityReport) -> String {
    format!(
        "{},{},{},{},{}",
        report.rate_bits, report.text_fidelity, report.pixel_fidelity, report.satisfaction, report.psnr_db
    )
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let s = &mut config.satisfaction;
    s.text_ceiling = cli.text_ceiling.unwrap_or(s.text_ceiling);
    s.blend_midpoint = cli.blend_midpoint.unwrap_or(s.blend_midpoint);
    s.blend_sharpness = cli.blend_sharpness.unwrap_or(s.blend_sharpness);
    config.validate()?;
    Ok(config)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let palette = &config.palette;
    match &cli.command {
        Command::Generate { budget, image, output } => {
            let scene = generate_scene(cli.seed, &config.generation)?;
            if let Some(path) = image {
                fs::write(path, ppm::encode_ppm(&render(&scene, palette)))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            write_output(output, serialize(&forward(&scene, *budget)).as_bytes())
        }
        Command::Encode { input, output } => {
            write_output(output, &textcodec::encode(&read_rep(input)?).to_bytes())
        }
        Command::Decode { input, output } => {
            let stream = Bitstream::from_bytes(&read_input(input)?).with_context(|| format!("reading stream {input}"))?;
            let rep = textcodec::decode(&stream).with_context(|| format!("decoding {input}"))?;
            write_output(output, serialize(&rep).as_bytes())
        }
        Command::Render { input, output } => {
            write_output(output, &ppm::encode_ppm(&inverse(&read_rep(input)?, palette)))
        }
        Command::Analyze {
            input,
            budget,
            background,
            output,
        } => {
            let image = ppm::decode_ppm(&read_input(input)?).with_context(|| format!("decoding {input}"))?;
            let background = match background {
                Some(word) => Color::from_word(word).ok_or_else(|| anyhow!("unknown color word `{word}`"))?,
                None => modal_color(&image, &config),
            };
            let rep = config.evaluator().analyzer.analyze(&image, *budget, background);
            write_output(output, serialize(&rep).as_bytes())
        }
        Command::Evaluate { scene, image, scheme } => {
            let evaluator = config.evaluator();
            let scene = match scene {
                Some(path) => dequantize_scene(&read_rep(&path.to_string_lossy())?, palette),
                None => generate_scene(cli.seed, &config.generation)?,
            };
            let report = match image {
                Some(path) => evaluator.evaluate(&scene, &read_image(path)?)?,
                None => evaluator.score(&scene, *scheme)?,
            };
            write_output("-", format!("{REPORT_HEADER}\n{}\n", report_row(&report)).as_bytes())
        }
        Command::Sweep { seeds, schemes, out } => {
            let (records, aggregate) = sweep::sweep_to_dir(&config, seeds, schemes, out)?;
            eprintln!("wrote {} and {}", records.display(), aggregate.display());
            Ok(())
        }
        Command::Theory {
            variance,
            rates: (lo, hi, n),
            log,
            output,
        } => {
            let scale = if *log { RateScale::Log10 } else { RateScale::Linear };
            let points = sample_curves(*variance, *lo, *hi, *n, scale)?;
            let mut csv = csv::Writer::from_writer(Vec::new());
            csv.write_record(["rate", "distortion", "fidelity", "variance"])?;
            for p in points {
                csv.write_record([p.rate, p.distortion, p.fidelity, p.variance].map(|v| v.to_string()))?;
            }
            write_output(output, &csv.into_inner()?)
        }
        Command::Privacy { input, queries } => {
            let stream = Bitstream::from_bytes(&read_input(input)?).with_context(|| format!("reading stream {input}"))?;
            let mut text = format!("stream_bits = {}\n", mi_upper_bound(&stream)?.k_bits);
            if !queries.is_empty() {
                let rep = textcodec::decode(&stream)?;
                let report = answer_queries(&rep, queries, palette);
                for a in &report.answers {
                    text += &format!("{} = {} ({} bits)\n", a.query, a.answer, a.bits);
                }
                text += &format!("query_bits = {}\n", report.k_bits);
            }
            write_output("-", text.as_bytes())
        }
        Command::Denoise {
            input,
            output,
            rules,
            sigma,
            budget,
        } => {
            let rules = if rules.is_empty() { default_rules() } else { rules.clone() };
            if let Some(sigma) = sigma {
                let scene = generate_scene(cli.seed, &config.generation)?;
                let (before, after) = evaluate_denoise(&config.evaluator(), &scene, *sigma, *budget, &rules)?;
                let text = format!(
                    "stage,{REPORT_HEADER}\nbefore,{}\nafter,{}\n",
                    report_row(&before),
                    report_row(&after)
                );
                return write_output(output, text.as_bytes());
            }
            let Some(input) = input else {
                bail!("an input file is required without --sigma");
            };
            write_output(output, serialize(&denoise_text(&read_rep(input)?, &rules)).as_bytes())
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
