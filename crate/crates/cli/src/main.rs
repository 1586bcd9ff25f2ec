//! `amalgam`: decompositions, norms, traces and the verification suites.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amalgam_core::verify::{self, ExperimentConfig, Exponent, Report, Suite};
use amalgam_core::{
    export_bandset, extend, load_amf, save_amf, trace, BandSet, BumpProfile, Decomposer, ExtensionProfile,
    GridSpec, NormSpec, SampledField, ShiftLattice, WindowFamily,
};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "amalgam",
    version,
    about = "Frequency-uniform decompositions, amalgam norms and traces on periodic grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Isotropic,
    AnisoLast,
    AnisoLast2,
    Maximal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shifts {
    Lattice,
    Grid,
}

#[derive(Subcommand)]
enum Command {
    /// Write every band of a field as an AMF file plus index.json.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        /// Window radius; defaults to the largest one the grid supports.
        #[arg(long = "K")]
        radius: Option<i64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        sharpness: f64,
    },
    /// Print an amalgam quasi-norm of a field.
    Norm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        p: Exponent,
        #[arg(long)]
        q: Exponent,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        s: f64,
        #[arg(long, value_enum, default_value = "isotropic")]
        variant: Variant,
        #[arg(long)]
        r: Option<Exponent>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long = "K")]
        radius: Option<i64>,
        /// Shift set of the maximal function.
        #[arg(long, value_enum, default_value = "lattice")]
        shifts: Shifts,
    },
    /// Restrict a field to x_n = 0.
    Trace {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extend an (n-1)-dimensional field with a new last axis of period L and N samples.
    Extend {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "L")]
        period: usize,
        #[arg(long = "N")]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification suite and write a CSV report and a JSON summary.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Defaults to the report path with a .json extension.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Largest trace ratio over the corpus against the loss-adjusted norm, per s.
    Scan {
        #[arg(long)]
        p: Exponent,
        #[arg(long)]
        q: Exponent,
        /// `start:stop:step`, inclusive of stop.
        #[arg(long = "s-grid")]
        s_grid: String,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
}

fn largest_radius(spec: &GridSpec) -> Result<i64> {
    // N / (2L) > K + 1 on every axis
    let k = (0..spec.dimension())
        .map(|a| {
            let ratio = spec.samples()[a] as f64 / (2.0 * spec.period()[a] as f64);
            ratio.ceil() as i64 - 2
        })
        .min()
        .unwrap_or(0);
    if k < 1 {
        bail!("grid is too coarse for any window radius");
    }
    Ok(k)
}

fn family_for(spec: &GridSpec, radius: Option<i64>, bump: BumpProfile) -> Result<WindowFamily> {
    let k = match radius {
        Some(k) => k,
        None => largest_radius(spec)?,
    };
    Ok(WindowFamily::new(spec.dimension(), k, bump)?)
}

fn decompose_file(input: &Path, radius: Option<i64>, bump: BumpProfile) -> Result<BandSet> {
    let f: SampledField = load_amf(input).with_context(|| format!("reading {}", input.display()))?;
    let family = family_for(f.spec(), radius, bump)?;
    Ok(Decomposer::new(f.spec().clone(), family)?.decompose(&f)?)
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number {t:?} in s-grid"))
        })
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        bail!("s-grid must be start:stop:step");
    };
    if step.is_nan() || step <= 0.0 || stop < start {
        bail!("s-grid needs step > 0 and stop >= start");
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn write_report(report: &Report, csv: &Path, summary: &Path) -> Result<()> {
    report.write_csv(BufWriter::new(
        File::create(csv).with_context(|| format!("creating {}", csv.display()))?,
    ))?;
    report.write_summary(BufWriter::new(
        File::create(summary).with_context(|| format!("creating {}", summary.display()))?,
    ))?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Decompose {
            input,
            radius,
            out,
            sharpness,
        } => {
            let bump = BumpProfile::new(sharpness, BumpProfile::default().evaluation_cache_resolution())?;
            let bands = decompose_file(&input, radius, bump)?;
            export_bandset(&bands, &out)?;
            println!("{} bands written to {}", bands.len(), out.display());
        }
        Command::Norm {
            input,
            p,
            q,
            s,
            variant,
            r,
            b,
            radius,
            shifts,
        } => {
            let bands = decompose_file(&input, radius, BumpProfile::default())?;
            let (p, q, r) = (p.0, q.0, r.map(|r| r.0));
            let need = |v: Option<f64>, name: &str| {
                v.with_context(|| format!("--{name} is required for this variant"))
            };
            let spec = match variant {
                Variant::Isotropic => NormSpec::isotropic(p, q, s),
                Variant::AnisoLast => NormSpec::aniso_last(p, q, need(r, "r")?, s),
                Variant::AnisoLast2 => NormSpec::aniso_last2(p, q, need(r, "r")?, s),
                Variant::Maximal => match r {
                    Some(r) => NormSpec::maximal_aniso(p, q, r, s, need(b, "b")?),
                    None => NormSpec::maximal_isotropic(p, q, s, need(b, "b")?),
                },
            };
            let value = if spec.variant.is_maximal() {
                let shifts = match shifts {
                    Shifts::Lattice => ShiftLattice::Integer,
                    Shifts::Grid => ShiftLattice::Grid,
                };
                amalgam_core::maximal_wiener_norm(&bands, &spec, shifts)?
            } else {
                amalgam_core::evaluate(&bands, &spec)?
            };
            println!("{value:e}");
        }
        Command::Trace { input, out } => {
            let f = load_amf(&input).with_context(|| format!("reading {}", input.display()))?;
            save_amf(&trace(&f)?, &out)?;
        }
        Command::Extend {
            input,
            period,
            samples,
            out,
        } => {
            let g = load_amf(&input).with_context(|| format!("reading {}", input.display()))?;
            let target = g.spec().with_last_axis(period, samples)?;
            save_amf(&extend(&g, &ExtensionProfile::default(), &target)?, &out)?;
        }
        Command::Verify {
            suite,
            config,
            report,
            summary,
        } => {
            let suite: Suite = suite.parse()?;
            let config = load_config(config.as_deref())?;
            let result = verify::run_suite(&config, suite)?;
            let summary = summary.unwrap_or_else(|| report.with_extension("json"));
            write_report(&result, &report, &summary)?;
            let s = result.summary();
            println!(
                "{} rows, {} bounded, {} failed; report {}",
                s.rows,
                s.bounded,
                s.failed,
                report.display()
            );
            return Ok(s.all_pass);
        }
        Command::Scan {
            p,
            q,
            s_grid,
            eps,
            config,
            report,
        } => {
            let config = load_config(config.as_deref())?;
            config.validate()?;
            let s_values = parse_grid(&s_grid)?;
            let mut out = Report::new();
            for g in &config.geometries {
                let corpus = verify::generate_corpus(&g.grid()?, g.radius, config.seed, config.corpus_size)?;
                out.extend(verify::regularity_scan(
                    p.0,
                    q.0,
                    &s_values,
                    eps,
                    &corpus,
                    &g.family(config.bump)?,
                )?);
            }
            write_report(&out, &report, &report.with_extension("json"))?;
            for row in out.rows() {
                println!("{} ratio={:e}", row.params, row.ratio);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
