use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use ispbench::dataflow::{ClockMode, DEFAULT_CHANNEL_DEPTH};
use ispbench::harness::{emit_report, run_matrix, Format, HarnessConfig, ImageSource, Mode, Selection};
use ispbench::synth::SynthSpec;
use ispbench::variants::parse_list;
use ispbench::Exec;

/// Benchmark the ISP kernels and pipeline across optimization variants.
///
/// Variants are written as flag letters R (restrict), I (ivdep),
/// W (fused channel loop), C (constant cache, `_K` sets its size in KiB)
/// or B (buffered read-only data), plus `+Un` for an unrolled gamut inner
/// loop; `BASE` has none. Example: `RI,RIW,RIWC_128,RIWB+U6`.
#[derive(Debug, Parser)]
#[command(name = "ispbench", version)]
struct Args {
    /// Input image: a P6 .ppm, or a raw planar file (needs --raw-size).
    #[arg(long, conflicts_with = "synth")]
    image: Option<PathBuf>,
    /// Width and height of a raw --image, as WxH.
    #[arg(long, value_name = "WxH", requires = "image")]
    raw_size: Option<String>,
    /// Synthetic input, WxH:kind[:arg] with kind noise[:seed], gradient,
    /// constant:v or uniform:r,g,b. Default 768x512:noise:42.
    #[arg(long, value_name = "SPEC")]
    synth: Option<String>,
    /// TOML parameter file (transform, gamut, tone, model).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Gamut control points for the built-in parameters.
    #[arg(long)]
    points: Option<usize>,
    /// demosaic, denoise, transform, gamut, tonemap or pipeline.
    #[arg(long, default_value = "pipeline")]
    stage: String,
    /// Comma-separated variant list.
    #[arg(long, value_name = "LIST")]
    variants: Option<String>,
    #[arg(long, default_value_t = 10)]
    reps: u32,
    /// sequential or dataflow.
    #[arg(long, default_value = "sequential")]
    mode: String,
    /// wall or virtual.
    #[arg(long, default_value = "wall")]
    clock: String,
    #[arg(long, default_value_t = DEFAULT_CHANNEL_DEPTH)]
    channel_depth: usize,
    /// Constant-cache size for C variants without an explicit `_K`.
    #[arg(long, value_name = "BYTES")]
    cache_size: Option<u64>,
    /// text, csv or json.
    #[arg(long, default_value = "text")]
    format: String,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the reference kernels on one thread.
    #[arg(long)]
    sequential_reference: bool,
    /// Flip one output bit of the named variant (equivalence-gate check).
    #[arg(long, hide = true)]
    corrupt_variant: Option<String>,
}

fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s.split_once(['x', 'X']).context("expected WxH")?;
    Ok((w.parse().context("bad width")?, h.parse().context("bad height")?))
}

fn config(args: &Args) -> Result<(HarnessConfig, Format)> {
    let source = match (&args.image, &args.synth) {
        (Some(path), _) => match &args.raw_size {
            Some(size) => {
                let (width, height) = parse_dims(size)?;
                ImageSource::Raw {
                    path: path.clone(),
                    width,
                    height,
                }
            }
            None if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")) => ImageSource::Ppm(path.clone()),
            None => bail!("raw --image needs --raw-size WxH (or use a .ppm file)"),
        },
        (None, Some(spec)) => ImageSource::Synth(spec.parse::<SynthSpec>().map_err(anyhow::Error::msg)?),
        (None, None) => ImageSource::Synth(SynthSpec::default()),
    };
    let variants = match &args.variants {
        Some(list) => parse_list(list)?,
        None => Vec::new(),
    };
    let cfg = HarnessConfig {
        source,
        params_path: args.params.clone(),
        points: args.points,
        selection: args.stage.parse::<Selection>().map_err(anyhow::Error::msg)?,
        variants,
        reps: args.reps,
        mode: args.mode.parse::<Mode>().map_err(anyhow::Error::msg)?,
        clock: args.clock.parse::<ClockMode>().map_err(anyhow::Error::msg)?,
        channel_depth: args.channel_depth,
        cache_size: args.cache_size,
        exec: if args.sequential_reference {
            Exec::Sequential
        } else {
            Exec::Parallel
        },
        corrupt_variant: args.corrupt_variant.clone(),
        ..HarnessConfig::default()
    };
    let format = args.format.parse::<Format>().map_err(anyhow::Error::msg)?;
    Ok((cfg, format))
}

fn run(args: &Args) -> Result<bool> {
    let (cfg, format) = config(args)?;
    let report = run_matrix(&cfg)?;
    let bytes = emit_report(&report, format);
    match &args.out {
        Some(path) => std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("ispbench: some variants failed equivalence");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("ispbench: {e:#}");
            ExitCode::from(2)
        }
    }
}
