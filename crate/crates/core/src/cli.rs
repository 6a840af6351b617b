//! Command-line front end.
//!
//! Five subcommands: `generate` (target image to packed binary frames),
//! `reconstruct` (packed frames to a replay preview image), `sweep` (config
//! file to CSV), `primes` (table-length helpers) and `calibrate` (reference
//! error table). Every command is deterministic given its flags and inputs;
//! no wall-clock or environment entropy reaches the outputs.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 data format.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::cgh::{
    frame_to_gray, load_frames, ospr_generate, reconstruct_average, save_frames,
    QuantisationScheme, TargetSpec,
};
use crate::error::{Error, Result};
use crate::experiments::{csv_bytes, emit_csv, run_cell, run_sweep, SweepConfig};
use crate::field::RealField;
use crate::image_io::{load_image, save_gray, synthetic, SyntheticKind};
use crate::metrics::aggregate;
use crate::phase::{next_prime_above, primes_up_to, PhaseLut, PhaseSource};

#[derive(Debug, Parser)]
#[command(
    name = "holo",
    version,
    about = "Binary hologram generation with lookup-table phase randomisation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate packed binary hologram sub-frames for a target image.
    Generate(GenerateArgs),
    /// Time-average packed sub-frames into a replay preview image.
    Reconstruct(ReconstructArgs),
    /// Run a table-length sweep from a config file and write CSV.
    Sweep(SweepArgs),
    /// Prime utilities for choosing table lengths.
    Primes(PrimesArgs),
    /// Compute the per-image reference errors used for normalisation.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Target image: grayscale PNG/PGM path or synthetic:<kind>:WxH.
    #[arg(long)]
    image: String,
    /// Output path for the packed frames container.
    #[arg(long)]
    out: PathBuf,
    /// Number of sub-frames.
    #[arg(long, default_value_t = 24)]
    subframes: usize,
    /// Quantisation scheme (only `binary` is available).
    #[arg(long, default_value = "binary")]
    scheme: String,
    /// Phase source: independent | flat | lut:N | lutfile:PATH.
    #[arg(long, default_value = "independent")]
    source: String,
    /// Seed for the deterministic generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hologram resolution WxH; defaults to width x (2 * height) of the
    /// image so the target fills the upper half-plane.
    #[arg(long)]
    resolution: Option<String>,
    /// Also write each sub-frame as an 8-bit grayscale PNG into this
    /// directory.
    #[arg(long)]
    subframe_dir: Option<PathBuf>,
    /// Export the phase table used (lut: sources only).
    #[arg(long)]
    lut_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    /// Packed frames container written by `generate`.
    #[arg(long)]
    frames: PathBuf,
    /// Output image path (.png or .pgm).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Sweep config file (key = value format).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out_csv: PathBuf,
    /// Also write a gnuplot-friendly aggregate table (n_lut, mean, band).
    #[arg(long)]
    out_plot: Option<PathBuf>,
    /// Worker thread count (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct PrimesArgs {
    /// Print the first prime strictly greater than N.
    #[arg(long)]
    above: Option<u64>,
    /// Print all primes up to and including N, one per line.
    #[arg(long)]
    list_up_to: Option<u64>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Sweep config file; only the reference-length cells are run.
    #[arg(long)]
    config: PathBuf,
}

/// Parse arguments from the environment and run. Returns the process exit
/// code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; --help/--version exit 0.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Reconstruct(args) => cmd_reconstruct(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Primes(args) => cmd_primes(args),
        Command::Calibrate(args) => cmd_calibrate(args),
    }
}

fn parse_resolution(s: &str) -> Result<(usize, usize)> {
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("bad resolution component {v:?}")))
    };
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("resolution {s:?} is not WxH")))?;
    Ok((parse(w)?, parse(h)?))
}

/// `synthetic:<kind>:WxH` or a file path.
fn load_target_image(spec: &str) -> Result<crate::field::RealImage> {
    if let Some(rest) = spec.strip_prefix("synthetic:") {
        let (kind, size) = rest.split_once(':').ok_or_else(|| {
            Error::Config(format!(
                "synthetic target {spec:?} needs a size, e.g. synthetic:rectangle:128x128"
            ))
        })?;
        let kind: SyntheticKind = kind.parse()?;
        let (w, h) = parse_resolution(size)?;
        synthetic(kind, w, h)
    } else {
        load_image(spec)
    }
}

enum SourceChoice {
    Independent,
    Flat,
    Lut(usize),
    LutFile(PathBuf),
}

fn parse_source(s: &str) -> Result<SourceChoice> {
    if s == "independent" {
        Ok(SourceChoice::Independent)
    } else if s == "flat" {
        Ok(SourceChoice::Flat)
    } else if let Some(n) = s.strip_prefix("lut:") {
        let n = n
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("bad table length in --source {s:?}")))?;
        Ok(SourceChoice::Lut(n))
    } else if let Some(path) = s.strip_prefix("lutfile:") {
        Ok(SourceChoice::LutFile(PathBuf::from(path)))
    } else {
        Err(Error::Config(format!(
            "unknown --source {s:?}; expected independent, flat, lut:N or lutfile:PATH"
        )))
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    if args.scheme != "binary" {
        return Err(Error::Config(format!(
            "unknown --scheme {:?}; only `binary` is available",
            args.scheme
        )));
    }
    if args.subframes == 0 {
        return Err(Error::Config("--subframes must be at least 1".into()));
    }
    let image = load_target_image(&args.image)?;
    let (pw, ph) = match &args.resolution {
        Some(r) => parse_resolution(r)?,
        None => (image.width(), 2 * image.height()),
    };
    let spec = TargetSpec::upper_half(image, pw, ph)?;

    let choice = parse_source(&args.source)?;
    let mut source = match &choice {
        SourceChoice::Independent => PhaseSource::independent(args.seed),
        SourceChoice::Flat => PhaseSource::flat(),
        SourceChoice::Lut(n) => PhaseSource::cyclic(PhaseLut::build(args.seed, *n)?),
        SourceChoice::LutFile(path) => PhaseSource::cyclic(PhaseLut::load(path)?),
    };
    if let Some(lut_path) = &args.lut_out {
        match &choice {
            SourceChoice::Lut(n) => PhaseLut::build(args.seed, *n)?.save(lut_path)?,
            _ => {
                return Err(Error::Config(
                    "--lut-out requires --source lut:N".into(),
                ))
            }
        }
    }

    let scheme = QuantisationScheme::binary_phase();
    let frames = ospr_generate(&spec, args.subframes, &mut source, &scheme)?;
    save_frames(&frames, &args.out)?;

    if let Some(dir) = &args.subframe_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, frame) in frames.frames().iter().enumerate() {
            let pixels = frame_to_gray(frame)?;
            let path = dir.join(format!("frame_{i:03}.png"));
            save_gray(&path, frame.width(), frame.height(), &pixels)?;
        }
    }

    let source_desc = match &choice {
        SourceChoice::Independent => format!("independent (seed {})", args.seed),
        SourceChoice::Flat => "flat".to_string(),
        SourceChoice::Lut(n) => format!("cyclic table, N_LUT = {n} (seed {})", args.seed),
        SourceChoice::LutFile(p) => format!(
            "cyclic table from {} (N_LUT = {})",
            p.display(),
            source.lut_len().unwrap_or(0)
        ),
    };
    println!(
        "wrote {} sub-frames of {}x{} to {}",
        frames.len(),
        pw,
        ph,
        args.out.display()
    );
    println!("phase source: {source_desc}");
    println!("phases consumed: {}", source.consumed());
    Ok(())
}

/// Move the DC bin to the centre for display.
fn fftshift(field: &RealField) -> RealField {
    let (w, h) = (field.width(), field.height());
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let sx = (x + w / 2) % w;
            let sy = (y + h / 2) % h;
            out[sy * w + sx] = field.get(x, y);
        }
    }
    RealField::from_parts_unchecked(w, h, out)
}

/// Linear tone map scaled so the given percentile of the data hits full
/// white; everything above saturates. Falls back to the maximum when the
/// percentile lands on zero (sparse images such as a bare DC spike).
fn tone_map(field: &RealField, percentile: f64) -> Vec<u8> {
    let mut sorted: Vec<f64> = field.as_slice().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("intensities are finite"));
    let rank = ((sorted.len() as f64 * percentile).ceil() as usize)
        .clamp(1, sorted.len())
        - 1;
    let mut scale = sorted[rank];
    if scale <= 0.0 {
        scale = *sorted.last().expect("field is non-empty");
    }
    field
        .as_slice()
        .iter()
        .map(|&v| {
            if scale <= 0.0 {
                0
            } else {
                ((v / scale).min(1.0) * 255.0).round() as u8
            }
        })
        .collect()
}

fn cmd_reconstruct(args: ReconstructArgs) -> Result<()> {
    let frames = load_frames(&args.frames)?;
    let average = reconstruct_average(&frames);
    let centred = fftshift(&average);
    let pixels = tone_map(&centred, 0.995);
    save_gray(&args.out, centred.width(), centred.height(), &pixels)?;
    println!(
        "reconstructed {} sub-frames of {}x{} into {}",
        frames.len(),
        frames.width(),
        frames.height(),
        args.out.display()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let config = SweepConfig::from_file(&args.config)?;
    let result = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build a {n}-thread pool: {e}")))?
            .install(|| run_sweep(&config)),
        None => run_sweep(&config),
    }?;
    emit_csv(&result, &args.out_csv)?;
    println!(
        "wrote {} records ({} bytes) to {}",
        result.records.len(),
        csv_bytes(&result).len(),
        args.out_csv.display()
    );

    if let Some(plot) = &args.out_plot {
        write_plot_table(&result, &config, plot)?;
        println!("wrote aggregate table to {}", plot.display());
    }

    // Per image: the best and worst mean normalised error and where they
    // occur.
    let calibration = result
        .calibration
        .as_ref()
        .expect("sweep always calibrates");
    println!("image            min mean NMSE (n_lut)      max mean NMSE (n_lut)");
    for image in &config.images {
        let factor = calibration.factor(&image.id)?;
        let mut best: Option<(u64, f64)> = None;
        let mut worst: Option<(u64, f64)> = None;
        for ((id, n_lut), agg) in &result.aggregates {
            if id != &image.id {
                continue;
            }
            let nmse = agg.mean * factor;
            if best.is_none_or(|(_, v)| nmse < v) {
                best = Some((*n_lut, nmse));
            }
            if worst.is_none_or(|(_, v)| nmse > v) {
                worst = Some((*n_lut, nmse));
            }
        }
        let (bn, bv) = best.expect("at least one column per image");
        let (wn, wv) = worst.expect("at least one column per image");
        println!("{:<16} {bv:.6e} ({bn:<10}) {wv:.6e} ({wn})", image.id);
    }
    Ok(())
}

/// Gnuplot-friendly aggregate table: one block per image, columns
/// `n_lut mean std mean-2std mean+2std`, blocks separated by blank lines.
fn write_plot_table(
    result: &crate::experiments::SweepResult,
    config: &SweepConfig,
    path: &std::path::Path,
) -> Result<()> {
    let mut out = String::from("# n_lut mean_mse std_mse mean_minus_2std mean_plus_2std\n");
    for image in &config.images {
        out.push_str(&format!("# image: {}\n", image.id));
        for ((id, n_lut), agg) in &result.aggregates {
            if id == &image.id {
                out.push_str(&format!(
                    "{} {:.17e} {:.17e} {:.17e} {:.17e}\n",
                    n_lut, agg.mean, agg.std, agg.lower, agg.upper
                ));
            }
        }
        out.push_str("\n\n");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn cmd_primes(args: PrimesArgs) -> Result<()> {
    if let Some(n) = args.above {
        println!("{}", next_prime_above(n));
    } else if let Some(n) = args.list_up_to {
        for p in primes_up_to(n) {
            println!("{p}");
        }
    }
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let config = SweepConfig::from_file(&args.config)?;
    println!(
        "reference column: n_lut = {} over {} runs",
        config.nmse_reference, config.runs
    );
    println!("image            mean_mse");
    for image in &config.images {
        let values: Vec<f64> = (0..config.runs)
            .map(|run| run_cell(&config, &image.id, config.nmse_reference, run).map(|r| r.mse))
            .collect::<Result<_>>()?;
        let agg = aggregate(&values)?;
        println!("{:<16} {:.17e}", image.id, agg.mean);
    }
    Ok(())
}
