//! Codec benchmark harness.
//!
//! Exit status: 0 when every row encoded, 2 when some rows were skipped
//! (codec missing from the transcoder), 1 on failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use txt2vid_core::bench::{
    emit_matrix, load_matrix, make_synthetic_clip, run_grid, table1_grid, table1_reference_rows, with_ratios,
    write_rows, BenchOptions, MatrixFormat, MatrixRow, Transcoder,
};

#[derive(Debug, Parser)]
#[command(name = "bench", version, about = "Encode a clip over the codec grid and report bitrates")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Grid {
    Table1,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Encode every input at every grid point and write the bitrate matrix.
    Run {
        /// Input clip, or `synthetic` for a generated test clip. Repeatable.
        #[arg(long, required = true)]
        input: Vec<String>,
        #[arg(long, value_enum, default_value = "table1")]
        grid: Grid,
        /// Matrix output, csv or json by extension.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        transcoder_path: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Intermediate files go here.
        #[arg(long, default_value = "bench-work")]
        workdir: PathBuf,
        /// Length of the synthetic clip.
        #[arg(long, default_value_t = 30)]
        synthetic_seconds: u32,
        /// Fill the ratio column with this txt2vid bitrate.
        #[arg(long)]
        txt2vid_bps: Option<f64>,
        /// Also write upsampled 720p copies for viewing.
        #[arg(long)]
        playback: bool,
    },
    /// Recompute the ratio column of a matrix for a txt2vid bitrate.
    Ratios {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        txt2vid_bps: f64,
        /// Write the updated rows here instead of printing a table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the grid's published average bitrates as a matrix.
    Reference {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Run {
            input,
            grid: Grid::Table1,
            out,
            transcoder_path,
            jobs,
            workdir,
            synthetic_seconds,
            txt2vid_bps,
            playback,
        } => {
            let t = Transcoder::locate(transcoder_path.as_deref())?;
            std::fs::create_dir_all(&workdir).with_context(|| format!("creating {}", workdir.display()))?;
            let mut contents = Vec::new();
            for (i, inp) in input.iter().enumerate() {
                if inp == "synthetic" {
                    let clip = workdir.join(format!("synthetic{i}.mkv"));
                    make_synthetic_clip(&t, synthetic_seconds, &clip)?;
                    contents.push((format!("synthetic{i}"), clip));
                } else {
                    let p = PathBuf::from(inp);
                    let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| format!("content{i}"));
                    contents.push((id, p));
                }
            }
            let opts = BenchOptions {
                workdir,
                jobs,
                playback,
            };
            let mut matrix = run_grid(&t, &contents, &table1_grid(), &opts)?;
            if let Some(bps) = txt2vid_bps {
                for (id, _) in &contents {
                    matrix.txt2vid_bps.insert(id.clone(), bps);
                }
            }
            emit_matrix(&matrix, &out)?;
            print_table(&matrix.rows());
            let skipped = matrix.skipped();
            if skipped > 0 {
                eprintln!("{skipped} of {} rows skipped", matrix.entries.len());
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Ratios { matrix, txt2vid_bps, out } => {
            let rows = load_matrix(&matrix).with_context(|| format!("loading {}", matrix.display()))?;
            let rows = with_ratios(&rows, txt2vid_bps)?;
            match out {
                Some(p) => write_file(&rows, &p)?,
                None => print_table(&rows),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Reference { out } => {
            write_file(&table1_reference_rows(), &out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn write_file(rows: &[MatrixRow], path: &Path) -> anyhow::Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_rows(rows, MatrixFormat::from_path(path), std::io::BufWriter::new(f))?;
    Ok(())
}

/// At least three significant figures: whole numbers from 100 up.
fn fmt_ratio(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let decimals = (2 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

fn print_table(rows: &[MatrixRow]) {
    // A closed stdout (e.g. piped into `head`) is not an error.
    let _ = write_table(&mut std::io::stdout().lock(), rows);
}

fn write_table(out: &mut impl Write, rows: &[MatrixRow]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<12} {:<26} {:>8} {:>12} {:>10}",
        "content", "params", "status", "total_kbps", "ratio"
    )?;
    for r in rows {
        let kbps = r.total_bps.map_or(String::new(), |b| format!("{:.1}", b / 1000.0));
        let ratio = r.ratio.map_or(String::new(), fmt_ratio);
        writeln!(
            out,
            "{:<12} {:<26} {:>8} {:>12} {:>10}",
            r.content_id,
            r.params().label(),
            r.status,
            kbps,
            ratio
        )?;
    }
    Ok(())
}
