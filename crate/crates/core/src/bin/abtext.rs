//! Command-line front end over `abtext::pipeline`.

use std::path::PathBuf;
use std::process::ExitCode;

use abtext::pipeline::{self, RunConfig};
use abtext::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "abtext", version, about = "Refine, augment, evaluate and synthesize abnormal-text detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Second-stage refinement of first-stage detections.
    Refine(Common),
    /// Write scale-expansion, location-shift and contrast samples.
    Augment(Common),
    /// Precision, recall and F1 of predictions against ground truth.
    Eval(Common),
    /// Write synthetic fixtures with ground truth.
    Synth(Common),
}

#[derive(Args)]
struct Common {
    /// Detection file (refine), prediction file (eval).
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Character box file.
    #[arg(long)]
    chars: Option<PathBuf>,
    /// Image directory (refine) or seed marker masks (augment).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Ground-truth file (eval).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Image ids to leave out of evaluation, one per line.
    #[arg(long)]
    exclude: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated IoU thresholds.
    #[arg(long)]
    iou: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Reject detections scoring below this before refinement.
    #[arg(long)]
    min_score: Option<f64>,
    /// Probability threshold for mask images.
    #[arg(long)]
    mask_threshold: Option<f64>,
    /// Resize images to WxH before refinement.
    #[arg(long)]
    resize: Option<String>,
    /// Any configuration key, as key=value; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    /// Defaults, then the config file, then flags.
    fn into_config(self) -> abtext::Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(p) = &self.config {
            c.apply_file(p)?;
        }
        for pair in &self.set {
            c.set_pair(pair)?;
        }
        let paths = [
            ("detections", self.detections),
            ("chars", self.chars),
            ("images", self.images),
            ("gt", self.gt),
            ("exclude", self.exclude),
            ("out", self.out),
        ];
        for (k, v) in paths {
            if let Some(v) = v {
                c.set(k, &v.to_string_lossy())?;
            }
        }
        let values = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("iou", self.iou),
            ("workers", self.workers.map(|v| v.to_string())),
            ("min_score", self.min_score.map(|v| v.to_string())),
            ("mask_threshold", self.mask_threshold.map(|v| v.to_string())),
            ("resize", self.resize),
        ];
        for (k, v) in values {
            if let Some(v) = v {
                c.set(k, &v)?;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> abtext::Result<()> {
    match cli.command {
        Command::Refine(a) => {
            let outputs = pipeline::cmd_refine(&a.into_config()?)?;
            let kept: usize = outputs.iter().map(|o| o.kept.len()).sum();
            let rejected: usize = outputs.iter().map(|o| o.rejected.len()).sum();
            println!("{} images: {kept} kept, {rejected} rejected", outputs.len());
        }
        Command::Augment(a) => {
            let s = pipeline::cmd_augment(&a.into_config()?)?;
            println!(
                "{} markers: {} expansions, {} shifts, {} composites",
                s.markers.len(),
                s.expansions,
                s.shifts,
                s.composites
            );
        }
        Command::Eval(a) => {
            let (_, table) = pipeline::cmd_eval(&a.into_config()?)?;
            print!("{table}");
        }
        Command::Synth(a) => {
            let entries = pipeline::cmd_synth(&a.into_config()?)?;
            let fps: usize = entries.iter().map(|e| e.false_positives.len()).sum();
            println!("{} fixtures, {fps} injected false positives", entries.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors; 2 is reserved for invariant failures here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> ExitCode {
    ExitCode::from(e.exit_code() as u8)
}
