//! `mcg`: hierarchical segmentation, combinatorial object proposals,
//! parameter learning and evaluation from the command line.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "mcg", version, about = "Multiscale combinatorial grouping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// JSON pipeline configuration; unspecified fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Segment an image at every configured scale and combine the results.
    Segment {
        /// Binary PGM (P5) or PPM (P6) image.
        image: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rank object proposals from one or more hierarchies.
    Propose {
        /// Hierarchy files, or directories written by `segment`.
        #[arg(required = true)]
        hierarchies: Vec<PathBuf>,
        /// Learned per-list counts (from `learn`).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Learned regressor (from `learn`).
        #[arg(long)]
        regressor: Option<PathBuf>,
        /// Keep at most this many proposals.
        #[arg(long)]
        top: Option<usize>,
        /// Output JSON-lines file; a `.hier` sidecar lists the hierarchies.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Learn per-list counts and a ranking regressor on a training corpus.
    Learn {
        /// Lines of `image<TAB>ground_truth`. The first column may also be
        /// a directory written by `segment`.
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory for `params.json` and `regressor.json`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Achievable quality against the number of proposals.
    Eval {
        #[arg(long, requires = "gt", conflicts_with = "manifest")]
        proposals: Option<PathBuf>,
        /// Ground-truth instances (MCGL label map or P5 image).
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Lines of `proposals<TAB>ground_truth`.
        #[arg(long, required_unless_present = "proposals")]
        manifest: Option<PathBuf>,
        /// Prefix lengths to report; geometric by default.
        #[arg(long, value_delimiter = ',')]
        counts: Vec<usize>,
        /// Evaluate only the top proposals of each pool.
        #[arg(long)]
        top: Option<usize>,
        /// CSV output; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bounding boxes of ranked proposals, exact duplicates removed.
    Boxes {
        proposals: PathBuf,
        #[arg(long)]
        top: Option<usize>,
        /// CSV output; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Segment { image, out, common } => commands::segment(&image, &out, &common),
        Command::Propose { hierarchies, params, regressor, top, out, common } => {
            commands::propose(&hierarchies, params.as_deref(), regressor.as_deref(), top, &out, &common)
        }
        Command::Learn { manifest, out, common } => commands::learn(&manifest, &out, &common),
        Command::Eval { proposals, gt, manifest, counts, top, out } => {
            commands::eval(proposals, gt, manifest, &counts, top, out.as_deref())
        }
        Command::Boxes { proposals, top, out } => commands::boxes(&proposals, top, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already embed their source in the message
            let mut parts: Vec<String> = Vec::new();
            for cause in e.chain() {
                let s = cause.to_string();
                if !parts.last().is_some_and(|p| p.contains(&s)) {
                    parts.push(s);
                }
            }
            eprintln!("error: {}", parts.join(": "));
            ExitCode::FAILURE
        }
    }
}
