mod commands;
mod exit;

use clap::{Parser, Subcommand};

/// Multi-modal voxel-fusion detection toolkit.
#[derive(Parser)]
#[command(name = "voxfuse", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a scene configuration.
    Synth {
        /// Scene generation config (JSON).
        #[arg(long)]
        config: String,
        /// Output dataset directory.
        #[arg(long)]
        out: String,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the detection pipeline over a dataset and evaluate it.
    Run {
        /// Run config (JSON) with `data_dir` and `pipeline` sections.
        #[arg(long)]
        config: String,
        /// Output directory for detections and reports.
        #[arg(long)]
        out: String,
        /// Override the weight seed (switches weights to seeded init).
        #[arg(long)]
        seed: Option<u64>,
        /// Override enabled modalities, comma separated (e.g. `R,4R,L`).
        #[arg(long)]
        modalities: Option<String>,
        /// Worker threads for frame processing.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Re-evaluate stored detections against a dataset's ground truth.
    Eval {
        /// Eval config (JSON) with `data_dir` and `detections` paths.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: String,
    },
    /// Calibration utilities.
    #[command(subcommand)]
    Calib(CalibCommand),
    /// Compute a rotation homography between two rig cameras and
    /// optionally warp an image.
    Align {
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: String,
    },
    /// Perturb an extrinsic transform by exact translation/rotation noise.
    Perturb {
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum CalibCommand {
    /// Solve the camera<-sensor rigid transform from 3D-2D correspondences.
    Solve {
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: String,
    },
    /// Check rectified stereo pairs for scanline alignment.
    Check {
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: String,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, out, seed } => commands::synth(&config, &out, seed),
        Command::Run {
            config,
            out,
            seed,
            modalities,
            jobs,
        } => commands::run(&config, &out, seed, modalities.as_deref(), jobs),
        Command::Eval { config, out } => commands::eval(&config, &out),
        Command::Calib(CalibCommand::Solve { config, out }) => commands::calib_solve(&config, &out),
        Command::Calib(CalibCommand::Check { config, out }) => commands::calib_check(&config, &out),
        Command::Align { config, out } => commands::align(&config, &out),
        Command::Perturb { config, out, seed } => commands::perturb(&config, &out, seed),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
