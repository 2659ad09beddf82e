use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dynsec", version, about = "Security index, attack synthesis, decoupling and identification for discrete-time LTI plants")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Model JSON file with keys A, Bd, Ba, C, Dd, Da and optional labels.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Relative rank tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Residual bound for unit-norm pencil null vectors.
    #[arg(long, global = true)]
    pub null_tol: Option<f64>,
    /// Band around the unit circle treated as the circle itself.
    #[arg(long, global = true)]
    pub boundary_tol: Option<f64>,
    /// Relative residual accepted by the identification consistency test.
    #[arg(long, global = true)]
    pub consistency_tol: Option<f64>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Include wall-clock timings; the report is then no longer reproducible.
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceKind {
    /// Decide from the channel count: `p` means raw output.
    Auto,
    Raw,
    Residual,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the rank assumptions and the spectrum of A.
    Validate,
    /// Invariant zeros of the pencil on the selected attack channels.
    Zeros {
        /// Comma-separated attack channels; all channels when omitted, none when empty.
        #[arg(long)]
        support: Option<String>,
    },
    /// Security index of one or every channel.
    Index {
        #[arg(long)]
        channel: Option<usize>,
        /// Largest support searched; defaults to m.
        #[arg(long)]
        qmax: Option<usize>,
        /// Greedy upper bound instead of the exact search.
        #[arg(long)]
        greedy: bool,
    },
    /// Detectability and identifiability against an attacker on q channels.
    Classify {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        qmax: Option<usize>,
        /// Output decays instead of vanishing; needs a Schur A.
        #[arg(long)]
        asymptotic: bool,
    },
    /// Undetectable attack on a channel over a finite horizon.
    Synth {
        #[arg(long)]
        channel: usize,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long)]
        qmax: Option<usize>,
        /// CSV file for the attack trace.
        #[arg(long)]
        attack_out: Option<PathBuf>,
        /// CSV file for the masking disturbance trace.
        #[arg(long)]
        disturbance_out: Option<PathBuf>,
    },
    /// Disturbance-decoupling residual generator.
    Filter {
        /// Number of Markov parameters of the attack-to-residual system.
        #[arg(long)]
        limp: Option<usize>,
    },
    /// Runs an output trace through the residual generator.
    Apply {
        /// Output trace CSV, one column per sensor.
        #[arg(long)]
        trace: PathBuf,
        /// CSV file for the residual trace.
        #[arg(long)]
        residual_out: Option<PathBuf>,
    },
    /// Simulates the plant.
    Simulate {
        /// Comma-separated initial state; zero when omitted.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Disturbance trace CSV; zero when omitted.
        #[arg(long)]
        d: Option<PathBuf>,
        /// Attack trace CSV; zero when omitted.
        #[arg(long)]
        a: Option<PathBuf>,
        /// Number of samples; defaults to the shortest input trace.
        #[arg(long)]
        horizon: Option<usize>,
        /// CSV file for the output trace.
        #[arg(long)]
        y_out: Option<PathBuf>,
    },
    /// Reconstructs a sparse attack from an output or residual trace.
    Identify {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = TraceKind::Auto)]
        input: TraceKind,
        /// CSV file for the estimated attack.
        #[arg(long)]
        estimate_out: Option<PathBuf>,
    },
}
