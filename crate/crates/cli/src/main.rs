use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mctn_cli::commands::{ablate, align, eval, gradcheck, synth, train};

/// Multimodal cyclic translation networks.
#[derive(Parser, Debug)]
#[command(name = "mctn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one variant and write its checkpoint, epoch log and reports.
    Train(train::TrainArgs),
    /// Evaluate a checkpoint on a dataset split from the source modality only.
    Eval(eval::EvalArgs),
    /// Train every applicable variant and role assignment and tabulate test metrics.
    Ablate(ablate::AblateArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(gradcheck::GradcheckArgs),
    /// Generate a synthetic aligned dataset.
    Synth(synth::SynthArgs),
    /// Align raw feature streams to word intervals and write a dataset.
    Align(align::AlignArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Ablate(a) => ablate::run(a),
        Command::Gradcheck(a) => gradcheck::run(a),
        Command::Synth(a) => synth::run(a),
        Command::Align(a) => align::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
