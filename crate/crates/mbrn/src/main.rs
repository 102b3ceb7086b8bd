use clap::Parser;

use mbrn::cli::{Cli, Command};
use mbrn::matrix::MatrixComputeError;
use mbrn::scorer::ScoreError;
use mbrn::teacher::TeacherError;
use mbrn::{commands, config};

/// 0 success, 2 validation, 3 transport, 4 protocol.
fn exit_code(error: &anyhow::Error) -> i32 {
    for cause in error.chain() {
        if let Some(score) = cause.downcast_ref::<ScoreError>() {
            return if score.is_transport() { 3 } else { 4 };
        }
        if let Some(teacher) = cause.downcast_ref::<TeacherError>() {
            return match teacher {
                TeacherError::Transport { .. } => 3,
                TeacherError::Protocol { .. } | TeacherError::Shortfall { .. } => 4,
                _ => 2,
            };
        }
        if let Some(matrix) = cause.downcast_ref::<MatrixComputeError>() {
            if let Some(score) = matrix.score_error() {
                return if score.is_transport() { 3 } else { 4 };
            }
            return 2;
        }
    }
    2
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let file = config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Sample(args) => commands::sample(args, &file),
        Command::Score(args) => commands::score(args, &file),
        Command::Select(args) => commands::select(args, &file),
        Command::Build(args) => commands::build(args, &file),
        Command::Subsample(args) => commands::subsample(args, &file),
        Command::Diversity(args) => commands::diversity(args, &file),
        Command::Evaluate(args) => commands::evaluate(args, &file),
        Command::StagePlan(args) => commands::stage_plan_cmd(args, &file),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(error) = run(&cli) {
        eprintln!("error: {error:#}");
        std::process::exit(exit_code(&error));
    }
}
