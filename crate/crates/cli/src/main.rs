//! `datasieve` — corpus scoring, filtering, and subset selection.
//!
//! The stages compose into two end-to-end flows:
//!
//! ```text
//! chunk -> filter -> fit (target) + fit (raw) -> score -> select -> extract -> report
//! chunk -> filter -> train-clf               -> score -> select -> extract -> report
//! ```
//!
//! Every command is deterministic given its inputs, flags, and seed. Runtime
//! failures exit nonzero with a one-line JSON envelope on stderr:
//! `{"error": "<kind>", "message": "..."}`.

mod args;
mod commands;
mod config;

use clap::Parser;

use args::{Cli, Command};

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Chunk(args) => commands::cmd_chunk(args),
        Command::Filter(args) => commands::cmd_filter(args),
        Command::Fit(args) => commands::cmd_fit(args),
        Command::TrainClf(args) => commands::cmd_train_clf(args),
        Command::Score(args) => commands::cmd_score(args),
        Command::Select(args) => commands::cmd_select(args),
        Command::Extract(args) => commands::cmd_extract(args),
        Command::Report(args) => commands::cmd_report(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        let kind = error
            .chain()
            .find_map(|cause| cause.downcast_ref::<datasieve_core::Error>())
            .map(datasieve_core::Error::kind)
            .unwrap_or("cli");
        let envelope = serde_json::json!({
            "error": kind,
            "message": format!("{error:#}"),
        });
        eprintln!("{envelope}");
        std::process::exit(1);
    }
}
