use clap::Parser;

fn main() -> anyhow::Result<()> {
    transponder_service::cli::run(transponder_service::cli::Cli::parse())
}
