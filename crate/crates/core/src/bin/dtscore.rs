use clap::Parser;
use dtscore::cli::{self, Cli, ExitStatus};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let status = match Cli::try_parse() {
        Ok(args) => cli::run(args),
        Err(e) => {
            // clap would exit 2 on usage errors, which is our backend code.
            let usage_error = e.use_stderr();
            e.print()?;
            if usage_error {
                ExitStatus::ValidationError
            } else {
                ExitStatus::Success
            }
        }
    };
    std::process::exit(status.code());
}
