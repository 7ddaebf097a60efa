use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use larf_cli::{execute, Cli};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let env = |key: &str| std::env::var(key).ok();
    match execute(cli, &mut std::io::stdin().lock(), &env).await {
        Ok(output) => {
            for w in &output.warnings {
                eprintln!("{w}");
            }
            let mut stdout = std::io::stdout().lock();
            if let Err(e) = stdout.write_all(output.stdout.as_bytes()).and_then(|()| stdout.flush()) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(5);
            }
            ExitCode::from(output.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
