use std::process::ExitCode;

use clap::Parser;
use septensor_cli::{run, Cli, RunConfig, EXIT_ERROR};

fn thread_count(cli: &Cli) -> Option<usize> {
    if let Ok(v) = std::env::var("SEPTENSOR_THREADS") {
        return v.parse().ok().filter(|&n| n > 0);
    }
    cli.config.as_ref().and_then(|p| RunConfig::load(p).ok()).and_then(|c| c.threads)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_ERROR as u8) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = thread_count(&cli) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = match run(&cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
