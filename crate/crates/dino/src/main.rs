use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = dino::cli::Cli::parse();
    match dino::cli::run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
