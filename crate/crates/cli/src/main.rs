use clap::Parser;

fn main() {
    let cli = sync_ramsey_cli::Cli::parse();
    if let Err(e) = sync_ramsey_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
