use clap::Parser;

fn main() {
    let cli = tscl_cli::Cli::parse();
    if let Err(e) = tscl_cli::run(cli) {
        eprintln!("error[{}]: {e}", e.kind());
        std::process::exit(e.exit_code());
    }
}
