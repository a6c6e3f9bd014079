use clap::Parser;

fn main() {
    let cli = imulab::cli::Cli::parse();
    if let Err(e) = imulab::cli::run(&cli) {
        eprintln!("imulab: {e}");
        std::process::exit(e.exit_code());
    }
}
