use clap::Parser;

fn main() {
    std::process::exit(xxz_maba_cli::run(xxz_maba_cli::Cli::parse()));
}
