use clap::Parser;

fn main() {
    let cli = gwi_core::cli::Cli::parse();
    std::process::exit(gwi_core::cli::run(&cli));
}
