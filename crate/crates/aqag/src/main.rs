use clap::Parser;

fn main() {
    let cli = aqag::cli::Cli::parse();
    std::process::exit(aqag::cli::run(cli));
}
