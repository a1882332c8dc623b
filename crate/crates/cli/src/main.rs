use clap::Parser;

fn main() {
    let cli = expsplit_cli::Cli::parse();
    std::process::exit(expsplit_cli::dispatch(cli));
}
