use clap::Parser;

fn main() {
    if let Err(e) = dcs::cli::run(dcs::cli::Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
