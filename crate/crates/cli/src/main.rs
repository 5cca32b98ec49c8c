use clap::Parser;

fn main() {
    let cli = houghvp_cli::Cli::parse();
    if let Err(e) = houghvp_cli::run(cli) {
        eprintln!("houghvp: {e}");
        std::process::exit(e.exit_code());
    }
}
