use clap::Parser;

fn main() {
    let cli = addfunc_cli::Cli::parse();
    std::process::exit(addfunc_cli::run(cli));
}
