use clap::Parser;

fn main() {
    let cli = bslq::cli::Cli::parse();
    let code = bslq::cli::run(&cli, &mut std::io::stderr());
    std::process::exit(code);
}
