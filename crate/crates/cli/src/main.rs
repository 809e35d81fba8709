fn main() {
    std::process::exit(wealth_causal_cli::run(std::env::args_os()));
}
