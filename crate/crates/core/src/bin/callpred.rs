fn main() {
    std::process::exit(callpred::cli::run(std::env::args_os()));
}
