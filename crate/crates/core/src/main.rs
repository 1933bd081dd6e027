fn main() {
    std::process::exit(nmfcov::cli::run(std::env::args_os()));
}
