fn main() {
    std::process::exit(lfdlcq::cli::run(std::env::args_os()));
}
