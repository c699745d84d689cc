fn main() {
    std::process::exit(fadsim::cli::run(std::env::args_os()));
}
