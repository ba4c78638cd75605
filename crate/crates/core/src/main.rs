fn main() {
    std::process::exit(sbvar::cli::run(std::env::args_os()));
}
