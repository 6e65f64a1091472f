fn main() {
    std::process::exit(thermonu::cli::run(std::env::args_os()));
}
