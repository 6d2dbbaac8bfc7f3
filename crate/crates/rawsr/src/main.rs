fn main() {
    std::process::exit(rawsr::cli::run(std::env::args_os()));
}
