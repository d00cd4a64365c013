fn main() {
    std::process::exit(ringforge::cli::run(std::env::args_os()));
}
