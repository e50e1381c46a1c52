fn main() {
    std::process::exit(asymde::cli::run(std::env::args_os()));
}
