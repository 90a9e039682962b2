fn main() {
    std::process::exit(atypical::cli::run(std::env::args_os()));
}
