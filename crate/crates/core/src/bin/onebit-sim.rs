fn main() {
    std::process::exit(onebit_ci::cli::run(std::env::args_os()));
}
