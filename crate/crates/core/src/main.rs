fn main() {
    std::process::exit(polarize::cli::run(std::env::args_os()));
}
