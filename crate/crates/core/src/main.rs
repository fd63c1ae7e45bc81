fn main() {
    std::process::exit(laqfuse::cli::run(std::env::args_os()));
}
