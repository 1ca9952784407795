fn main() {
    std::process::exit(medeval_cli::run(std::env::args_os()));
}
