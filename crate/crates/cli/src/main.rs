fn main() {
    std::process::exit(mueller_cli::run(std::env::args_os()));
}
