fn main() {
    std::process::exit(caprouter_cli::run(std::env::args_os()));
}
