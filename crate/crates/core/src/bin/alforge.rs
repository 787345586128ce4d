fn main() {
    std::process::exit(alforge::cli::run_cli(std::env::args_os()));
}
