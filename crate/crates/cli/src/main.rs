fn main() {
    std::process::exit(pme_cli::run(std::env::args_os()).exit_code);
}
