fn main() {
    std::process::exit(dyntriv_cli::run_cli(std::env::args_os()));
}
