fn main() {
    std::process::exit(opchain::harness::run_cli(std::env::args_os()));
}
