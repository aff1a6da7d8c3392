fn main() {
    std::process::exit(codedsm::harness::run_cli(std::env::args_os()));
}
