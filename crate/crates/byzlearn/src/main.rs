fn main() {
    std::process::exit(byzlearn::harness::cli(std::env::args_os()));
}
