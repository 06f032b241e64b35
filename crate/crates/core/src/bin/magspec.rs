fn main() {
    std::process::exit(magspec::harness::cli::run(std::env::args_os()));
}
