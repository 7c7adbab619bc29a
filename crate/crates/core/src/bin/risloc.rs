fn main() {
    std::process::exit(risloc::harness::cli::cli(std::env::args_os()));
}
