fn main() {
    std::process::exit(robust_adp::harness::cli::main_with_args(std::env::args_os()));
}
