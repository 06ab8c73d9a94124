fn main() {
    std::process::exit(robust_rl::harness::cli::main_with_args(std::env::args_os()));
}
