fn main() {
    std::process::exit(nsfvfe::harness::cli::main_with_args(std::env::args_os()));
}
