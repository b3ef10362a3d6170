fn main() {
    std::process::exit(smg::cli::main_with_args(std::env::args_os()));
}
