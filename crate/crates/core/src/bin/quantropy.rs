fn main() {
    std::process::exit(quantropy::cli::main_with_args(std::env::args_os()));
}
