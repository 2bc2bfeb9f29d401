fn main() {
    std::process::exit(popcode::cli::main_with_args(std::env::args_os()));
}
