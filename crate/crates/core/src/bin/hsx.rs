fn main() {
    std::process::exit(hunter_saxton::cli::main_with_args(std::env::args_os()));
}
