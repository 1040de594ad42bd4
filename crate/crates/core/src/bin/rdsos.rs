fn main() {
    std::process::exit(rdsos::cli::main_with_args(std::env::args_os()));
}
