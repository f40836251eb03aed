fn main() {
    std::process::exit(pmelab::cli::main_with_args(std::env::args_os()));
}
