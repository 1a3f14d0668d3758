fn main() {
    std::process::exit(opialkit::cli::main_with_args(std::env::args_os()));
}
