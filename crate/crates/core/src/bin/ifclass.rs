fn main() {
    std::process::exit(ifclass::cli::main_with_args(std::env::args_os()));
}
