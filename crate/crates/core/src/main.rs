fn main() {
    std::process::exit(ionlink::cli::main_with_args(std::env::args_os()));
}
