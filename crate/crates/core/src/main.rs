fn main() {
    std::process::exit(sdche::cli::main_with_args(std::env::args_os()));
}
