fn main() {
    std::process::exit(clozecheck::cli::main_with_args(std::env::args_os()));
}
