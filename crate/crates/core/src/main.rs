fn main() {
    std::process::exit(sthdg::cli::main_with_args(std::env::args_os()));
}
