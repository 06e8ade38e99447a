fn main() {
    std::process::exit(rg_core::cli::main_with_args(std::env::args_os()));
}
