fn main() {
    std::process::exit(coopinit::cli::main_with_args(std::env::args_os()));
}
