fn main() {
    std::process::exit(tall_lp_cli::main_with_args(std::env::args_os()));
}
