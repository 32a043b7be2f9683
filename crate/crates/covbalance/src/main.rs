fn main() {
    std::process::exit(covbalance::cli::main_with_args(std::env::args_os()));
}
