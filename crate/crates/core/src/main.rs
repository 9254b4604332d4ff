fn main() {
    std::process::exit(mtlab::cli::run_with_args(std::env::args_os()));
}
