fn main() {
    std::process::exit(async_sparse_cli::run_cli(std::env::args_os()));
}
