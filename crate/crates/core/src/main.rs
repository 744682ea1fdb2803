fn main() {
    std::process::exit(diss::cli::run_cli(std::env::args_os()));
}
