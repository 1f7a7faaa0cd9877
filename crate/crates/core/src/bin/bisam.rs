fn main() {
    std::process::exit(bisam::cli::run_from_args(std::env::args_os()));
}
