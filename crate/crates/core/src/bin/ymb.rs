fn main() {
    std::process::exit(ymb_core::cli::run(std::env::args_os()));
}
