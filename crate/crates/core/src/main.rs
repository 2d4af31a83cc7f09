fn main() {
    std::process::exit(acbc::cli::run(std::env::args_os()));
}
