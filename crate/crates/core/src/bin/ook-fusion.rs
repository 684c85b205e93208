fn main() {
    std::process::exit(ook_fusion::cli::run(std::env::args_os()));
}
