fn main() {
    std::process::exit(bdcat::cli::run(std::env::args_os()));
}
