fn main() {
    std::process::exit(bzk::cli::run(std::env::args_os()));
}
