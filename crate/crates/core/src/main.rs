fn main() {
    std::process::exit(gmacsec::cli::run(std::env::args_os()));
}
