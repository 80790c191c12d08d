fn main() {
    std::process::exit(polartof::cli::run(std::env::args_os()));
}
