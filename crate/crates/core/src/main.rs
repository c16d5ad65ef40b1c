fn main() {
    std::process::exit(twinphoton::cli::run(std::env::args_os()));
}
