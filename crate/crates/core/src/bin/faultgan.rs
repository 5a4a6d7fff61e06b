fn main() {
    std::process::exit(faultgan::cli::run(std::env::args_os()));
}
