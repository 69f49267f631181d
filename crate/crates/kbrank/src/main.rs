fn main() {
    std::process::exit(kbrank::cli::run(std::env::args_os()));
}
