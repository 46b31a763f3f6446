fn main() {
    std::process::exit(mongeampere::cli::run(std::env::args_os()));
}
