fn main() {
    std::process::exit(conedet::cli::run(std::env::args_os()));
}
