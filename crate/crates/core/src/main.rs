fn main() {
    std::process::exit(hydrorad::cli::run(std::env::args_os()));
}
