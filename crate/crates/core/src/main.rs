fn main() {
    std::process::exit(luce_contracts::cli::run(std::env::args_os()));
}
