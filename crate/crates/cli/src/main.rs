fn main() {
    std::process::exit(loopgas_cli::run_from_env());
}
