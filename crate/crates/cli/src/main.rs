fn main() {
    std::process::exit(cybersick_cli::run(std::env::args_os()));
}
