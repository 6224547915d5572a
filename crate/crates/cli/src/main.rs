fn main() {
    std::process::exit(maxstable_cli::run(std::env::args_os()));
}
