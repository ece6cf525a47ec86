fn main() {
    std::process::exit(strokebench::cli::run(std::env::args_os()));
}
