fn main() {
    std::process::exit(hdriqa::cli::run(std::env::args_os()));
}
