fn main() {
    std::process::exit(mdlfuzz::cli::run(std::env::args_os()));
}
