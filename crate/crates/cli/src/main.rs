fn main() {
    std::process::exit(matml_cli::run(std::env::args_os()));
}
