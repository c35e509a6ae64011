fn main() {
    std::process::exit(curtain_cli::run(std::env::args_os()));
}
