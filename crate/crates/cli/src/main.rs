fn main() {
    std::process::exit(whl_cli::run(std::env::args_os()));
}
