fn main() {
    std::process::exit(imave_cli::run(std::env::args_os()));
}
