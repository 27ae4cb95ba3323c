fn main() {
    std::process::exit(tnet_cli::run(std::env::args_os()));
}
