fn main() {
    std::process::exit(susnet_cli::run(std::env::args_os()));
}
