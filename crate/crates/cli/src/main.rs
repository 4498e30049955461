fn main() {
    std::process::exit(kloop_cli::run(std::env::args_os()));
}
