fn main() {
    env_logger::init();
    std::process::exit(agres_cli::run_args(std::env::args_os()));
}
